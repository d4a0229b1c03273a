#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tracecheck {

enum class ErrorKind {
    Path,
    Type,
    BagUnderflow,
    UnknownOp,
    Overflow,
    Parse,
    Schema,
    Io,
    MissingClock,
    GuardFailed,
    UnknownInvariant,
    UnknownAction,
    UnknownEvent,
    InvalidSpec,
    InvalidComposition,
    SimDeadlock,
    Budget,
    Usage,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers dispatch on kind().
/// `line` is 1-based and set for errors tied to a trace file line;
/// `index` is the position of the failing item inside a list (an update
/// list, a composition, ...).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::string& field() const noexcept { return field_; }
    std::optional<std::size_t> line() const noexcept { return line_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

    Error& with_field(std::string field);
    Error& with_line(std::size_t line);
    Error& with_index(std::size_t index);

private:
    void refresh();

    ErrorKind kind_;
    std::string detail_;
    std::string field_;
    std::optional<std::size_t> line_;
    std::optional<std::size_t> index_;
    std::string what_;

public:
    const char* what() const noexcept override { return what_.c_str(); }
};

}  // namespace tracecheck
