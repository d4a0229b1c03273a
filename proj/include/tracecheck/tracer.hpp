#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tracecheck/trace.hpp"
#include "tracecheck/value.hpp"

namespace tracecheck {

/// Timestamp source shared by the tracers of one system. Copies of a Clock
/// refer to the same counter and may be used from several threads.
///
///  - in_memory: components are threads of one process.
///  - file_based: components are processes on one host; the counter lives
///    in a file (decimal integer, newline-terminated) updated under an
///    exclusive advisory lock.
///  - explicit_values: the caller passes its own (e.g. Lamport) clock value
///    to every log call.
class Clock {
public:
    enum class Kind { InMemory, FileBased, Explicit };

    static Clock in_memory(std::int64_t start = 0);
    static Clock file_based(std::string path);
    static Clock explicit_values();

    Kind kind() const noexcept;
    bool is_explicit() const noexcept { return kind() == Kind::Explicit; }

    /// Next timestamp, strictly greater than every value previously handed
    /// out through this clock. Throws Usage on an explicit clock.
    std::int64_t next();

    struct State;

private:
    explicit Clock(std::shared_ptr<State> state) : state_(std::move(state)) {}
    std::shared_ptr<State> state_;
};

class Tracer;

/// Handle on a variable (or a field nested in one) that records updates
/// through its tracer without repeating the variable name and path.
class VirtualField {
public:
    VirtualField(Tracer& tracer, std::string variable, Path prefix = {});

    VirtualField get_field(const std::string& key) const;

    void apply(std::string_view op, std::vector<Value> args) const;
    void update(Value v) const;
    void add(Value v) const;
    void remove(Value v) const;
    void clear() const;
    void add_to_bag(Value v) const;
    void remove_from_bag(Value v) const;
    void append(Value v) const;

    const std::string& variable() const noexcept { return variable_; }
    const Path& prefix() const noexcept { return prefix_; }

private:
    Tracer* tracer_;
    std::string variable_;
    Path prefix_;
};

/// Buffers variable updates and appends one NDJSON entry per log() call.
/// A tracer belongs to a single thread; only its Clock is shared.
class Tracer {
public:
    /// Appends to `trace_path`, creating it empty if needed. An empty path
    /// falls back to the TRACE_PATH environment variable. Throws IoError.
    static Tracer get_tracer(std::string trace_path, Clock clock);

    Tracer(Tracer&&) noexcept;
    Tracer& operator=(Tracer&&) noexcept;
    Tracer(const Tracer&) = delete;
    Tracer& operator=(const Tracer&) = delete;
    ~Tracer();

    void notify_change(const std::string& var, Path path, std::string_view op, std::vector<Value> args);
    VirtualField get_variable_tracer(const std::string& var) { return VirtualField(*this, var); }

    /// Writes the buffered updates as one entry and returns its clock.
    /// `clock_value` must be given iff the clock is explicit (MissingClock
    /// otherwise). On IoError the buffer is kept for a later attempt.
    std::int64_t log(std::optional<std::string> event = std::nullopt,
                     std::optional<std::vector<Value>> event_args = std::nullopt,
                     std::optional<std::int64_t> clock_value = std::nullopt);

    const std::string& path() const noexcept { return path_; }
    std::size_t pending() const noexcept { return pending_.size(); }

private:
    Tracer(std::string path, Clock clock, int fd);

    std::string path_;
    Clock clock_;
    int fd_ = -1;
    std::vector<std::pair<std::string, UpdateOp>> pending_;
};

}  // namespace tracecheck
