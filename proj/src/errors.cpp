#include "tracecheck/errors.hpp"

namespace tracecheck {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Path: return "PathError";
    case ErrorKind::Type: return "TypeError";
    case ErrorKind::BagUnderflow: return "BagUnderflow";
    case ErrorKind::UnknownOp: return "UnknownOp";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::MissingClock: return "MissingClock";
    case ErrorKind::GuardFailed: return "GuardFailed";
    case ErrorKind::UnknownInvariant: return "UnknownInvariant";
    case ErrorKind::UnknownAction: return "UnknownAction";
    case ErrorKind::UnknownEvent: return "UnknownEvent";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidComposition: return "InvalidComposition";
    case ErrorKind::SimDeadlock: return "SimDeadlock";
    case ErrorKind::Budget: return "Budget";
    case ErrorKind::Usage: return "UsageError";
    }
    return "Error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind), detail_(message) {
    refresh();
}

Error& Error::with_field(std::string field) {
    field_ = std::move(field);
    refresh();
    return *this;
}

Error& Error::with_line(std::size_t line) {
    line_ = line;
    refresh();
    return *this;
}

Error& Error::with_index(std::size_t index) {
    index_ = index;
    refresh();
    return *this;
}

void Error::refresh() {
    what_ = std::string(to_string(kind_));
    if (line_) what_ += " at line " + std::to_string(*line_);
    if (index_) what_ += " in item " + std::to_string(*index_);
    if (!field_.empty()) what_ += " (field '" + field_ + "')";
    what_ += ": " + detail_;
}

}  // namespace tracecheck
