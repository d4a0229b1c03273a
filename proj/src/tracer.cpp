#include "tracecheck/tracer.hpp"

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <string>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "tracecheck/errors.hpp"

namespace tracecheck {

struct Clock::State {
    Kind kind;
    std::atomic<std::int64_t> counter{0};
    std::string path;
};

namespace {

[[noreturn]] void io_error(const std::string& what) {
    throw Error(ErrorKind::Io, what + ": " + std::strerror(errno));
}

// Releases the lock and closes on every exit path.
class LockedFile {
public:
    explicit LockedFile(const std::string& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) io_error("cannot open clock file '" + path + "'");
        if (::flock(fd_, LOCK_EX) != 0) {
            int saved = errno;
            ::close(fd_);
            errno = saved;
            io_error("cannot lock clock file '" + path + "'");
        }
    }
    ~LockedFile() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    LockedFile(const LockedFile&) = delete;
    LockedFile& operator=(const LockedFile&) = delete;
    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

std::int64_t next_file_clock(const std::string& path) {
    LockedFile file(path);
    std::string text;
    char buf[64];
    ssize_t n;
    if (::lseek(file.fd(), 0, SEEK_SET) < 0) io_error("seek on clock file failed");
    while ((n = ::read(file.fd(), buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
    if (n < 0) io_error("cannot read clock file '" + path + "'");

    std::int64_t current = 0;
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
            current = std::stoll(text);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Io, "clock file '" + path + "' does not hold a decimal integer");
        }
    }
    const std::int64_t next = current + 1;
    const std::string out = std::to_string(next) + "\n";
    if (::ftruncate(file.fd(), 0) != 0) io_error("cannot truncate clock file");
    if (::pwrite(file.fd(), out.data(), out.size(), 0) != static_cast<ssize_t>(out.size()))
        io_error("cannot write clock file '" + path + "'");
    return next;
}

bool write_all(int fd, const std::string& data) {
    std::size_t done = 0;
    while (done < data.size()) {
        ssize_t n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

Clock Clock::in_memory(std::int64_t start) {
    auto s = std::make_shared<State>();
    s->kind = Kind::InMemory;
    s->counter = start;
    return Clock(std::move(s));
}

Clock Clock::file_based(std::string path) {
    auto s = std::make_shared<State>();
    s->kind = Kind::FileBased;
    s->path = std::move(path);
    return Clock(std::move(s));
}

Clock Clock::explicit_values() {
    auto s = std::make_shared<State>();
    s->kind = Kind::Explicit;
    return Clock(std::move(s));
}

Clock::Kind Clock::kind() const noexcept { return state_->kind; }

std::int64_t Clock::next() {
    switch (state_->kind) {
    case Kind::InMemory: return state_->counter.fetch_add(1) + 1;
    case Kind::FileBased: return next_file_clock(state_->path);
    case Kind::Explicit: break;
    }
    throw Error(ErrorKind::Usage, "an explicit clock has no value of its own");
}

// ---------------------------------------------------------------------------

VirtualField::VirtualField(Tracer& tracer, std::string variable, Path prefix)
    : tracer_(&tracer), variable_(std::move(variable)), prefix_(std::move(prefix)) {}

VirtualField VirtualField::get_field(const std::string& key) const {
    Path p = prefix_;
    p.push_back(key);
    return VirtualField(*tracer_, variable_, std::move(p));
}

void VirtualField::apply(std::string_view op, std::vector<Value> args) const {
    tracer_->notify_change(variable_, prefix_, op, std::move(args));
}

void VirtualField::update(Value v) const { apply("Update", {std::move(v)}); }
void VirtualField::add(Value v) const { apply("Add", {std::move(v)}); }
void VirtualField::remove(Value v) const { apply("Remove", {std::move(v)}); }
void VirtualField::clear() const { apply("Clear", {}); }
void VirtualField::add_to_bag(Value v) const { apply("AddToBag", {std::move(v)}); }
void VirtualField::remove_from_bag(Value v) const { apply("RemoveFromBag", {std::move(v)}); }
void VirtualField::append(Value v) const { apply("Append", {std::move(v)}); }

// ---------------------------------------------------------------------------

Tracer::Tracer(std::string path, Clock clock, int fd) : path_(std::move(path)), clock_(std::move(clock)), fd_(fd) {}

Tracer::Tracer(Tracer&& other) noexcept
    : path_(std::move(other.path_)), clock_(other.clock_), fd_(std::exchange(other.fd_, -1)),
      pending_(std::move(other.pending_)) {}

Tracer& Tracer::operator=(Tracer&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        clock_ = other.clock_;
        fd_ = std::exchange(other.fd_, -1);
        pending_ = std::move(other.pending_);
    }
    return *this;
}

Tracer::~Tracer() {
    if (fd_ >= 0) ::close(fd_);
}

Tracer Tracer::get_tracer(std::string trace_path, Clock clock) {
    if (trace_path.empty()) {
        const char* env = std::getenv("TRACE_PATH");
        if (!env || !*env) throw Error(ErrorKind::Io, "no trace path given and TRACE_PATH is unset");
        trace_path = env;
    }
    int fd = ::open(trace_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) io_error("cannot open trace file '" + trace_path + "'");
    return Tracer(std::move(trace_path), std::move(clock), fd);
}

void Tracer::notify_change(const std::string& var, Path path, std::string_view op, std::vector<Value> args) {
    if (!is_known_operator(op))
        throw Error(ErrorKind::UnknownOp, "unknown update operator '" + std::string(op) + "'");
    if (is_reserved_key(var) || var.empty())
        throw Error(ErrorKind::Schema, "'" + var + "' cannot be used as a variable name").with_field(var);
    pending_.emplace_back(var, UpdateOp{std::string(op), std::move(path), std::move(args)});
}

std::int64_t Tracer::log(std::optional<std::string> event, std::optional<std::vector<Value>> event_args,
                         std::optional<std::int64_t> clock_value) {
    if (fd_ < 0) throw Error(ErrorKind::Io, "tracer has been moved from");
    std::int64_t stamp;
    if (clock_.is_explicit()) {
        if (!clock_value) throw Error(ErrorKind::MissingClock, "explicit clock requires a clock value at log time");
        if (*clock_value < 0) throw Error(ErrorKind::Usage, "clock values must be non-negative");
        stamp = *clock_value;
    } else {
        if (clock_value) throw Error(ErrorKind::Usage, "clock value given to a tracer with a managed clock");
        stamp = clock_.next();
    }

    TraceEntry entry;
    entry.clock = stamp;
    for (const auto& [var, op] : pending_) entry.updates[var].push_back(op);
    if (event) entry.event = std::move(*event);
    if (event_args) {
        std::vector<std::string> rendered;
        rendered.reserve(event_args->size());
        for (const auto& a : *event_args) rendered.push_back(to_event_arg(a));
        entry.event_args = std::move(rendered);
    }

    const std::string line = serialize_entry(entry) + "\n";
    if (!write_all(fd_, line)) io_error("cannot append to trace file '" + path_ + "'");
    pending_.clear();
    return stamp;
}

}  // namespace tracecheck
