#include "tracecheck/protocols/sim.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include "tracecheck/errors.hpp"

namespace tracecheck {

std::string_view to_string(RecordLevel level) {
    switch (level) {
    case RecordLevel::VEA: return "VEA";
    case RecordLevel::V: return "V";
    case RecordLevel::VpEA: return "VpEA";
    case RecordLevel::EA: return "EA";
    case RecordLevel::E: return "E";
    }
    return "?";
}

RecordLevel parse_record_level(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "vea") return RecordLevel::VEA;
    if (lower == "v") return RecordLevel::V;
    if (lower == "vpea") return RecordLevel::VpEA;
    if (lower == "ea") return RecordLevel::EA;
    if (lower == "e") return RecordLevel::E;
    throw Error(ErrorKind::Usage, "unknown record level '" + std::string(text) + "' (vea, v, vpea, ea, e)");
}

std::int64_t Rng::uniform(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(gen_());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + x % span);
}

void Scheduler::at(std::int64_t time, std::function<void()> fn) {
    queue_.push({std::max(time, now_), seq_++, std::move(fn)});
}

void Scheduler::run() {
    while (!queue_.empty()) {
        Item item = queue_.top();
        queue_.pop();
        if (item.time > limit_)
            throw Error(ErrorKind::SimDeadlock, "no completion within " + std::to_string(limit_) + " time units");
        now_ = item.time;
        item.fn();
    }
}

void SimNetwork::send(Message m) {
    ++sent_;
    if (rng_.chance(loss_)) {
        ++lost_;
        return;
    }
    const std::int64_t delay = rng_.uniform(delay_);
    ++in_flight_[m.to];
    sched_.after(delay, [this, m = std::move(m)] {
        --in_flight_[m.to];
        auto it = handlers_.find(m.to);
        if (it != handlers_.end()) it->second(m);
    });
}

std::size_t SimNetwork::in_flight(const std::string& node) const {
    auto it = in_flight_.find(node);
    return it == in_flight_.end() ? 0 : it->second;
}

bool Recorder::records_vars() const {
    return level_ == RecordLevel::VEA || level_ == RecordLevel::V || level_ == RecordLevel::VpEA;
}

bool Recorder::records_event() const {
    switch (level_) {
    case RecordLevel::VEA:
    case RecordLevel::EA:
    case RecordLevel::E: return true;
    case RecordLevel::VpEA: return coordinator_;
    case RecordLevel::V: return false;
    }
    return false;
}

bool Recorder::records_args() const { return records_event() && level_ != RecordLevel::E; }

void Recorder::change(const std::string& var, Path path, std::string_view op, Value arg) {
    if (records_vars()) tracer_.notify_change(var, std::move(path), op, {std::move(arg)});
}

void Recorder::log(std::optional<std::string> event, std::vector<Value> args) {
    const bool with_event = event && records_event();
    if (!with_event && tracer_.pending() == 0) return;
    std::optional<std::vector<Value>> logged_args;
    if (with_event && records_args() && !args.empty()) logged_args = std::move(args);
    tracer_.log(with_event ? std::move(event) : std::nullopt, std::move(logged_args));
}

void prepare_out_dir(const std::string& out_dir, const std::vector<std::string>& files) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create '" + out_dir + "': " + ec.message());
    for (const auto& f : files) std::filesystem::remove(std::filesystem::path(out_dir) / f, ec);
    std::filesystem::remove(std::filesystem::path(out_dir) / "trace.ndjson", ec);
}

RunResult finish_run(const std::string& out_dir, const std::vector<std::string>& files, nlohmann::json manifest) {
    namespace fs = std::filesystem;
    RunResult r;
    r.out_dir = out_dir;
    std::vector<Trace> parts;
    for (const auto& f : files) {
        const std::string path = (fs::path(out_dir) / f).string();
        r.files.push_back(path);
        parts.push_back(read_trace_file(path));
    }
    r.merged = merge(parts);
    r.merged_path = (fs::path(out_dir) / "trace.ndjson").string();
    write_trace_file(r.merged_path, r.merged);

    manifest["files"] = files;
    manifest["merged"] = "trace.ndjson";
    manifest["entries"] = r.merged.size();
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + manifest_path + "'");
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + manifest_path + "'");
    r.manifest = std::move(manifest);
    return r;
}

}  // namespace tracecheck
