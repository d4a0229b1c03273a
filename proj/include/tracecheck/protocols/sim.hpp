#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracecheck/trace.hpp"
#include "tracecheck/tracer.hpp"

namespace tracecheck {

/// Which parts of an entry an instrumented run writes: V = variable
/// updates, E = event name, A = event arguments. VpEA records the events of
/// the coordinator (TM, ring initiator) only.
enum class RecordLevel { VEA, V, VpEA, EA, E };

std::string_view to_string(RecordLevel level);
/// Case-insensitive; throws Usage.
RecordLevel parse_record_level(std::string_view text);

struct DelayRange {
    std::int64_t min = 1;
    std::int64_t max = 10;
};

/// mt19937_64 with its own range reduction, so a seed gives the same run
/// on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::uint64_t next() { return gen_(); }
    /// Uniform in [lo, hi].
    std::int64_t uniform(std::int64_t lo, std::int64_t hi);
    std::int64_t uniform(DelayRange r) { return uniform(r.min, r.max); }
    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return p > 0 && unit() < p; }

private:
    std::mt19937_64 gen_;
};

/// Discrete-event scheduler: callbacks run in (time, insertion) order.
class Scheduler {
public:
    explicit Scheduler(std::int64_t time_limit) : limit_(time_limit) {}

    std::int64_t now() const noexcept { return now_; }
    void at(std::int64_t time, std::function<void()> fn);
    void after(std::int64_t delay, std::function<void()> fn) { at(now_ + delay, std::move(fn)); }
    /// Runs until no event is left. Throws SimDeadlock past the time limit.
    void run();

private:
    struct Item {
        std::int64_t time;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, Later> queue_;
    std::int64_t now_ = 0;
    std::int64_t limit_;
    std::uint64_t seq_ = 0;
};

struct Message {
    std::string from;
    std::string to;
    std::string type;
    std::int64_t number = 0;
    bool flag_a = false;
    bool flag_b = false;
};

/// Point-to-point network with per-message random delay and loss.
class SimNetwork {
public:
    using Handler = std::function<void(const Message&)>;

    SimNetwork(Scheduler& sched, Rng& rng, DelayRange delay, double loss)
        : sched_(sched), rng_(rng), delay_(delay), loss_(loss) {}

    void attach(const std::string& node, Handler handler) { handlers_[node] = std::move(handler); }
    void send(Message m);

    std::size_t sent() const noexcept { return sent_; }
    std::size_t lost() const noexcept { return lost_; }
    std::size_t in_flight(const std::string& node) const;

private:
    Scheduler& sched_;
    Rng& rng_;
    DelayRange delay_;
    double loss_;
    std::map<std::string, Handler> handlers_;
    std::map<std::string, std::size_t> in_flight_;
    std::size_t sent_ = 0;
    std::size_t lost_ = 0;
};

/// Tracer front end that drops whatever the record level excludes.
class Recorder {
public:
    Recorder(Tracer tracer, RecordLevel level, bool coordinator)
        : tracer_(std::move(tracer)), level_(level), coordinator_(coordinator) {}

    void change(const std::string& var, Path path, std::string_view op, Value arg);
    /// Writes the entry unless the level leaves nothing to write.
    void log(std::optional<std::string> event, std::vector<Value> args = {});

private:
    bool records_vars() const;
    bool records_event() const;
    bool records_args() const;

    Tracer tracer_;
    RecordLevel level_;
    bool coordinator_;
};

struct RunResult {
    std::string out_dir;
    std::vector<std::string> files;  // per-process traces
    std::string merged_path;
    Trace merged;
    nlohmann::json manifest;
};

/// Creates `out_dir` and removes stale copies of `files` in it.
void prepare_out_dir(const std::string& out_dir, const std::vector<std::string>& files);

/// Reads back the per-process files, writes trace.ndjson and manifest.json.
RunResult finish_run(const std::string& out_dir, const std::vector<std::string>& files, nlohmann::json manifest);

}  // namespace tracecheck
