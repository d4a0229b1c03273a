#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "testkit.hpp"
#include "tracecheck/errors.hpp"
#include "tracecheck/explorer.hpp"
#include "tracecheck/protocols/token_ring.hpp"
#include "tracecheck/protocols/two_phase.hpp"

using namespace tracecheck;
using testkit::TempDir;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, int> event_counts(const Trace& t) {
    std::map<std::string, int> out;
    for (const auto& e : t.entries)
        if (e.event) ++out[*e.event];
    return out;
}

twophase::Config two_phase(std::size_t rms, std::uint64_t seed, RecordLevel level = RecordLevel::VEA) {
    twophase::Config cfg;
    cfg.rm_names = twophase::rm_names(rms);
    cfg.seed = seed;
    cfg.record_level = level;
    return cfg;
}

ExplorerConfig stutter() {
    ExplorerConfig cfg;
    cfg.allow_stutter = true;
    return cfg;
}

ExplorerConfig ring_config(bool allow_stutter) {
    ExplorerConfig cfg;
    cfg.allow_stutter = allow_stutter;
    cfg.composition = tokenring::detect_and_init_composition();
    return cfg;
}

bool names_tmcommit(const Verdict& v) {
    for (const auto& f : v.failures)
        for (const auto& a : f.attempts)
            if (a.action == "TMCommit") return true;
    return false;
}

constexpr RecordLevel kLevels[] = {RecordLevel::VEA, RecordLevel::V, RecordLevel::VpEA, RecordLevel::EA, RecordLevel::E};

}  // namespace

TEST_SUITE("protocols") {

TEST_CASE("record level names") {
    CHECK(parse_record_level("vpea") == RecordLevel::VpEA);
    CHECK(parse_record_level("E") == RecordLevel::E);
    CHECK(to_string(RecordLevel::EA) == "EA");
    CHECK_THROWS_AS(parse_record_level("VE"), Error);
}

TEST_CASE("Rng is deterministic and stays in range") {
    Rng a(5), b(5);
    std::map<std::int64_t, int> hist;
    for (int n = 0; n < 6000; ++n) {
        const auto x = a.uniform(-2, 3);
        CHECK(x == b.uniform(-2, 3));
        REQUIRE(x >= -2);
        REQUIRE(x <= 3);
        ++hist[x];
    }
    CHECK(hist.size() == 6);
    for (const auto& [x, c] : hist) CHECK(c > 800);
    CHECK(a.uniform(4, 4) == 4);
    CHECK_FALSE(a.chance(0.0));
    const double u = a.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}

TEST_CASE("scheduler runs callbacks by time, then insertion order") {
    Scheduler s(100);
    std::string order;
    s.at(5, [&] { order += "b"; });
    s.at(1, [&] { order += "a"; });
    s.at(5, [&] {
        order += "c";
        s.after(0, [&] { order += "d"; });
    });
    s.run();
    CHECK(order == "abcd");
    CHECK(s.now() == 5);

    Scheduler loop(50);
    std::function<void()> tick = [&] { loop.after(10, tick); };
    loop.at(0, tick);
    try {
        loop.run();
        FAIL("expected SimDeadlock");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SimDeadlock);
    }
}

TEST_CASE("network delivery and loss") {
    Scheduler s(1000);
    Rng rng(3);
    SimNetwork net(s, rng, {2, 4}, 0.0);
    int got = 0;
    net.attach("b", [&](const Message& m) {
        CHECK(m.type == "ping");
        CHECK(s.now() >= 2);
        ++got;
    });
    for (int i = 0; i < 10; ++i) net.send({"a", "b", "ping"});
    CHECK(net.in_flight("b") == 10);
    s.run();
    CHECK(got == 10);
    CHECK(net.in_flight("b") == 0);
    CHECK(net.sent() == 10);

    Scheduler s2(1000);
    SimNetwork lossy(s2, rng, {1, 1}, 0.5);
    int delivered = 0;
    lossy.attach("b", [&](const Message&) { ++delivered; });
    for (int i = 0; i < 400; ++i) lossy.send({"a", "b", "ping"});
    s2.run();
    CHECK(delivered + static_cast<int>(lossy.lost()) == 400);
    CHECK(lossy.lost() > 100);
    CHECK(lossy.lost() < 300);
}

TEST_CASE("two RMs at full recording give the textbook commit trace") {
    TempDir dir("proto");
    const RunResult r = twophase::run(two_phase(2, 1), dir.path().string());
    CHECK(r.merged.size() == 7);
    CHECK(event_counts(r.merged) == std::map<std::string, int>{{"RMPrepare", 2},
                                                               {"TMRcvPrepared", 2},
                                                               {"TMCommit", 1},
                                                               {"RMRcvCommitMsg", 2}});
    for (std::size_t k = 1; k < r.merged.size(); ++k) CHECK(r.merged[k - 1].clock < r.merged[k].clock);
    const Spec spec = twophase::build_spec(twophase::rm_names(2));
    const Verdict v = validate(spec, r.merged);
    CHECK(v.accepted());
    CHECK(v.distinct_states == r.merged.size() + 1);

    CHECK(r.files.size() == 3);
    CHECK(r.manifest["protocol"] == "twophase");
    CHECK(r.manifest["entries"] == 7);
    CHECK(r.manifest["files"][0] == "tm.ndjson");
    CHECK(nlohmann::json::parse(slurp(dir.file("manifest.json"))) == r.manifest);
    CHECK(read_trace_file(r.merged_path) == r.merged);
}

TEST_CASE("runs are reproducible from the seed") {
    TempDir a("proto"), b("proto");
    twophase::Config cfg = two_phase(3, 42);
    cfg.message_loss = 0.2;
    const RunResult ra = twophase::run(cfg, a.path().string());
    const RunResult rb = twophase::run(cfg, b.path().string());
    CHECK(slurp(ra.merged_path) == slurp(rb.merged_path));
    CHECK(ra.manifest == rb.manifest);

    tokenring::Config ring;
    ring.seed = 9;
    CHECK(slurp(tokenring::run(ring, a.path().string()).merged_path) ==
          slurp(tokenring::run(ring, b.path().string()).merged_path));
}

TEST_CASE("a second run into the same directory replaces the old traces") {
    TempDir dir("proto");
    const auto first = twophase::run(two_phase(2, 1), dir.path().string());
    const auto second = twophase::run(two_phase(2, 1), dir.path().string());
    CHECK(first.merged == second.merged);
}

TEST_CASE("correct two-phase runs are accepted at every record level") {
    for (std::size_t rms = 1; rms <= 3; ++rms) {
        const Spec spec = twophase::build_spec(twophase::rm_names(rms));
        for (auto level : kLevels) {
            for (std::uint64_t seed = 1; seed <= 4; ++seed) {
                TempDir dir("proto");
                const RunResult r = twophase::run(two_phase(rms, seed, level), dir.path().string());
                CHECK_MESSAGE(validate(spec, r.merged, stutter()).accepted(),
                              "rms=" << rms << " level=" << to_string(level) << " seed=" << seed);
            }
        }
    }
}

TEST_CASE("record levels drop the parts they exclude") {
    TempDir dir("proto");
    const auto v = twophase::run(two_phase(2, 1, RecordLevel::V), dir.path().string()).merged;
    for (const auto& e : v.entries) {
        CHECK_FALSE(e.event);
        CHECK_FALSE(e.event_args);
    }
    const auto e = twophase::run(two_phase(2, 1, RecordLevel::E), dir.path().string()).merged;
    for (const auto& x : e.entries) {
        CHECK(x.event);
        CHECK_FALSE(x.event_args);
        CHECK(x.updates.empty());
    }
    const auto vpea = twophase::run(two_phase(2, 1, RecordLevel::VpEA), dir.path().string()).merged;
    for (const auto& x : vpea.entries)
        if (x.event) CHECK(x.event->rfind("TM", 0) == 0);
    CHECK(vpea.size() == 7);
}

TEST_CASE("lossy networks with retransmission stay valid") {
    const Spec spec = twophase::build_spec(twophase::rm_names(3));
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        twophase::Config cfg = two_phase(3, seed);
        cfg.message_loss = 0.3;
        cfg.receive_timeout = 15;
        TempDir dir("proto");
        const RunResult r = twophase::run(cfg, dir.path().string());
        REQUIRE_MESSAGE(validate(spec, r.merged, stutter()).accepted(), "seed " << seed);
        for (const auto& e : r.merged.entries) {
            if (!e.event) {
                // Retransmissions never change the state they report.
                CHECK(e.updates.count("msgs"));
            }
        }
    }
}

TEST_CASE("the counting TM is caught at every record level") {
    for (std::size_t rms = 2; rms <= 3; ++rms) {
        const Spec spec = twophase::build_spec(twophase::rm_names(rms));
        for (auto level : kLevels) {
            twophase::Config cfg = two_phase(rms, 7, level);
            cfg.bug = twophase::Bug::CounterTM;
            cfg.force_resend = true;
            TempDir dir("proto");
            const RunResult r = twophase::run(cfg, dir.path().string());
            const Verdict v = validate(spec, r.merged, stutter());
            CHECK_MESSAGE(v.status == VerdictStatus::Rejected, "rms=" << rms << " level=" << to_string(level));
            CHECK_MESSAGE(names_tmcommit(v), "rms=" << rms << " level=" << to_string(level));
        }
    }
}

TEST_CASE("without the forced schedule the counting TM usually behaves") {
    // The bug needs a duplicate Prepared before every RM has prepared.
    twophase::Config cfg = two_phase(2, 1);
    cfg.bug = twophase::Bug::CounterTM;
    TempDir dir("proto");
    const RunResult r = twophase::run(cfg, dir.path().string());
    CHECK(validate(twophase::build_spec(cfg.rm_names), r.merged, stutter()).accepted());
}

TEST_CASE("token ring runs") {
    const Spec spec = tokenring::build_spec(3);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        tokenring::Config cfg;
        cfg.seed = seed;
        TempDir dir("proto");
        const RunResult r = tokenring::run(cfg, dir.path().string());
        CHECK(r.files.size() == 3);
        CHECK(event_counts(r.merged)[tokenring::kDetectAndInit] == 1);
        const Verdict with = validate(spec, r.merged, ring_config(false));
        CHECK_MESSAGE(with.accepted(), "seed " << seed);
        const Verdict without = validate(spec, r.merged);
        CHECK(without.status == VerdictStatus::Rejected);
    }
}

TEST_CASE("token ring bugs are rejected") {
    const Spec spec = tokenring::build_spec(3);
    for (auto bug : {tokenring::Bug::SelfMessage, tokenring::Bug::EternalToken}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            tokenring::Config cfg;
            cfg.seed = seed;
            cfg.bug = bug;
            cfg.messages_per_node = 4;
            TempDir dir("proto");
            const RunResult r = tokenring::run(cfg, dir.path().string());
            CHECK_FALSE_MESSAGE(validate(spec, r.merged, ring_config(true)).accepted(), "seed " << seed);
        }
    }
}

TEST_CASE("configuration errors") {
    TempDir dir("proto");
    twophase::Config cfg;
    cfg.message_loss = 1.0;
    CHECK_THROWS_AS(twophase::run(cfg, dir.path().string()), Error);
    cfg = twophase::Config{};
    cfg.rm_names = {"tm"};
    CHECK_THROWS_AS(twophase::check_config(cfg), Error);
    cfg = twophase::Config{};
    cfg.receive_timeout = 0;
    CHECK_THROWS_AS(twophase::check_config(cfg), Error);
    cfg = twophase::Config{};
    cfg.message_delay = {5, 1};
    CHECK_THROWS_AS(twophase::check_config(cfg), Error);

    tokenring::Config ring;
    ring.n = 1;
    CHECK_THROWS_AS(tokenring::check_config(ring), Error);

    // A time limit below the work time leaves the run unfinished.
    cfg = twophase::Config{};
    cfg.time_limit = 0;
    cfg.work_time = {5, 5};
    try {
        twophase::run(cfg, dir.path().string());
        FAIL("expected SimDeadlock");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SimDeadlock);
    }
}

}  // TEST_SUITE
