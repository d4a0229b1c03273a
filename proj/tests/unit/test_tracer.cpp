#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "testkit.hpp"
#include "tracecheck/errors.hpp"
#include "tracecheck/tracer.hpp"

using namespace tracecheck;
using testkit::TempDir;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Usage;
}

}  // namespace

TEST_SUITE("tracer") {

TEST_CASE("an instrumented prepare step writes one entry with both updates") {
    TempDir dir("tracer");
    Tracer tracer = Tracer::get_tracer(dir.file("rm.ndjson"), Clock::in_memory(3));
    tracer.notify_change("rmState", {"rm-0"}, "Update", {Value::string("prepared")});
    tracer.notify_change("msgs", {}, "Add",
                         {Value::record({{"type", Value::string("Prepared")}, {"rm", Value::string("rm-0")}})});
    CHECK(tracer.pending() == 2);
    CHECK(tracer.log("RMPrepare", std::vector<Value>{Value::string("rm-0")}) == 4);
    CHECK(tracer.pending() == 0);

    Trace written = read_trace_file(dir.file("rm.ndjson"));
    Trace expected = parse_ndjson(
        R"({"clock": 4, "rmState": [{"op": "Update", "path": ["rm-0"], "args": ["prepared"]}],)"
        R"( "msgs": [{"op": "Add", "path": [], "args": [{"type": "Prepared", "rm": "rm-0"}]}],)"
        R"( "event": "RMPrepare", "event_args": ["rm-0"]})");
    CHECK(written == expected);
}

TEST_CASE("virtual fields extend the path") {
    TempDir dir("tracer");
    Tracer tracer = Tracer::get_tracer(dir.file("t.ndjson"), Clock::in_memory());
    VirtualField rm = tracer.get_variable_tracer("rmState");
    rm.get_field("rm-1").update(Value::string("committed"));
    tracer.get_variable_tracer("pending").add_to_bag(Value::integer(2));
    tracer.log();
    Trace t = read_trace_file(dir.file("t.ndjson"));
    REQUIRE(t.size() == 1);
    CHECK(t[0].updates.at("rmState")[0].path == Path{"rm-1"});
    CHECK(t[0].updates.at("pending")[0].op == "AddToBag");
    CHECK_FALSE(t[0].event);
}

TEST_CASE("updates to one variable keep their order") {
    TempDir dir("tracer");
    Tracer tracer = Tracer::get_tracer(dir.file("t.ndjson"), Clock::in_memory());
    auto s = tracer.get_variable_tracer("s");
    s.add(Value::integer(1));
    s.remove(Value::integer(1));
    s.add(Value::integer(2));
    tracer.log("E");
    Trace t = read_trace_file(dir.file("t.ndjson"));
    const auto& ops = t[0].updates.at("s");
    REQUIRE(ops.size() == 3);
    CHECK(ops[1].op == "Remove");
    CHECK(apply_entry_updates(Value::empty_set(), ops) == Value::set({Value::integer(2)}));
}

TEST_CASE("explicit clocks") {
    TempDir dir("tracer");
    Tracer tracer = Tracer::get_tracer(dir.file("t.ndjson"), Clock::explicit_values());
    CHECK(kind_of([&] { tracer.log("E"); }) == ErrorKind::MissingClock);
    CHECK(kind_of([&] { tracer.log("E", std::nullopt, -1); }) == ErrorKind::Usage);
    CHECK(tracer.log("E", std::nullopt, 17) == 17);

    Tracer managed = Tracer::get_tracer(dir.file("m.ndjson"), Clock::in_memory());
    CHECK(kind_of([&] { managed.log("E", std::nullopt, 5); }) == ErrorKind::Usage);
    CHECK(kind_of([] { Clock::explicit_values().next(); }) == ErrorKind::Usage);
}

TEST_CASE("bad notifications are refused") {
    TempDir dir("tracer");
    Tracer tracer = Tracer::get_tracer(dir.file("t.ndjson"), Clock::in_memory());
    CHECK(kind_of([&] { tracer.notify_change("x", {}, "Frob", {}); }) == ErrorKind::UnknownOp);
    CHECK(kind_of([&] { tracer.notify_change("clock", {}, "Update", {Value::integer(1)}); }) == ErrorKind::Schema);
    CHECK(kind_of([&] { tracer.notify_change("event", {}, "Update", {Value::integer(1)}); }) == ErrorKind::Schema);
    CHECK(tracer.pending() == 0);
}

TEST_CASE("TRACE_PATH is the fallback destination") {
    TempDir dir("tracer");
    const std::string path = dir.file("env.ndjson");
    ::setenv("TRACE_PATH", path.c_str(), 1);
    {
        Tracer tracer = Tracer::get_tracer("", Clock::in_memory());
        tracer.log("E");
        CHECK(tracer.path() == path);
    }
    ::unsetenv("TRACE_PATH");
    CHECK(read_trace_file(path).size() == 1);
    CHECK(kind_of([] { Tracer::get_tracer("", Clock::in_memory()); }) == ErrorKind::Io);
    CHECK(kind_of([] { Tracer::get_tracer("/nonexistent/dir/t.ndjson", Clock::in_memory()); }) == ErrorKind::Io);
}

TEST_CASE("a failed write keeps the buffered updates") {
    if (!std::ifstream("/dev/full")) return;
    Tracer tracer = Tracer::get_tracer("/dev/full", Clock::in_memory());
    tracer.notify_change("x", {}, "Update", {Value::integer(1)});
    CHECK(kind_of([&] { tracer.log("E"); }) == ErrorKind::Io);
    CHECK(tracer.pending() == 1);
}

TEST_CASE("file clocks persist a decimal counter") {
    TempDir dir("tracer");
    const std::string clock_path = dir.file("clock");
    Clock a = Clock::file_based(clock_path);
    Clock b = Clock::file_based(clock_path);
    CHECK(a.next() == 1);
    CHECK(b.next() == 2);
    CHECK(a.next() == 3);
    CHECK(slurp(clock_path) == "3\n");
}

TEST_CASE("property: concurrent tracers get strictly increasing, distinct clocks") {
    constexpr int kThreads = 4;
    constexpr int kLogs = 1000;
    TempDir dir("tracer");
    const std::string clock_path = dir.file("clock");

    for (const bool file_clock : {false, true}) {
        const Clock shared = Clock::in_memory();
        std::vector<std::thread> threads;
        for (int t = 0; t < kThreads; ++t) {
            threads.emplace_back([&, t] {
                // A file clock opened per thread stands in for separate processes.
                Clock clock = file_clock ? Clock::file_based(clock_path) : shared;
                Tracer tracer = Tracer::get_tracer(
                    dir.file((file_clock ? "f" : "m") + std::to_string(t) + ".ndjson"), clock);
                for (int k = 0; k < kLogs; ++k) {
                    tracer.notify_change("x", {}, "Update", {Value::integer(k)});
                    tracer.log("Step");
                }
            });
        }
        for (auto& th : threads) th.join();

        std::set<std::int64_t> all;
        for (int t = 0; t < kThreads; ++t) {
            Trace trace = read_trace_file(dir.file((file_clock ? "f" : "m") + std::to_string(t) + ".ndjson"));
            REQUIRE(trace.size() == static_cast<std::size_t>(kLogs));
            for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k - 1].clock < trace[k].clock);
            for (const auto& e : trace.entries) all.insert(e.clock);
        }
        CHECK(all.size() == static_cast<std::size_t>(kThreads * kLogs));
        CHECK(*all.begin() == 1);
        CHECK(*all.rbegin() == kThreads * kLogs);
    }
}

}  // TEST_SUITE
