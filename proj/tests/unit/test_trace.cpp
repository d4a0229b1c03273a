#include <doctest.h>

#include <algorithm>
#include <tuple>

#include "testkit.hpp"
#include "tracecheck/errors.hpp"
#include "tracecheck/trace.hpp"

using namespace tracecheck;
using testkit::Gen;

namespace {

// RMPrepare of "rm-0" at full recording.
const char* kPrepareEntry =
    R"({"clock": 4, "rmState": [{"op": "Update", "path": ["rm-0"], "args": ["prepared"]}],)"
    R"( "msgs": [{"op": "Add", "path": [], "args": [{"type": "Prepared", "rm": "rm-0"}]}],)"
    R"( "event": "RMPrepare", "event_args": ["rm-0"]})";

Error schema_error(const std::string& line) {
    try {
        validate_entry(nlohmann::json::parse(line));
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected SchemaError for " << line);
    return Error(ErrorKind::Usage, "unreachable");
}

TraceEntry random_entry(Gen& gen, std::int64_t max_clock = 20) {
    static const std::vector<std::string> vars{"x", "y", "msgs", "rmState"};
    static const std::vector<std::string> ops{"Update", "Add", "Remove", "AddToBag", "Clear", "Append"};
    TraceEntry e;
    e.clock = gen.range(0, max_clock);
    for (std::int64_t n = gen.range(0, 2); n > 0; --n) {
        std::vector<UpdateOp> list;
        for (std::int64_t k = gen.range(1, 2); k > 0; --k) {
            UpdateOp op{gen.pick(ops), {}, {}};
            for (std::int64_t d = gen.range(0, 2); d > 0; --d) op.path.push_back(gen.key());
            if (op.op != "Clear") op.args.push_back(gen.json_native());
            list.push_back(std::move(op));
        }
        e.updates[gen.pick(vars)] = std::move(list);
    }
    if (gen.coin()) e.event = gen.pick(std::vector<std::string>{"A", "B", "RMPrepare"});
    if (gen.coin(0.3)) e.event_args = std::vector<std::string>{gen.text(), gen.key()};
    return e;
}

Trace random_trace(Gen& gen) {
    Trace t;
    for (std::int64_t n = gen.range(0, 8); n > 0; --n) t.entries.push_back(random_entry(gen));
    return t;
}

}  // namespace

TEST_SUITE("trace_format") {

TEST_CASE("a full RMPrepare entry parses") {
    Trace t = parse_ndjson(kPrepareEntry);
    REQUIRE(t.size() == 1);
    const TraceEntry& e = t[0];
    CHECK(e.clock == 4);
    CHECK(e.event == "RMPrepare");
    CHECK(e.event_args == std::vector<std::string>{"rm-0"});
    REQUIRE(e.updates.count("rmState"));
    CHECK(e.updates.at("rmState")[0] == UpdateOp{"Update", {"rm-0"}, {Value::string("prepared")}});
    const Value msg = e.updates.at("msgs")[0].args[0];
    CHECK(msg.at("type") == Value::string("Prepared"));
}

TEST_CASE("serialization uses a fixed key order") {
    TraceEntry e;
    e.clock = 2;
    e.event = "E";
    e.event_args = std::vector<std::string>{"a"};
    e.updates["z"] = {UpdateOp{"Clear", {}, {}}};
    e.updates["b"] = {UpdateOp{"Update", {"k"}, {Value::integer(1)}}};
    CHECK(serialize_entry(e) ==
          R"({"clock":2,"b":[{"op":"Update","path":["k"],"args":[1]}],"z":[{"op":"Clear","path":[],"args":[]}],)"
          R"("event":"E","event_args":["a"]})");
}

TEST_CASE("schema violations name the field") {
    CHECK(schema_error(R"({"clock": -1})").field() == "clock");
    CHECK(schema_error(R"({"event": "E"})").field() == "clock");
    CHECK(schema_error(R"({"clock": 1.5})").field() == "clock");
    CHECK(schema_error(R"({"clock": "3"})").field() == "clock");
    CHECK(schema_error(R"({"clock": 1, "event": 3})").field() == "event");
    CHECK(schema_error(R"({"clock": 1, "event_args": [1]})").field() == "event_args");
    CHECK(schema_error(R"({"clock": 1, "x": []})").field().rfind("x", 0) == 0);
    CHECK(schema_error(R"({"clock": 1, "x": [{"op": "Add", "args": []}]})").field().rfind("x", 0) == 0);
    CHECK(schema_error(R"({"clock": 1, "x": [{"op": "Add", "path": "p", "args": []}]})").field().rfind("x", 0) == 0);
    CHECK(schema_error(R"([1, 2])").kind() == ErrorKind::Schema);
    CHECK_NOTHROW(validate_entry(nlohmann::json::parse(kPrepareEntry)));
    CHECK_NOTHROW(validate_entry(nlohmann::json::parse(R"({"clock": 0})")));
}

TEST_CASE("NDJSON parsing reports file lines") {
    Trace t = parse_ndjson("\n{\"clock\":1}\r\n   \n{\"clock\":2}", "f.ndjson");
    CHECK(t.size() == 2);
    CHECK(t.origins == std::vector<std::string>{"f.ndjson:2", "f.ndjson:4"});
    CHECK(parse_ndjson("").empty());

    try {
        parse_ndjson("{\"clock\":1}\n{oops}\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(e.line() == 2u);
    }
    try {
        parse_ndjson("{\"clock\":1}\n\n{\"clock\":-5}\n");
        FAIL("expected SchemaError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Schema);
        CHECK(e.line() == 3u);
    }
}

TEST_CASE("missing files raise IoError") {
    CHECK_THROWS_AS(read_trace_file("/nonexistent/trace.ndjson"), Error);
}

TEST_CASE("event arguments render strings bare and other values as JSON") {
    CHECK(to_event_arg(Value::string("rm-0")) == "rm-0");
    CHECK(to_event_arg(Value::integer(3)) == "3");
    CHECK(to_event_arg(Value::boolean(true)) == "true");
    CHECK(to_event_arg(Value::record({{"a", Value::integer(1)}})) == R"({"a":1})");
}

TEST_CASE("property: serialize then parse is the identity") {
    Gen gen(11);
    for (int n = 0; n < 500; ++n) {
        Trace t = random_trace(gen);
        Trace back = parse_ndjson(serialize_trace(t));
        REQUIRE(back == t);
        CHECK(serialize_trace(back) == serialize_trace(t));
    }
}

TEST_CASE("property: merge is a clock-sorted, tie-stable permutation") {
    Gen gen(23);
    for (int n = 0; n < 600; ++n) {
        std::vector<Trace> inputs(static_cast<std::size_t>(gen.range(1, 3)));
        for (auto& t : inputs) {
            t = random_trace(gen);
            // Per-process traces come from one clock, so each is sorted.
            std::stable_sort(t.entries.begin(), t.entries.end(),
                             [](const TraceEntry& a, const TraceEntry& b) { return a.clock < b.clock; });
        }
        const Trace merged = merge(inputs);

        // Independent oracle: tag every entry with (clock, input, position) and sort the tags.
        std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> tags;
        for (std::size_t f = 0; f < inputs.size(); ++f)
            for (std::size_t k = 0; k < inputs[f].size(); ++k) tags.emplace_back(inputs[f][k].clock, f, k);
        std::sort(tags.begin(), tags.end());

        REQUIRE(merged.size() == tags.size());
        for (std::size_t k = 0; k < tags.size(); ++k) {
            const auto& [clock, f, pos] = tags[k];
            CHECK(merged[k] == inputs[f][pos]);
            if (k) CHECK(merged[k - 1].clock <= merged[k].clock);
        }
    }
}

TEST_CASE("merge keeps entry origins") {
    Trace a = parse_ndjson("{\"clock\":2}\n", "a");
    Trace b = parse_ndjson("{\"clock\":1}\n", "b");
    Trace m = merge({a, b});
    CHECK(m.origins == std::vector<std::string>{"b:1", "a:1"});
    CHECK(merge({}).empty());
}

}  // TEST_SUITE
