#include <doctest.h>

#include <fstream>
#include <sstream>

#include "testkit.hpp"
#include "tracecheck/cli.hpp"
#include "tracecheck/errors.hpp"
#include "tracecheck/trace.hpp"

using namespace tracecheck;
using testkit::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

void put(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("merge") {
    TempDir dir("cli");
    put(dir.file("a.ndjson"), "{\"clock\":3,\"event\":\"A\"}\n{\"clock\":5}\n");
    put(dir.file("b.ndjson"), "{\"clock\":4,\"event\":\"B\"}\n");
    Outcome r = cli_run({"merge", dir.file("a.ndjson"), dir.file("b.ndjson")});
    CHECK(r.code == cli::kOk);
    CHECK(r.out == "{\"clock\":3,\"event\":\"A\"}\n{\"clock\":4,\"event\":\"B\"}\n{\"clock\":5}\n");

    r = cli_run({"merge", dir.file("a.ndjson"), dir.file("b.ndjson"), "-o", dir.file("m.ndjson")});
    CHECK(r.code == cli::kOk);
    CHECK(read_trace_file(dir.file("m.ndjson")).size() == 3);

    r = cli_run({"merge"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.empty());

    put(dir.file("bad.ndjson"), "{\"clock\":1}\n{\"clock\":\n");
    r = cli_run({"merge", dir.file("a.ndjson"), dir.file("bad.ndjson")});
    CHECK(r.code == cli::kInputError);
    CHECK(contains(r.err, "bad.ndjson"));
    CHECK(contains(r.err, "line 2"));

    r = cli_run({"merge", dir.file("missing.ndjson")});
    CHECK(r.code == cli::kInputError);
    CHECK(contains(r.err, "missing.ndjson"));
}

TEST_CASE("run and validate two-phase commit") {
    TempDir dir("cli");
    Outcome r = cli_run({"run", "twophase", "--rms", "2", "--out", dir.path().string()});
    CHECK(r.code == cli::kOk);
    CHECK(contains(r.out, "wrote 7 entries"));

    r = cli_run({"validate", "--spec", "twophase:2", "--trace", dir.file("trace.ndjson")});
    CHECK(r.code == cli::kOk);
    CHECK(contains(r.out, "accepted: consumed 7/7 entries, 8 distinct states (bfs)"));

    r = cli_run({"validate", "--spec", "twophase:2", "--trace", dir.file("trace.ndjson"), "--search", "dfs",
                 "--json", dir.file("v.json"), "--dot", dir.file("g.dot")});
    CHECK(r.code == cli::kOk);
    CHECK(contains(r.out, "(dfs)"));
    std::ifstream json(dir.file("v.json"));
    const auto verdict = nlohmann::json::parse(json);
    CHECK(verdict["status"] == "accepted");
    CHECK(verdict["trace_length"] == 7);
    std::ifstream dot(dir.file("g.dot"));
    std::string first;
    std::getline(dot, first);
    CHECK(contains(first, "digraph"));

    r = cli_run({"validate", "--spec", "twophase:2", "--trace", dir.file("trace.ndjson"), "--max-states", "1"});
    CHECK(r.code == cli::kInconclusive);
    CHECK(contains(r.out, "inconclusive"));

    r = cli_run({"validate", "--spec", "twophase:3", "--trace", dir.file("trace.ndjson")});
    CHECK(r.code == cli::kRejected);
}

TEST_CASE("the counting TM bug is reported") {
    TempDir dir("cli");
    Outcome r = cli_run({"run", "twophase", "--rms", "3", "--bug", "counter", "--force-resend", "--out",
                         dir.path().string(), "--and-validate"});
    CHECK(r.code == cli::kRejected);
    CHECK(contains(r.out, "rejected: consumed"));
    CHECK(contains(r.out, "TMCommit -> GuardFailed: tmPrepared = RM"));
    CHECK(contains(r.out, "No behavior explains entry"));
}

TEST_CASE("token ring needs a composition for its combined event") {
    TempDir dir("cli");
    Outcome r = cli_run({"run", "tokenring", "--n", "3", "--seed", "2", "--out", dir.path().string()});
    REQUIRE(r.code == cli::kOk);

    r = cli_run({"validate", "--spec", "tokenring:3", "--trace", dir.file("trace.ndjson")});
    CHECK(r.code == cli::kInputError);
    CHECK(contains(r.err, "DetectAndInit"));
    CHECK(contains(r.err, "--compose"));

    put(dir.file("compose.json"), R"({"DetectAndInit": ["DetectTermination", "InitiateProbe"]})");
    r = cli_run({"validate", "--spec", "tokenring:3", "--trace", dir.file("trace.ndjson"), "--compose",
                 dir.file("compose.json")});
    CHECK(r.code == cli::kOk);

    put(dir.file("bad.json"), R"({"DetectAndInit": ["DetectTermination"]})");
    r = cli_run({"validate", "--spec", "tokenring:3", "--trace", dir.file("trace.ndjson"), "--compose",
                 dir.file("bad.json")});
    CHECK(r.code == cli::kInputError);
}

TEST_CASE("schema-check") {
    TempDir dir("cli");
    put(dir.file("bad.ndjson"), "{\"clock\":1}\n{\"clock\":-1}\nnot json\n");
    Outcome r = cli_run({"schema-check", dir.file("bad.ndjson")});
    CHECK(r.code == cli::kInputError);
    CHECK(contains(r.err, "bad.ndjson:2"));
    CHECK(contains(r.err, "clock"));
    CHECK(contains(r.err, "bad.ndjson:3: malformed JSON"));
    CHECK(contains(r.out, "3 entries, 2 violations"));

    put(dir.file("empty.ndjson"), "");
    r = cli_run({"schema-check", dir.file("empty.ndjson")});
    CHECK(r.code == cli::kOk);
    CHECK(contains(r.out, "0 entries, 0 violations"));
}

TEST_CASE("usage errors exit with 3") {
    CHECK(cli_run({}).code == cli::kInputError);
    CHECK(cli_run({"frobnicate"}).code == cli::kInputError);
    CHECK(cli_run({"validate", "--spec", "twophase:2"}).code == cli::kInputError);
    Outcome r = cli_run({"validate", "--spec", "paxos:3", "--trace", "x"});
    CHECK(r.code == cli::kInputError);
    CHECK(contains(r.err, "unknown spec"));
    CHECK(cli_run({"validate", "--spec", "twophase:0", "--trace", "x"}).code == cli::kInputError);
    CHECK(cli_run({"run", "twophase", "--record", "XYZ"}).code == cli::kInputError);
    CHECK(cli_run({"run", "twophase", "--bug", "self-message"}).code == cli::kInputError);
    CHECK(cli_run({"--help"}).code == cli::kOk);
    CHECK_THROWS_AS(cli::spec_by_name("tokenring:1"), Error);
    CHECK(cli::spec_by_name("tokenring:4").name() == "tokenring:4");
}

}  // TEST_SUITE
