#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tracecheck/cli.hpp"
#include "tracecheck/errors.hpp"
#include "tracecheck/explorer.hpp"
#include "tracecheck/protocols/token_ring.hpp"
#include "tracecheck/protocols/two_phase.hpp"
#include "tracecheck/trace.hpp"

namespace py = pybind11;
using namespace tracecheck;

namespace {

ExplorerConfig make_config(const std::string& search, bool allow_stutter,
                           const std::map<std::string, std::vector<std::string>>& composition, std::size_t max_states,
                           double max_seconds) {
    ExplorerConfig cfg;
    if (search == "dfs")
        cfg.search = SearchMode::DFS;
    else if (search != "bfs")
        throw Error(ErrorKind::Usage, "search must be 'bfs' or 'dfs'");
    cfg.allow_stutter = allow_stutter;
    cfg.composition = composition;
    cfg.max_states = max_states;
    cfg.max_seconds = max_seconds;
    return cfg;
}

std::string validate_text(const std::string& spec_name, const std::string& trace_text, const std::string& search,
                          bool allow_stutter, const std::map<std::string, std::vector<std::string>>& composition,
                          std::size_t max_states, double max_seconds) {
    const Spec spec = cli::spec_by_name(spec_name);
    const Trace trace = parse_ndjson(trace_text);
    ExplorerConfig cfg = make_config(search, allow_stutter, composition, max_states, max_seconds);
    py::gil_scoped_release release;
    return verdict_to_json(validate(spec, trace, cfg), spec).dump();
}

bool oracle_text(const std::string& spec_name, const std::string& trace_text, bool allow_stutter,
                 const std::map<std::string, std::vector<std::string>>& composition) {
    const Spec spec = cli::spec_by_name(spec_name);
    const Trace trace = parse_ndjson(trace_text);
    ExplorerConfig cfg = make_config("bfs", allow_stutter, composition, 0, 0);
    py::gil_scoped_release release;
    return oracle_validate(spec, trace, cfg);
}

std::string merge_texts(const std::vector<std::string>& texts) {
    std::vector<Trace> traces;
    for (const auto& t : texts) traces.push_back(parse_ndjson(t));
    return serialize_trace(merge(traces));
}

std::string run_twophase(const std::string& out_dir, std::size_t rms, std::uint64_t seed, double loss,
                         const std::string& bug, const std::string& record, bool force_resend) {
    twophase::Config cfg;
    cfg.rm_names = twophase::rm_names(rms);
    cfg.seed = seed;
    cfg.message_loss = loss;
    cfg.record_level = parse_record_level(record);
    cfg.force_resend = force_resend;
    if (bug == "counter")
        cfg.bug = twophase::Bug::CounterTM;
    else if (bug != "none")
        throw Error(ErrorKind::Usage, "twophase bugs: none, counter");
    return twophase::run(cfg, out_dir).manifest.dump();
}

std::string run_tokenring(const std::string& out_dir, std::size_t n, std::uint64_t seed, const std::string& bug,
                          const std::string& record, bool token_resend) {
    tokenring::Config cfg;
    cfg.n = n;
    cfg.seed = seed;
    cfg.record_level = parse_record_level(record);
    cfg.token_resend = token_resend;
    if (bug == "self-message")
        cfg.bug = tokenring::Bug::SelfMessage;
    else if (bug == "eternal-token")
        cfg.bug = tokenring::Bug::EternalToken;
    else if (bug != "none")
        throw Error(ErrorKind::Usage, "tokenring bugs: none, self-message, eternal-token");
    return tokenring::run(cfg, out_dir).manifest.dump();
}

py::tuple run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = cli::run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
}

std::size_t reachable_states(const std::string& spec_name, std::size_t max_states) {
    const Spec spec = cli::spec_by_name(spec_name);
    return explore_reachable(spec, max_states).states.size();
}

}  // namespace

PYBIND11_MODULE(_tracecheck, m) {
    m.doc() = "Trace validation against executable specifications";

    py::register_exception<Error>(m, "TracecheckError", PyExc_ValueError);

    m.def("validate", &validate_text, py::arg("spec"), py::arg("trace"), py::arg("search") = "bfs",
          py::arg("allow_stutter") = false, py::arg("composition") = std::map<std::string, std::vector<std::string>>{},
          py::arg("max_states") = 5'000'000, py::arg("max_seconds") = 0.0,
          "Validate NDJSON trace text; returns the verdict as JSON text.");
    m.def("oracle_validate", &oracle_text, py::arg("spec"), py::arg("trace"), py::arg("allow_stutter") = false,
          py::arg("composition") = std::map<std::string, std::vector<std::string>>{});
    m.def("merge", &merge_texts, py::arg("traces"));
    m.def("run_twophase", &run_twophase, py::arg("out_dir"), py::arg("rms") = 2, py::arg("seed") = 1,
          py::arg("loss") = 0.0, py::arg("bug") = "none", py::arg("record") = "vea", py::arg("force_resend") = false,
          "Simulate Two-Phase Commit; returns the run manifest as JSON text.");
    m.def("run_tokenring", &run_tokenring, py::arg("out_dir"), py::arg("n") = 3, py::arg("seed") = 1,
          py::arg("bug") = "none", py::arg("record") = "vea", py::arg("token_resend") = false);
    m.def("reachable_states", &reachable_states, py::arg("spec"), py::arg("max_states") = 1'000'000);
    m.def("cli", &run_cli, py::arg("args"), "Run the command line in-process; returns (code, stdout, stderr).");
}
