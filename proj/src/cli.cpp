#include "tracecheck/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tracecheck/errors.hpp"
#include "tracecheck/explorer.hpp"
#include "tracecheck/protocols/token_ring.hpp"
#include "tracecheck/protocols/two_phase.hpp"
#include "tracecheck/trace.hpp"

namespace tracecheck::cli {

namespace {

std::size_t parse_size(std::string_view text, std::string_view what) {
    std::size_t value = 0;
    try {
        std::size_t used = 0;
        long long v = std::stoll(std::string(text), &used);
        if (used != text.size() || v < 0) throw std::invalid_argument("bad");
        value = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw Error(ErrorKind::Usage, "invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

struct ValidateOptions {
    std::string search = "bfs";
    bool allow_stutter = false;
    std::string compose;
    std::string dot;
    std::size_t max_states = 5'000'000;
    double max_seconds = 0;
    std::string json;
};

std::map<std::string, std::vector<std::string>> read_composition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open composition file '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorKind::Parse, "composition file '" + path + "' must hold a JSON object");
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [event, stages] : j.items()) {
        if (!stages.is_array())
            throw Error(ErrorKind::Schema, "composition of '" + event + "' must be an array of action names");
        std::vector<std::string> names;
        for (const auto& s : stages) {
            if (!s.is_string())
                throw Error(ErrorKind::Schema, "composition of '" + event + "' must be an array of action names");
            names.push_back(s.get<std::string>());
        }
        out.emplace(event, std::move(names));
    }
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text)) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
}

bool only_unknown_events(const Verdict& v) {
    if (v.failures.empty()) return false;
    for (const auto& f : v.failures)
        for (const auto& a : f.attempts)
            if (a.reason.kind != ReasonKind::UnknownEvent) return false;
    return true;
}

int validate_trace(const Spec& spec, const Trace& trace, const ValidateOptions& opt, std::ostream& out,
                   std::ostream& err) {
    ExplorerConfig cfg;
    cfg.search = opt.search == "dfs" ? SearchMode::DFS : SearchMode::BFS;
    cfg.allow_stutter = opt.allow_stutter;
    if (!opt.compose.empty()) cfg.composition = read_composition(opt.compose);
    cfg.max_states = opt.max_states;
    cfg.max_seconds = opt.max_seconds;
    cfg.record_graph = !opt.dot.empty();

    const Verdict v = validate(spec, trace, cfg);
    const Explanation ex = explain(v, spec, trace);

    out << to_string(v.status) << ": consumed " << v.consumed_max << "/" << v.trace_length << " entries, "
        << v.distinct_states << " distinct states (" << opt.search << ")\n";
    if (!v.accepted()) out << ex.report;
    if (!opt.dot.empty()) write_file(opt.dot, ex.dot);
    if (!opt.json.empty()) write_file(opt.json, verdict_to_json(v, spec).dump(2) + "\n");

    switch (v.status) {
    case VerdictStatus::Accepted: return kOk;
    case VerdictStatus::Inconclusive: return kInconclusive;
    case VerdictStatus::Rejected: break;
    }
    if (only_unknown_events(v)) {
        err << "hint: event '" << v.failures.front().attempts.front().action
            << "' names no spec action; map it to a sequence of actions with --compose\n";
        return kInputError;
    }
    return kRejected;
}

void add_validate_flags(CLI::App& cmd, ValidateOptions& opt) {
    cmd.add_option("--search", opt.search, "Search order")->check(CLI::IsMember({"bfs", "dfs"}));
    cmd.add_flag("--allow-stutter", opt.allow_stutter, "Let event-free entries match stuttering steps");
    cmd.add_option("--compose", opt.compose, "JSON file mapping event names to action sequences");
    cmd.add_option("--dot", opt.dot, "Write the explored graph as DOT");
    cmd.add_option("--max-states", opt.max_states, "State budget");
    cmd.add_option("--max-seconds", opt.max_seconds, "Time budget (0 = none)");
    cmd.add_option("--json", opt.json, "Write the verdict as JSON");
}

int cmd_merge(const std::vector<std::string>& inputs, const std::string& output, std::ostream& out) {
    std::vector<Trace> traces;
    for (const auto& path : inputs) {
        try {
            traces.push_back(read_trace_file(path));
        } catch (const Error& e) {
            throw Error(e.kind(), path + ": " + e.what());
        }
    }
    Trace merged = merge(traces);
    if (output.empty() || output == "-")
        out << serialize_trace(merged);
    else
        write_trace_file(output, merged);
    return kOk;
}

int cmd_schema_check(const std::string& path, std::ostream& out, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    std::size_t line_no = 0, entries = 0, violations = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++entries;
        std::string problem;
        nlohmann::json raw = nlohmann::json::parse(line, nullptr, false);
        if (raw.is_discarded()) {
            problem = "malformed JSON";
        } else {
            try {
                validate_entry(raw);
            } catch (const Error& e) {
                problem = e.what();
            }
        }
        if (problem.empty()) continue;
        if (++violations <= 20) err << path << ":" << line_no << ": " << problem << '\n';
    }
    if (violations > 20) err << "(" << violations - 20 << " more violations)\n";
    out << path << ": " << entries << " entries, " << violations << " violations\n";
    return violations == 0 ? kOk : kInputError;
}

struct RunOptions {
    std::string protocol;
    std::size_t rms = 2;
    std::size_t n = 3;
    std::string bug = "none";
    std::string record = "vea";
    double loss = 0;
    std::uint64_t seed = 1;
    std::string out_dir;
    bool and_validate = false;
    bool force_resend = false;
    bool no_stutter = false;
    bool token_resend = false;
    bool omit_resends = false;
    std::int64_t timeout = 50;
};

int cmd_run(const RunOptions& ro, ValidateOptions vo, std::ostream& out, std::ostream& err) {
    std::string dir = ro.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("TRACE_PATH");
        dir = env && *env ? env : "tracecheck-run";
    }
    const RecordLevel level = parse_record_level(ro.record);

    RunResult result;
    std::string spec_name;
    if (ro.protocol == "twophase") {
        twophase::Config cfg;
        cfg.rm_names = twophase::rm_names(ro.rms);
        cfg.message_loss = ro.loss;
        cfg.seed = ro.seed;
        cfg.record_level = level;
        cfg.force_resend = ro.force_resend;
        cfg.log_resends = !ro.omit_resends;
        cfg.receive_timeout = ro.timeout;
        if (ro.bug == "counter")
            cfg.bug = twophase::Bug::CounterTM;
        else if (ro.bug != "none")
            throw Error(ErrorKind::Usage, "twophase bugs: none, counter");
        result = twophase::run(cfg, dir);
        spec_name = "twophase:" + std::to_string(ro.rms);
    } else {
        tokenring::Config cfg;
        cfg.n = ro.n;
        cfg.seed = ro.seed;
        cfg.record_level = level;
        cfg.token_resend = ro.token_resend;
        if (ro.bug == "self-message")
            cfg.bug = tokenring::Bug::SelfMessage;
        else if (ro.bug == "eternal-token")
            cfg.bug = tokenring::Bug::EternalToken;
        else if (ro.bug != "none")
            throw Error(ErrorKind::Usage, "tokenring bugs: none, self-message, eternal-token");
        result = tokenring::run(cfg, dir);
        spec_name = "tokenring:" + std::to_string(ro.n);
    }
    out << "wrote " << result.merged.size() << " entries to " << result.merged_path << '\n';
    if (!ro.and_validate) return kOk;
    vo.allow_stutter = !ro.no_stutter;
    return validate_trace(spec_by_name(spec_name), result.merged, vo, out, err);
}

}  // namespace

Spec spec_by_name(std::string_view name) {
    const auto colon = name.find(':');
    const std::string_view family = name.substr(0, colon);
    if (colon == std::string_view::npos || (family != "twophase" && family != "tokenring"))
        throw Error(ErrorKind::Usage,
                    "unknown spec '" + std::string(name) + "' (expected twophase:<k> or tokenring:<n>)");
    const std::size_t size = parse_size(name.substr(colon + 1), "spec size");
    if (family == "twophase") {
        if (size < 1) throw Error(ErrorKind::Usage, "twophase needs at least one RM");
        return twophase::build_spec(twophase::rm_names(size));
    }
    if (size < 2) throw Error(ErrorKind::Usage, "tokenring needs at least two nodes");
    return tokenring::build_spec(size);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Validate distributed-system traces against executable specifications", "tracecheck"};
    app.require_subcommand(1);

    std::vector<std::string> merge_inputs;
    std::string merge_output;
    auto* merge_cmd = app.add_subcommand("merge", "Merge per-process traces by clock");
    merge_cmd->add_option("inputs", merge_inputs, "Trace files");
    merge_cmd->add_option("-o,--output", merge_output, "Output file (default: stdout)");

    std::string spec_name, trace_path;
    ValidateOptions vopt;
    auto* validate_cmd = app.add_subcommand("validate", "Check a trace against a spec");
    validate_cmd->add_option("--spec", spec_name, "twophase:<k> or tokenring:<n>")->required();
    validate_cmd->add_option("--trace", trace_path, "Merged NDJSON trace")->required();
    add_validate_flags(*validate_cmd, vopt);

    RunOptions ropt;
    ValidateOptions run_vopt;
    auto* run_cmd = app.add_subcommand("run", "Run a simulated protocol and record its trace");
    run_cmd->add_option("protocol", ropt.protocol, "twophase or tokenring")
        ->required()
        ->check(CLI::IsMember({"twophase", "tokenring"}));
    run_cmd->add_option("--rms", ropt.rms, "Number of resource managers (twophase)");
    run_cmd->add_option("--n", ropt.n, "Number of ring nodes (tokenring)");
    run_cmd->add_option("--bug", ropt.bug, "none | counter | self-message | eternal-token");
    run_cmd->add_option("--record", ropt.record, "vea | v | vpea | ea | e");
    run_cmd->add_option("--loss", ropt.loss, "Message loss probability");
    run_cmd->add_option("--seed", ropt.seed, "Simulation seed");
    run_cmd->add_option("--timeout", ropt.timeout, "RM receive timeout (twophase)");
    run_cmd->add_option("--out", ropt.out_dir, "Output directory (default: $TRACE_PATH)");
    run_cmd->add_flag("--force-resend", ropt.force_resend, "Make rm-0 retransmit before the others prepare");
    run_cmd->add_flag("--omit-resends", ropt.omit_resends, "Do not log retransmissions");
    run_cmd->add_flag("--token-resend", ropt.token_resend, "Node 1 sends each token to the initiator twice");
    run_cmd->add_flag("--and-validate", ropt.and_validate, "Validate the merged trace");
    run_cmd->add_flag("--no-stutter", ropt.no_stutter, "Validate without stuttering steps");
    run_cmd->add_option("--search", run_vopt.search, "Search order")->check(CLI::IsMember({"bfs", "dfs"}));
    run_cmd->add_option("--compose", run_vopt.compose, "JSON file mapping event names to action sequences");
    run_cmd->add_option("--dot", run_vopt.dot, "Write the explored graph as DOT");
    run_cmd->add_option("--max-states", run_vopt.max_states, "State budget");
    run_cmd->add_option("--max-seconds", run_vopt.max_seconds, "Time budget (0 = none)");
    run_cmd->add_option("--json", run_vopt.json, "Write the verdict as JSON");

    std::string schema_path;
    auto* schema_cmd = app.add_subcommand("schema-check", "Check every line of a trace file against the entry schema");
    schema_cmd->add_option("file", schema_path, "NDJSON file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*merge_cmd) return cmd_merge(merge_inputs, merge_output, out);
        if (*validate_cmd) {
            const Spec spec = spec_by_name(spec_name);
            Trace trace;
            try {
                trace = read_trace_file(trace_path);
            } catch (const Error& e) {
                throw Error(e.kind(), trace_path + ": " + e.what());
            }
            return validate_trace(spec, trace, vopt, out, err);
        }
        if (*run_cmd) return cmd_run(ropt, run_vopt, out, err);
        if (*schema_cmd) return cmd_schema_check(schema_path, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

}  // namespace tracecheck::cli
