#include "tracecheck/explorer.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tracecheck/errors.hpp"

namespace tracecheck {

std::string_view to_string(ReasonKind kind) {
    switch (kind) {
    case ReasonKind::GuardFailed: return "GuardFailed";
    case ReasonKind::UpdateMismatch: return "UpdateMismatch";
    case ReasonKind::NoCandidateAction: return "NoCandidateAction";
    case ReasonKind::CompositionStageFailed: return "CompositionStageFailed";
    case ReasonKind::UnknownEvent: return "UnknownEvent";
    }
    return "?";
}

std::string_view to_string(VerdictStatus status) {
    switch (status) {
    case VerdictStatus::Accepted: return "accepted";
    case VerdictStatus::Rejected: return "rejected";
    case VerdictStatus::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

constexpr std::string_view kStutter = "(stutter)";

std::string render_args(const std::vector<std::string>& args) {
    std::string out = "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += args[i];
    }
    return out + ")";
}

bool args_agree(const Params& params, std::size_t offset, const std::vector<std::string>& args) {
    for (std::size_t j = 0; j < params.size(); ++j) {
        std::size_t pos = offset + j;
        if (pos < args.size() && to_event_arg(params[j]) != args[pos]) return false;
    }
    return true;
}

// Values the entry demands for each variable it records, computed once per
// (state, entry). `blocked` is set when the recorded updates cannot even be
// applied to the pre-state, so no candidate can match.
struct Expected {
    std::vector<std::pair<std::size_t, Value>> values;
    std::optional<Reason> blocked;
};

Expected expected_values(const SpecState& s, const TraceEntry& e) {
    Expected out;
    for (const auto& [var, ops] : e.updates) {
        auto idx = s.index_of(var);
        if (!idx) {
            out.blocked = Reason{ReasonKind::UpdateMismatch, "the spec declares no variable '" + var + "'", var, {}, {}, 0};
            return out;
        }
        try {
            out.values.emplace_back(*idx, apply_entry_updates(s[*idx], ops));
        } catch (const Error& err) {
            if (err.kind() == ErrorKind::UnknownOp) throw;
            out.blocked = Reason{ReasonKind::UpdateMismatch,
                                 "recorded updates of '" + var + "' do not apply: " + err.what(), var, {}, {}, 0};
            return out;
        }
    }
    return out;
}

std::optional<Reason> mismatch(const Expected& exp, const SpecState& t) {
    if (exp.blocked) return exp.blocked;
    for (const auto& [idx, want] : exp.values) {
        if (t[idx] == want) continue;
        const std::string& var = t.names()[idx];
        return Reason{ReasonKind::UpdateMismatch,
                      var + ": entry records " + want.to_string() + ", action yields " + t[idx].to_string(), var, want,
                      t[idx], 0};
    }
    return std::nullopt;
}

class Matcher {
public:
    Matcher(const Spec& spec, const SpecState& s, const TraceEntry& e)
        : spec_(spec), s_(s), args_(e.event_args.value_or(std::vector<std::string>{})), exp_(expected_values(s, e)) {}

    void action(const ActionSchema& a) {
        if (args_.size() > a.params.size()) {
            fail(a.name, {}, ReasonKind::NoCandidateAction,
                 "event_args has " + std::to_string(args_.size()) + " value(s) but " + a.name + " takes " +
                     std::to_string(a.params.size()));
            return;
        }
        bool any = false;
        for (const auto& p : parameter_instances(a)) {
            if (!args_agree(p, 0, args_)) continue;
            any = true;
            if (auto failed = a.failing_conjunct(s_, p)) {
                fail(a.name, p, ReasonKind::GuardFailed, *failed);
                continue;
            }
            auto targets = a.effect(s_, p);
            if (targets.empty()) fail(a.name, p, ReasonKind::GuardFailed, "effect has no successor");
            for (auto& t : targets) offer(a.name, {ActionInstance{a.name, p}}, p, std::move(t));
        }
        if (!any) fail(a.name, {}, ReasonKind::NoCandidateAction, "no parameter instance matches " + render_args(args_));
    }

    void composition(const std::string& name, const std::vector<std::string>& stages) {
        std::size_t total = 0;
        for (const auto& st : stages) total += spec_.action(st).params.size();
        if (args_.size() > total) {
            fail(name, {}, ReasonKind::NoCandidateAction,
                 "event_args has " + std::to_string(args_.size()) + " value(s) but " + name + " takes " +
                     std::to_string(total));
            return;
        }
        struct Partial {
            SpecState state;
            std::vector<ActionInstance> chain;
        };
        std::vector<Partial> frontier{{s_, {}}};
        std::size_t offset = 0;
        for (std::size_t k = 0; k < stages.size(); ++k) {
            const ActionSchema& a = spec_.action(stages[k]);
            std::vector<Partial> next;
            std::unordered_set<SpecState, SpecStateHash> seen;
            std::string first_failure;
            for (const auto& part : frontier) {
                for (const auto& p : parameter_instances(a)) {
                    if (!args_agree(p, offset, args_)) continue;
                    if (auto failed = a.failing_conjunct(part.state, p)) {
                        if (first_failure.empty()) first_failure = a.name + ": " + *failed;
                        continue;
                    }
                    for (auto& t : a.effect(part.state, p)) {
                        if (!seen.insert(t).second) continue;
                        auto chain = part.chain;
                        chain.push_back({a.name, p});
                        next.push_back({std::move(t), std::move(chain)});
                    }
                }
            }
            if (next.empty()) {
                Reason r{ReasonKind::CompositionStageFailed,
                         first_failure.empty() ? a.name + ": no parameter instance matches " + render_args(args_)
                                               : first_failure,
                         {}, {}, {}, k};
                attempts_.push_back({name, {}, std::move(r)});
                return;
            }
            frontier = std::move(next);
            offset += a.params.size();
        }
        for (auto& part : frontier) {
            Params flat;
            for (const auto& inst : part.chain) flat.insert(flat.end(), inst.params.begin(), inst.params.end());
            offer(name, std::move(part.chain), std::move(flat), std::move(part.state));
        }
    }

    void stutter() {
        if (!args_.empty()) {
            fail(std::string(kStutter), {}, ReasonKind::NoCandidateAction, "a stuttering step takes no parameters");
            return;
        }
        offer(std::string(kStutter), {}, {}, s_);
    }

    MatchResult take() { return std::move(result_); }
    std::vector<Attempt>& attempts() { return attempts_; }

private:
    void fail(std::string action, Params p, ReasonKind kind, std::string description) {
        attempts_.push_back({std::move(action), std::move(p), Reason{kind, std::move(description), {}, {}, {}, 0}});
    }

    void offer(std::string label, std::vector<ActionInstance> stages, Params flat, SpecState t) {
        if (auto r = mismatch(exp_, t)) {
            attempts_.push_back({std::move(label), std::move(flat), std::move(*r)});
            return;
        }
        if (seen_.insert(t).second) result_.successors.push_back({std::move(label), std::move(stages), std::move(t)});
    }

    const Spec& spec_;
    const SpecState& s_;
    std::vector<std::string> args_;
    Expected exp_;
    MatchResult result_;
    std::vector<Attempt>& attempts_ = result_.attempts;
    std::unordered_set<SpecState, SpecStateHash> seen_;
};

void check_operators(const Trace& trace) {
    for (std::size_t i = 0; i < trace.size(); ++i)
        for (const auto& [var, ops] : trace[i].updates)
            for (const auto& op : ops)
                if (!is_known_operator(op.op))
                    throw Error(ErrorKind::UnknownOp, "unknown update operator '" + op.op + "'")
                        .with_field(var)
                        .with_index(i + 1);
}

void check_composition(const Spec& spec, const ExplorerConfig& cfg) {
    for (const auto& [name, stages] : cfg.composition) spec.compose(name, stages);
}

struct NodeKey {
    SpecState state;
    std::size_t consumed;
    friend bool operator==(const NodeKey&, const NodeKey&) = default;
};

struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const noexcept {
        return static_cast<std::size_t>(k.state.fingerprint() ^ (k.consumed * 0x9e3779b97f4a7c15ULL));
    }
};

struct Node {
    SpecState state;
    std::size_t consumed;
    std::size_t parent;
    std::string label;
    std::vector<ActionInstance> stages;
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

std::vector<Attempt> attempts_at(const Spec& spec, const SpecState& s, const TraceEntry& e, const ExplorerConfig& cfg) {
    try {
        return match_entry(spec, s, e, cfg).attempts;
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::UnknownEvent) throw;
        return {Attempt{e.event.value_or(""), {}, Reason{ReasonKind::UnknownEvent, err.detail(), {}, {}, {}, 0}}};
    }
}

}  // namespace

MatchResult match_entry(const Spec& spec, const SpecState& s, const TraceEntry& entry, const ExplorerConfig& cfg) {
    Matcher m(spec, s, entry);
    if (entry.event) {
        const std::string& ev = *entry.event;
        if (auto it = cfg.composition.find(ev); it != cfg.composition.end()) {
            auto c = spec.compose(it->first, it->second);
            m.composition(c.name, c.stages);
        } else if (const auto* a = spec.find_action(ev)) {
            m.action(*a);
        } else {
            throw Error(ErrorKind::UnknownEvent,
                        "event '" + ev + "' names no action of " + spec.name() + " and no configured composition")
                .with_field("event");
        }
    } else {
        for (const auto& a : spec.actions()) m.action(a);
        for (const auto& [name, stages] : cfg.composition) m.composition(name, stages);
        if (cfg.allow_stutter) m.stutter();
    }
    return m.take();
}

Verdict validate(const Spec& spec, const Trace& trace, const ExplorerConfig& cfg) {
    check_operators(trace);
    check_composition(spec, cfg);
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };

    Verdict v;
    v.search = cfg.search;
    v.trace_length = trace.size();
    if (cfg.record_graph) v.graph.emplace();

    std::vector<Node> nodes;
    std::unordered_map<NodeKey, std::size_t, NodeKeyHash> index;
    std::deque<std::size_t> work;
    bool out_of_budget = false;

    auto intern = [&](SpecState s, std::size_t consumed, std::size_t parent, std::string label,
                      std::vector<ActionInstance> stages) -> std::optional<std::size_t> {
        NodeKey key{s, consumed};
        if (auto it = index.find(key); it != index.end()) return it->second;
        if (nodes.size() >= cfg.max_states) {
            out_of_budget = true;
            v.inconclusive_reason = "state budget of " + std::to_string(cfg.max_states) + " exhausted";
            return std::nullopt;
        }
        std::size_t id = nodes.size();
        index.emplace(std::move(key), id);
        if (v.graph) v.graph->nodes.push_back({s, consumed + 1});
        nodes.push_back({std::move(s), consumed, parent, std::move(label), std::move(stages)});
        v.consumed_max = std::max(v.consumed_max, consumed);
        work.push_back(id);
        return id;
    };

    for (const auto& s : spec.init())
        if (!intern(s, 0, kNone, {}, {})) break;

    std::size_t accepted = kNone;
    while (!work.empty() && !out_of_budget) {
        std::size_t id;
        if (cfg.search == SearchMode::BFS) {
            id = work.front();
            work.pop_front();
        } else {
            id = work.back();
            work.pop_back();
        }
        if (nodes[id].consumed == trace.size()) {
            if (accepted == kNone) accepted = id;
            if (cfg.search == SearchMode::DFS) break;
            continue;
        }
        if (cfg.max_seconds > 0 && elapsed() > cfg.max_seconds) {
            out_of_budget = true;
            v.inconclusive_reason = "time budget exhausted";
            break;
        }
        const SpecState s = nodes[id].state;
        const std::size_t consumed = nodes[id].consumed;
        MatchResult m;
        try {
            m = match_entry(spec, s, trace[consumed], cfg);
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::UnknownEvent) throw;
            continue;
        }
        if (cfg.search == SearchMode::DFS) std::reverse(m.successors.begin(), m.successors.end());
        for (auto& t : m.successors) {
            std::string label = t.label;
            auto to = intern(std::move(t.state), consumed + 1, id, t.label, std::move(t.stages));
            if (!to) break;
            if (v.graph) v.graph->edges.push_back({id, *to, std::move(label)});
        }
    }

    v.distinct_states = nodes.size();
    if (accepted == kNone && v.consumed_max == trace.size()) {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].consumed == trace.size()) {
                accepted = i;
                break;
            }
    }
    if (accepted != kNone) {
        v.status = VerdictStatus::Accepted;
        std::vector<std::size_t> path;
        for (std::size_t n = accepted; n != kNone; n = nodes[n].parent) path.push_back(n);
        std::reverse(path.begin(), path.end());
        Witness w{nodes[path.front()].state, {}};
        for (std::size_t i = 1; i < path.size(); ++i) {
            const Node& n = nodes[path[i]];
            w.steps.push_back({n.consumed, n.label, n.stages, n.state});
        }
        v.witness = std::move(w);
    } else if (out_of_budget) {
        v.status = VerdictStatus::Inconclusive;
    } else {
        v.status = VerdictStatus::Rejected;
        for (const auto& n : nodes) {
            if (n.consumed != v.consumed_max) continue;
            if (v.failures.size() >= cfg.max_failure_reports) {
                ++v.failures_omitted;
                continue;
            }
            v.failures.push_back({n.consumed + 1, n.state, attempts_at(spec, n.state, trace[n.consumed], cfg)});
        }
    }
    v.elapsed_seconds = elapsed();
    return v;
}

// ---------------------------------------------------------------------------

namespace {

struct Behaviour {
    enum class Kind { Plain, Composed, Stutter } kind;
    std::string name;
    Params flat;
    SpecState target;
};

class Oracle {
public:
    Oracle(const Spec& spec, const Trace& trace, const ExplorerConfig& cfg, std::size_t max_steps)
        : spec_(spec), trace_(trace), cfg_(cfg), max_steps_(max_steps) {}

    bool run() {
        for (const auto& s : spec_.init())
            if (extends(s, 0)) return true;
        return false;
    }

private:
    bool extends(const SpecState& s, std::size_t line) {
        if (line == trace_.size()) return true;
        for (const auto& b : behaviours(s)) {
            if (++steps_ > max_steps_) throw Error(ErrorKind::Budget, "oracle step budget exhausted");
            if (admits(trace_[line], s, b) && extends(b.target, line + 1)) return true;
        }
        return false;
    }

    static bool guard_holds(const ActionSchema& a, const SpecState& s, const Params& p) {
        for (const auto& c : a.guard)
            if (!c.holds(s, p)) return false;
        return true;
    }

    std::vector<Behaviour> behaviours(const SpecState& s) const {
        std::vector<Behaviour> out;
        for (const auto& a : spec_.actions())
            for (const auto& p : parameter_instances(a))
                if (guard_holds(a, s, p))
                    for (auto& t : a.effect(s, p)) out.push_back({Behaviour::Kind::Plain, a.name, p, std::move(t)});
        for (const auto& [name, stages] : cfg_.composition) {
            auto rec = [&](auto&& self, std::size_t k, const SpecState& m, const Params& flat) -> void {
                if (k == stages.size()) {
                    out.push_back({Behaviour::Kind::Composed, name, flat, m});
                    return;
                }
                const ActionSchema& a = spec_.action(stages[k]);
                for (const auto& p : parameter_instances(a)) {
                    if (!guard_holds(a, m, p)) continue;
                    Params next = flat;
                    next.insert(next.end(), p.begin(), p.end());
                    for (const auto& t : a.effect(m, p)) self(self, k + 1, t, next);
                }
            };
            rec(rec, 0, s, {});
        }
        if (cfg_.allow_stutter) out.push_back({Behaviour::Kind::Stutter, std::string(kStutter), {}, s});
        return out;
    }

    bool admits(const TraceEntry& e, const SpecState& s, const Behaviour& b) const {
        if (e.event) {
            switch (b.kind) {
            case Behaviour::Kind::Stutter: return false;
            case Behaviour::Kind::Composed:
                if (b.name != *e.event) return false;
                break;
            case Behaviour::Kind::Plain:
                if (b.name != *e.event || cfg_.composition.count(*e.event)) return false;
                break;
            }
        }
        if (e.event_args) {
            const auto& args = *e.event_args;
            if (args.size() > b.flat.size()) return false;
            for (std::size_t i = 0; i < args.size(); ++i)
                if (to_event_arg(b.flat[i]) != args[i]) return false;
        }
        for (const auto& [var, ops] : e.updates) {
            auto idx = s.index_of(var);
            if (!idx) return false;
            Value v = s[*idx];
            try {
                for (const auto& op : ops) v = apply_update(v, op.path, op.op, op.args);
            } catch (const Error& err) {
                if (err.kind() == ErrorKind::UnknownOp) throw;
                return false;
            }
            if (!(v == b.target[*idx])) return false;
        }
        return true;
    }

    const Spec& spec_;
    const Trace& trace_;
    const ExplorerConfig& cfg_;
    std::size_t max_steps_;
    std::size_t steps_ = 0;
};

std::string dot_escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        if (c == '\n') {
            out += "\\l";
            continue;
        }
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string params_text(const Params& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += ", ";
        out += p[i].to_string();
    }
    return out;
}

std::string origin_of(const Trace& trace, std::size_t entry_index) {
    if (entry_index == 0 || entry_index > trace.origins.size()) return {};
    return trace.origins[entry_index - 1];
}

nlohmann::json state_json(const SpecState& s) {
    nlohmann::json out = nlohmann::json::object();
    for (std::size_t i = 0; i < s.size(); ++i) out[s.names()[i]] = to_json(s[i]);
    return out;
}

nlohmann::json params_json(const Params& p) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : p) out.push_back(to_json(v));
    return out;
}

nlohmann::json stages_json(const std::vector<ActionInstance>& stages) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& inst : stages) out.push_back({{"action", inst.action}, {"params", params_json(inst.params)}});
    return out;
}

}  // namespace

bool oracle_validate(const Spec& spec, const Trace& trace, const ExplorerConfig& cfg, std::size_t max_steps) {
    check_operators(trace);
    check_composition(spec, cfg);
    return Oracle(spec, trace, cfg, max_steps).run();
}

Explanation explain(const Verdict& verdict, const Spec& spec, const Trace& trace) {
    std::ostringstream out;
    out << "Trace " << (verdict.accepted() ? "ACCEPTED" : verdict.status == VerdictStatus::Rejected ? "REJECTED"
                                                                                                   : "INCONCLUSIVE")
        << " against " << spec.name() << ": matched " << verdict.consumed_max << " of " << verdict.trace_length
        << " entries, " << verdict.distinct_states << " distinct states explored.\n";

    if (verdict.status == VerdictStatus::Inconclusive) out << "Search stopped: " << verdict.inconclusive_reason << ".\n";

    if (verdict.witness) {
        out << "Witness:\n";
        for (const auto& st : verdict.witness->steps) {
            out << "  entry " << st.entry_index << ": ";
            if (st.stages.empty()) {
                out << st.label;
            } else {
                if (st.stages.size() > 1) out << st.label << " = ";
                for (std::size_t i = 0; i < st.stages.size(); ++i) out << (i ? " ; " : "") << st.stages[i].to_string();
            }
            out << '\n';
        }
    }

    if (!verdict.failures.empty()) {
        const std::size_t at = verdict.failures.front().entry_index;
        out << "No behavior explains entry " << at;
        if (auto o = origin_of(trace, at); !o.empty()) out << " (" << o << ")";
        out << ":\n  " << serialize_entry(trace[at - 1]) << '\n';
        for (const auto& f : verdict.failures) {
            out << "From state:\n";
            std::istringstream lines(f.state.to_string());
            for (std::string line; std::getline(lines, line);) out << "    " << line << '\n';
            out << "  attempts:\n";
            if (f.attempts.empty()) out << "    (no candidate action)\n";
            for (const auto& a : f.attempts) {
                out << "    " << a.action;
                if (!a.params.empty()) out << '(' << params_text(a.params) << ')';
                out << " -> " << to_string(a.reason.kind);
                if (a.reason.kind == ReasonKind::CompositionStageFailed) out << " at stage " << a.reason.stage + 1;
                out << ": " << a.reason.description << '\n';
            }
        }
        if (verdict.failures_omitted)
            out << "(" << verdict.failures_omitted << " more blocking states not shown)\n";
    }

    Explanation ex{out.str(), {}};
    if (!verdict.graph) return ex;

    const auto& g = *verdict.graph;
    std::ostringstream dot;
    dot << "digraph \"" << dot_escape(spec.name()) << "\" {\n  rankdir=TB;\n  node [shape=box, fontname=\"monospace\"];\n";
    std::unordered_set<std::size_t> on_witness;
    if (verdict.witness) {
        // Walk the witness through the graph by (state, line).
        std::size_t line = 1;
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            if (g.nodes[i].line == 1 && g.nodes[i].state == verdict.witness->initial) on_witness.insert(i);
        for (const auto& st : verdict.witness->steps) {
            ++line;
            for (std::size_t i = 0; i < g.nodes.size(); ++i)
                if (g.nodes[i].line == line && g.nodes[i].state == st.state) on_witness.insert(i);
        }
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        dot << "  n" << i << " [label=\"after " << n.line - 1 << " entries\\l" << dot_escape(n.state.to_string())
            << "\\l\"";
        if (on_witness.count(i)) {
            dot << ", color=darkgreen, penwidth=2";
        } else if (verdict.status == VerdictStatus::Rejected && n.line - 1 == verdict.consumed_max) {
            dot << ", color=red, penwidth=2";
        }
        dot << "];\n";
    }
    for (const auto& e : g.edges)
        dot << "  n" << e.from << " -> n" << e.to << " [label=\"" << dot_escape(e.label) << "\"];\n";
    if (verdict.status == VerdictStatus::Rejected && verdict.consumed_max < trace.size()) {
        const std::size_t at = verdict.consumed_max + 1;
        dot << "  blocked [shape=note, style=dashed, label=\"entry " << at << " unmatched\\l"
            << dot_escape(serialize_entry(trace[at - 1])) << "\\l\"];\n";
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            if (g.nodes[i].line == at) dot << "  n" << i << " -> blocked [style=dashed, color=red];\n";
    }
    dot << "}\n";
    ex.dot = dot.str();
    return ex;
}

nlohmann::json verdict_to_json(const Verdict& verdict, const Spec& spec) {
    nlohmann::json out;
    out["spec"] = spec.name();
    out["status"] = std::string(to_string(verdict.status));
    out["accepted"] = verdict.accepted();
    out["search"] = verdict.search == SearchMode::BFS ? "bfs" : "dfs";
    out["trace_length"] = verdict.trace_length;
    out["consumed_max"] = verdict.consumed_max;
    out["distinct_states"] = verdict.distinct_states;
    if (verdict.status == VerdictStatus::Inconclusive) out["inconclusive_reason"] = verdict.inconclusive_reason;

    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : verdict.failures) {
        nlohmann::json attempts = nlohmann::json::array();
        for (const auto& a : f.attempts) {
            nlohmann::json reason{{"kind", std::string(to_string(a.reason.kind))},
                                  {"description", a.reason.description}};
            if (!a.reason.variable.empty()) reason["variable"] = a.reason.variable;
            if (a.reason.expected) reason["expected"] = to_json(*a.reason.expected);
            if (a.reason.actual) reason["actual"] = to_json(*a.reason.actual);
            if (a.reason.kind == ReasonKind::CompositionStageFailed) reason["stage"] = a.reason.stage;
            attempts.push_back({{"action", a.action}, {"params", params_json(a.params)}, {"reason", std::move(reason)}});
        }
        failures.push_back(
            {{"entry_index", f.entry_index}, {"state", state_json(f.state)}, {"attempts", std::move(attempts)}});
    }
    out["failures"] = std::move(failures);
    out["failures_omitted"] = verdict.failures_omitted;

    if (verdict.witness) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& st : verdict.witness->steps)
            steps.push_back({{"entry_index", st.entry_index},
                             {"label", st.label},
                             {"stages", stages_json(st.stages)},
                             {"state", state_json(st.state)}});
        out["witness"] = {{"initial", state_json(verdict.witness->initial)}, {"steps", std::move(steps)}};
    } else {
        out["witness"] = nullptr;
    }
    return out;
}

}  // namespace tracecheck
