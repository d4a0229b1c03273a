#include "tracecheck/spec.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tracecheck/errors.hpp"

namespace tracecheck {

namespace {

std::uint64_t combine(const std::vector<Value>& values) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto& v : values) {
        h ^= v.fingerprint() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

}  // namespace

SpecState::SpecState(std::shared_ptr<const Names> names, std::vector<Value> values)
    : names_(std::move(names)), values_(std::move(values)), hash_(combine(values_)) {}

std::optional<std::size_t> SpecState::index_of(std::string_view var) const noexcept {
    const auto& n = *names_;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (n[i] == var) return i;
    return std::nullopt;
}

const Value& SpecState::get(std::string_view var) const {
    auto i = index_of(var);
    if (!i) throw Error(ErrorKind::Usage, "undeclared variable '" + std::string(var) + "'");
    return values_[*i];
}

SpecState SpecState::with(std::string_view var, Value v) const {
    auto i = index_of(var);
    if (!i) throw Error(ErrorKind::Usage, "undeclared variable '" + std::string(var) + "'");
    std::vector<Value> values = values_;
    values[*i] = std::move(v);
    return SpecState(names_, std::move(values));
}

std::string SpecState::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (i) out += '\n';
        out += "/\\ " + (*names_)[i] + " = " + values_[i].to_string();
    }
    return out;
}

std::optional<std::string> ActionSchema::failing_conjunct(const SpecState& s, const Params& p) const {
    for (const auto& c : guard)
        if (!c.holds(s, p)) return c.description;
    return std::nullopt;
}

std::string ActionInstance::to_string() const {
    std::string out = action;
    if (!params.empty()) {
        out += '(';
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (i) out += ", ";
            out += params[i].to_string();
        }
        out += ')';
    }
    return out;
}

// ---------------------------------------------------------------------------

Spec::Spec(std::string name, std::vector<std::string> variables, std::vector<std::map<std::string, Value>> init,
           std::vector<ActionSchema> actions, std::vector<Invariant> invariants)
    : name_(std::move(name)), names_(std::make_shared<const SpecState::Names>(std::move(variables))),
      actions_(std::move(actions)), invariants_(std::move(invariants)) {
    std::set<std::string> seen;
    for (const auto& v : *names_)
        if (!seen.insert(v).second) throw Error(ErrorKind::InvalidSpec, "duplicate variable '" + v + "'");
    if (init.empty()) throw Error(ErrorKind::InvalidSpec, "a spec needs at least one initial state");
    for (const auto& bindings : init) init_.push_back(make_state(bindings));

    seen.clear();
    for (auto& a : actions_) {
        if (!seen.insert(a.name).second) throw Error(ErrorKind::InvalidSpec, "duplicate action '" + a.name + "'");
        if (!a.effect) throw Error(ErrorKind::InvalidSpec, "action '" + a.name + "' has no effect");
        for (auto& p : a.params) {
            std::sort(p.domain.begin(), p.domain.end());
            p.domain.erase(std::unique(p.domain.begin(), p.domain.end()), p.domain.end());
        }
    }
}

const ActionSchema* Spec::find_action(std::string_view name) const noexcept {
    for (const auto& a : actions_)
        if (a.name == name) return &a;
    return nullptr;
}

const ActionSchema& Spec::action(std::string_view name) const {
    if (const auto* a = find_action(name)) return *a;
    throw Error(ErrorKind::UnknownAction, "spec '" + name_ + "' has no action '" + std::string(name) + "'");
}

SpecState Spec::make_state(const std::map<std::string, Value>& bindings) const {
    std::vector<Value> values;
    values.reserve(names_->size());
    for (const auto& var : *names_) {
        auto it = bindings.find(var);
        if (it == bindings.end()) throw Error(ErrorKind::InvalidSpec, "state does not bind '" + var + "'");
        values.push_back(it->second);
    }
    if (bindings.size() != names_->size()) {
        for (const auto& [k, v] : bindings)
            if (std::find(names_->begin(), names_->end(), k) == names_->end())
                throw Error(ErrorKind::InvalidSpec, "state binds undeclared variable '" + k + "'");
    }
    return SpecState(names_, std::move(values));
}

ComposedAction Spec::compose(std::string name, std::vector<std::string> stages) const {
    if (stages.size() < 2)
        throw Error(ErrorKind::InvalidComposition, "composition '" + name + "' needs at least two stages");
    for (std::size_t i = 0; i < stages.size(); ++i)
        if (!find_action(stages[i]))
            throw Error(ErrorKind::InvalidComposition,
                        "composition '" + name + "' refers to unknown action '" + stages[i] + "'")
                .with_index(i);
    return ComposedAction{std::move(name), std::move(stages)};
}

// ---------------------------------------------------------------------------

std::vector<Params> parameter_instances(const ActionSchema& action, const Params& prefix) {
    const auto& params = action.params;
    if (prefix.size() > params.size()) return {};
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (!std::binary_search(params[i].domain.begin(), params[i].domain.end(), prefix[i])) return {};

    std::vector<Params> out;
    Params current = prefix;
    auto rec = [&](auto&& self, std::size_t i) -> void {
        if (i == params.size()) {
            out.push_back(current);
            return;
        }
        for (const auto& v : params[i].domain) {
            current.push_back(v);
            self(self, i + 1);
            current.pop_back();
        }
    };
    rec(rec, prefix.size());
    return out;
}

std::vector<ActionInstance> enabled_instances(const Spec& spec, const SpecState& s) {
    std::vector<ActionInstance> out;
    for (const auto& a : spec.actions())
        for (auto& p : parameter_instances(a))
            if (!a.failing_conjunct(s, p)) out.push_back({a.name, std::move(p)});
    return out;
}

std::vector<SpecState> step(const Spec& spec, const SpecState& s, std::string_view action, const Params& params) {
    const ActionSchema& a = spec.action(action);
    if (params.size() != a.params.size())
        throw Error(ErrorKind::Usage, a.name + " takes " + std::to_string(a.params.size()) + " parameter(s)");
    if (auto failed = a.failing_conjunct(s, params))
        throw Error(ErrorKind::GuardFailed, *failed).with_field(a.name);
    return a.effect(s, params);
}

std::vector<SpecState> step_composed(const Spec& spec, const SpecState& s, const ComposedAction& c,
                                     const std::vector<Params>& prefixes) {
    std::vector<SpecState> frontier{s};
    for (std::size_t stage = 0; stage < c.stages.size(); ++stage) {
        const ActionSchema& a = spec.action(c.stages[stage]);
        const Params prefix = stage < prefixes.size() ? prefixes[stage] : Params{};
        std::vector<SpecState> next;
        std::unordered_set<SpecState, SpecStateHash> seen;
        std::string first_failure;
        for (const auto& m : frontier) {
            for (const auto& p : parameter_instances(a, prefix)) {
                if (auto failed = a.failing_conjunct(m, p)) {
                    if (first_failure.empty()) first_failure = *failed;
                    continue;
                }
                for (auto& t : a.effect(m, p))
                    if (seen.insert(t).second) next.push_back(std::move(t));
            }
        }
        if (next.empty() && stage == 0) {
            throw Error(ErrorKind::GuardFailed,
                        first_failure.empty() ? "no parameter instance of " + a.name : first_failure)
                .with_field(a.name)
                .with_index(0);
        }
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    return frontier;
}

bool check_invariant(const Spec& spec, const SpecState& s, std::string_view name) {
    for (const auto& inv : spec.invariants())
        if (inv.name == name) return inv.holds(s);
    throw Error(ErrorKind::UnknownInvariant, "spec '" + spec.name() + "' has no invariant '" + std::string(name) + "'");
}

std::vector<SpecState> next_states(const Spec& spec, const SpecState& s) {
    std::vector<SpecState> out;
    std::unordered_set<SpecState, SpecStateHash> seen;
    for (const auto& inst : enabled_instances(spec, s))
        for (auto& t : spec.action(inst.action).effect(s, inst.params))
            if (seen.insert(t).second) out.push_back(std::move(t));
    return out;
}

Reachability explore_reachable(const Spec& spec, std::size_t max_states) {
    Reachability r;
    std::unordered_map<SpecState, std::size_t, SpecStateHash> index;
    std::deque<std::size_t> queue;
    for (const auto& s : spec.init()) {
        if (index.size() >= max_states) {
            r.complete = false;
            break;
        }
        if (index.emplace(s, r.states.size()).second) {
            queue.push_back(r.states.size());
            r.states.push_back(s);
        }
    }
    while (!queue.empty() && r.complete) {
        SpecState s = r.states[queue.front()];
        queue.pop_front();
        for (auto& t : next_states(spec, s)) {
            ++r.transitions;
            if (index.count(t)) continue;
            if (index.size() >= max_states) {
                r.complete = false;
                break;
            }
            index.emplace(t, r.states.size());
            queue.push_back(r.states.size());
            r.states.push_back(std::move(t));
        }
    }
    return r;
}

namespace {

std::string dot_escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\l";
            continue;
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::string state_graph_dot(const Spec& spec, std::size_t max_states) {
    std::ostringstream out;
    out << "// state graph of " << spec.name() << "; stuttering self-loops are omitted\n";
    out << "digraph \"" << dot_escape(spec.name()) << "\" {\n  node [shape=box, fontname=\"monospace\"];\n";

    std::unordered_map<SpecState, std::size_t, SpecStateHash> index;
    std::vector<SpecState> states;
    std::deque<std::size_t> queue;
    bool truncated = false;
    auto intern = [&](const SpecState& s) -> std::optional<std::size_t> {
        if (auto it = index.find(s); it != index.end()) return it->second;
        if (states.size() >= max_states) {
            truncated = true;
            return std::nullopt;
        }
        std::size_t id = states.size();
        index.emplace(s, id);
        states.push_back(s);
        queue.push_back(id);
        bool initial = std::find(spec.init().begin(), spec.init().end(), s) != spec.init().end();
        out << "  s" << id << " [label=\"" << dot_escape(s.to_string()) << "\\l\""
            << (initial ? ", penwidth=2" : "") << "];\n";
        return id;
    };
    for (const auto& s : spec.init()) intern(s);
    while (!queue.empty()) {
        std::size_t from = queue.front();
        queue.pop_front();
        const SpecState s = states[from];
        for (const auto& inst : enabled_instances(spec, s)) {
            for (const auto& t : spec.action(inst.action).effect(s, inst.params)) {
                if (t == s) continue;
                if (auto to = intern(t))
                    out << "  s" << from << " -> s" << *to << " [label=\"" << dot_escape(inst.to_string()) << "\"];\n";
            }
        }
    }
    if (truncated) out << "  // truncated after " << max_states << " states\n";
    out << "}\n";
    return out.str();
}

}  // namespace tracecheck
