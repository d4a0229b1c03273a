#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracecheck/value.hpp"

namespace tracecheck {

/// Total assignment of values to the variables of a spec. Cheap to copy.
class SpecState {
public:
    using Names = std::vector<std::string>;

    SpecState(std::shared_ptr<const Names> names, std::vector<Value> values);

    const Names& names() const noexcept { return *names_; }
    std::size_t size() const noexcept { return values_.size(); }
    const Value& operator[](std::size_t i) const { return values_[i]; }
    const std::vector<Value>& values() const noexcept { return values_; }

    /// Index of a variable, or nullopt when the spec does not declare it.
    std::optional<std::size_t> index_of(std::string_view var) const noexcept;
    /// Throws Usage for undeclared variables.
    const Value& get(std::string_view var) const;
    /// Copy with one variable rebound; every other variable is unchanged.
    SpecState with(std::string_view var, Value v) const;

    std::uint64_t fingerprint() const noexcept { return hash_; }
    /// "/\ var = value" lines, one per variable.
    std::string to_string() const;

    friend bool operator==(const SpecState& a, const SpecState& b) noexcept {
        return a.hash_ == b.hash_ && a.values_ == b.values_;
    }

private:
    std::shared_ptr<const Names> names_;
    std::vector<Value> values_;
    std::uint64_t hash_;
};

struct SpecStateHash {
    std::size_t operator()(const SpecState& s) const noexcept { return static_cast<std::size_t>(s.fingerprint()); }
};

using Params = std::vector<Value>;

struct Param {
    std::string name;
    std::vector<Value> domain;
};

/// One named conjunct of an action guard. The description is what failure
/// reports quote, e.g. "tmPrepared = RM".
struct Conjunct {
    std::string description;
    std::function<bool(const SpecState&, const Params&)> holds;
};

using Effect = std::function<std::vector<SpecState>(const SpecState&, const Params&)>;

/// Guarded, parameterized transition. The effect is only consulted when
/// every guard conjunct holds and returns at least one successor; several
/// successors encode internal nondeterminism. Variables an effect does not
/// rebind keep their value.
struct ActionSchema {
    std::string name;
    std::vector<Param> params;
    std::vector<Conjunct> guard;
    Effect effect;

    /// Description of the first conjunct that does not hold, if any.
    std::optional<std::string> failing_conjunct(const SpecState& s, const Params& p) const;
};

struct Invariant {
    std::string name;
    std::function<bool(const SpecState&)> holds;
};

struct ActionInstance {
    std::string action;
    Params params;

    std::string to_string() const;
    friend bool operator==(const ActionInstance&, const ActionInstance&) = default;
};

/// Sequential composition A ∘ B ∘ ... of existing actions. Built through
/// Spec::compose, which checks that there are at least two stages and that
/// every stage names an action of the spec.
struct ComposedAction {
    std::string name;
    std::vector<std::string> stages;
};

class Spec {
public:
    /// Throws InvalidSpec for an empty init list, duplicate action names,
    /// init states that do not bind exactly the declared variables, or
    /// undeclared variables. Parameter domains are sorted canonically.
    Spec(std::string name, std::vector<std::string> variables,
         std::vector<std::map<std::string, Value>> init, std::vector<ActionSchema> actions,
         std::vector<Invariant> invariants = {});

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& variables() const noexcept { return *names_; }
    const std::vector<SpecState>& init() const noexcept { return init_; }
    const std::vector<ActionSchema>& actions() const noexcept { return actions_; }
    const std::vector<Invariant>& invariants() const noexcept { return invariants_; }

    const ActionSchema* find_action(std::string_view name) const noexcept;
    /// Throws UnknownAction.
    const ActionSchema& action(std::string_view name) const;

    /// Throws InvalidSpec unless `bindings` is total over the variables.
    SpecState make_state(const std::map<std::string, Value>& bindings) const;

    /// Throws InvalidComposition.
    ComposedAction compose(std::string name, std::vector<std::string> stages) const;

private:
    std::string name_;
    std::shared_ptr<const SpecState::Names> names_;
    std::vector<SpecState> init_;
    std::vector<ActionSchema> actions_;
    std::vector<Invariant> invariants_;
};

/// Parameter tuples of `action` whose first entries equal `prefix`, in
/// lexicographic domain order. An over-long prefix yields nothing.
std::vector<Params> parameter_instances(const ActionSchema& action, const Params& prefix = {});

/// All enabled (action, params) pairs: action order, then parameter order.
std::vector<ActionInstance> enabled_instances(const Spec& spec, const SpecState& s);

/// Successors of one action instance. Throws GuardFailed with the failing
/// conjunct's description when the guard is false.
std::vector<SpecState> step(const Spec& spec, const SpecState& s, std::string_view action, const Params& params);

/// Successors of a composed action. `prefixes[i]` fixes leading parameters
/// of stage i (missing or short entries leave the rest free). Throws
/// GuardFailed, with index() set to the stage, when the first stage cannot
/// fire; later stages that never fire produce an empty result.
std::vector<SpecState> step_composed(const Spec& spec, const SpecState& s, const ComposedAction& c,
                                     const std::vector<Params>& prefixes = {});

/// Throws UnknownInvariant.
bool check_invariant(const Spec& spec, const SpecState& s, std::string_view name);

/// Deduplicated successors over every enabled instance, in enumeration order.
std::vector<SpecState> next_states(const Spec& spec, const SpecState& s);

struct Reachability {
    std::vector<SpecState> states;  // discovery (BFS) order
    std::size_t transitions = 0;
    bool complete = true;           // false when the bound cut exploration short
};

/// Breadth-first enumeration of the reachable states, stopping after
/// `max_states` distinct states.
Reachability explore_reachable(const Spec& spec, std::size_t max_states = 1'000'000);

/// DOT rendering of the unconstrained state graph, limited to `max_states`
/// states. Stuttering self-loops are omitted.
std::string state_graph_dot(const Spec& spec, std::size_t max_states = 10'000);

}  // namespace tracecheck
