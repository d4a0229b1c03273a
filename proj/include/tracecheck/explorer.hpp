#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracecheck/spec.hpp"
#include "tracecheck/trace.hpp"

namespace tracecheck {

enum class SearchMode { BFS, DFS };

struct ExplorerConfig {
    SearchMode search = SearchMode::BFS;
    /// Offer a stuttering step for entries that carry no event.
    bool allow_stutter = false;
    /// Event name -> actions composed (in order) to explain that event.
    std::map<std::string, std::vector<std::string>> composition;
    std::size_t max_states = 5'000'000;
    /// Wall-clock budget; 0 disables it.
    double max_seconds = 0;
    /// Keep every explored edge so explain() can draw the graph.
    bool record_graph = false;
    std::size_t max_failure_reports = 64;
};

enum class ReasonKind { GuardFailed, UpdateMismatch, NoCandidateAction, CompositionStageFailed, UnknownEvent };

std::string_view to_string(ReasonKind kind);

/// Why one candidate could not explain a trace entry.
struct Reason {
    ReasonKind kind;
    std::string description;
    std::string variable;            // UpdateMismatch
    std::optional<Value> expected;   // UpdateMismatch: value the entry demands
    std::optional<Value> actual;     // UpdateMismatch: value the action produces
    std::size_t stage = 0;           // CompositionStageFailed (0-based)
};

struct Attempt {
    std::string action;
    Params params;
    Reason reason;
};

/// A successor produced while matching one entry. `stages` lists the spec
/// action instances taken: one for a plain action, several for a
/// composition, none for a stuttering step.
struct Transition {
    std::string label;
    std::vector<ActionInstance> stages;
    SpecState state;
};

struct MatchResult {
    std::vector<Transition> successors;
    std::vector<Attempt> attempts;
};

/// All transitions from `s` consistent with `entry`, deduplicated by
/// target state, plus a reason for every candidate that failed. Throws
/// UnknownEvent when the entry's event names neither an action nor a
/// configured composition.
MatchResult match_entry(const Spec& spec, const SpecState& s, const TraceEntry& entry, const ExplorerConfig& cfg);

enum class VerdictStatus { Accepted, Rejected, Inconclusive };

std::string_view to_string(VerdictStatus status);

struct FailureReport {
    std::size_t entry_index;  // 1-based
    SpecState state;
    std::vector<Attempt> attempts;
};

struct WitnessStep {
    std::size_t entry_index;  // 1-based
    std::string label;
    std::vector<ActionInstance> stages;
    SpecState state;
};

struct Witness {
    SpecState initial;
    std::vector<WitnessStep> steps;
};

/// Constrained graph kept when ExplorerConfig::record_graph is set.
struct ExploredGraph {
    struct Node {
        SpecState state;
        std::size_t line;  // next entry to consume (1-based)
    };
    struct Edge {
        std::size_t from;
        std::size_t to;
        std::string label;
    };
    std::vector<Node> nodes;
    std::vector<Edge> edges;
};

struct Verdict {
    VerdictStatus status = VerdictStatus::Rejected;
    SearchMode search = SearchMode::BFS;
    std::size_t trace_length = 0;
    /// Longest trace prefix matched by some behavior of the spec.
    std::size_t consumed_max = 0;
    /// Distinct (state, line) pairs visited.
    std::size_t distinct_states = 0;
    std::optional<Witness> witness;
    std::vector<FailureReport> failures;
    std::size_t failures_omitted = 0;
    std::string inconclusive_reason;
    double elapsed_seconds = 0;
    std::optional<ExploredGraph> graph;

    bool accepted() const noexcept { return status == VerdictStatus::Accepted; }
};

/// Decides whether some behavior of `spec` matches the whole trace. Budget
/// exhaustion yields an Inconclusive verdict, never a rejection. Throws
/// UnknownOp for update operators outside the supported set and
/// InvalidComposition for a bad composition map.
Verdict validate(const Spec& spec, const Trace& trace, const ExplorerConfig& cfg = {});

/// Reference decision procedure: enumerates every behavior of length
/// Len(trace), checking each entry directly against its definition, with
/// no visited set and no pruning. Throws Budget after `max_steps`
/// candidate transitions.
bool oracle_validate(const Spec& spec, const Trace& trace, const ExplorerConfig& cfg = {},
                     std::size_t max_steps = 50'000'000);

struct Explanation {
    std::string report;
    std::string dot;  // empty unless the verdict kept its graph
};

Explanation explain(const Verdict& verdict, const Spec& spec, const Trace& trace);

/// Machine-readable verdict; see docs/verdict.schema.json.
nlohmann::json verdict_to_json(const Verdict& verdict, const Spec& spec);

}  // namespace tracecheck
