#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracecheck/value.hpp"

namespace tracecheck {

/// One line of an NDJSON trace.
struct TraceEntry {
    std::int64_t clock = 0;
    /// Variable name -> non-empty list of updates, in instrumentation order.
    std::map<std::string, std::vector<UpdateOp>> updates;
    std::optional<std::string> event;
    std::optional<std::vector<std::string>> event_args;

    friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct Trace {
    std::vector<TraceEntry> entries;
    /// Where each entry came from ("file:line"); empty or parallel to entries.
    std::vector<std::string> origins;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
    const TraceEntry& operator[](std::size_t i) const { return entries[i]; }

    friend bool operator==(const Trace& a, const Trace& b) { return a.entries == b.entries; }
};

/// Keys of an entry object that are not variable names.
bool is_reserved_key(std::string_view key) noexcept;

/// Checks a decoded JSON object against the trace-entry schema (clock is a
/// non-negative integer, every other non-reserved key holds a non-empty
/// array of {op, path, args} objects, event is a string, event_args an array
/// of strings). Throws SchemaError naming the offending field.
void validate_entry(const nlohmann::json& raw);

/// validate_entry followed by conversion. Path items that are not strings
/// are rendered with to_event_arg.
TraceEntry entry_from_json(const nlohmann::json& raw);

/// One JSON object per non-blank line. Line numbers in errors are 1-based
/// file lines; `label` prefixes the recorded origins.
Trace parse_ndjson(std::string_view text, std::string_view label = {});
Trace read_trace_file(const std::string& path);

/// Keys in fixed order: clock, variables (lexicographic), event, event_args.
std::string serialize_entry(const TraceEntry& entry);
std::string serialize_trace(const Trace& trace);
void write_trace_file(const std::string& path, const Trace& trace);

/// Sorts the union of all entries by clock; ties are broken by input index,
/// then by position within that input.
Trace merge(const std::vector<Trace>& traces);

/// Canonical string form of an action parameter as it appears in
/// event_args: bare strings verbatim, anything else as compact JSON.
std::string to_event_arg(const Value& v);

}  // namespace tracecheck
