#include "tracecheck/trace.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tracecheck/errors.hpp"

namespace tracecheck {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::Schema, what).with_field(field);
}

void validate_update_list(const std::string& var, const json& list) {
    if (!list.is_array()) schema_error(var, "variable updates must be an array");
    if (list.empty()) schema_error(var, "variable updates must contain at least one item");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const json& item = list[i];
        const std::string where = var + "[" + std::to_string(i) + "]";
        if (!item.is_object()) schema_error(where, "update must be an object");
        auto op = item.find("op");
        if (op == item.end()) schema_error(where + ".op", "missing required property");
        if (!op->is_string()) schema_error(where + ".op", "must be a string");
        auto path = item.find("path");
        if (path == item.end()) schema_error(where + ".path", "missing required property");
        if (!path->is_array()) schema_error(where + ".path", "must be an array");
        auto args = item.find("args");
        if (args == item.end()) schema_error(where + ".args", "missing required property");
        if (!args->is_array()) schema_error(where + ".args", "must be an array");
    }
}

}  // namespace

bool is_reserved_key(std::string_view key) noexcept {
    return key == "clock" || key == "event" || key == "event_args";
}

void validate_entry(const json& raw) {
    if (!raw.is_object()) schema_error("<entry>", "entry must be a JSON object");
    auto clock = raw.find("clock");
    if (clock == raw.end()) schema_error("clock", "missing required property");
    if (clock->is_number_integer() && !clock->is_number_unsigned()) {
        if (clock->get<std::int64_t>() < 0) schema_error("clock", "must be >= 0");
    } else if (clock->is_number_unsigned()) {
        if (clock->get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            schema_error("clock", "exceeds the int64 range");
    } else {
        schema_error("clock", "must be an integer");
    }
    for (auto it = raw.begin(); it != raw.end(); ++it) {
        const std::string& key = it.key();
        if (key == "clock") continue;
        if (key == "event") {
            if (!it->is_string()) schema_error("event", "must be a string");
        } else if (key == "event_args") {
            if (!it->is_array()) schema_error("event_args", "must be an array");
            for (const auto& a : *it)
                if (!a.is_string()) schema_error("event_args", "items must be strings");
        } else {
            validate_update_list(key, *it);
        }
    }
}

TraceEntry entry_from_json(const json& raw) {
    validate_entry(raw);
    TraceEntry entry;
    const json& clock = raw.at("clock");
    entry.clock = clock.is_number_unsigned() ? static_cast<std::int64_t>(clock.get<std::uint64_t>())
                                             : clock.get<std::int64_t>();
    for (auto it = raw.begin(); it != raw.end(); ++it) {
        const std::string& key = it.key();
        if (key == "clock") continue;
        if (key == "event") {
            entry.event = it->get<std::string>();
        } else if (key == "event_args") {
            entry.event_args = it->get<std::vector<std::string>>();
        } else {
            std::vector<UpdateOp> ops;
            for (std::size_t i = 0; i < it->size(); ++i) {
                const json& item = (*it)[i];
                UpdateOp op;
                op.op = item.at("op").get<std::string>();
                try {
                    for (const auto& seg : item.at("path"))
                        op.path.push_back(seg.is_string() ? seg.get<std::string>() : to_event_arg(from_json(seg)));
                    for (const auto& a : item.at("args")) op.args.push_back(from_json(a));
                } catch (Error& e) {
                    e.with_field(key + "[" + std::to_string(i) + "]");
                    throw;
                }
                ops.push_back(std::move(op));
            }
            entry.updates.emplace(key, std::move(ops));
        }
    }
    return entry;
}

Trace parse_ndjson(std::string_view text, std::string_view label) {
    Trace trace;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        json raw = json::parse(line.begin(), line.end(), nullptr, false);
        if (raw.is_discarded()) {
            throw Error(ErrorKind::Parse, "malformed JSON").with_line(line_no);
        }
        try {
            trace.entries.push_back(entry_from_json(raw));
        } catch (Error& e) {
            e.with_line(line_no);
            throw;
        }
        std::string origin = label.empty() ? "line " : std::string(label) + ":";
        trace.origins.push_back(origin + std::to_string(line_no));
    }
    return trace;
}

Trace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open trace file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ndjson(buf.str(), path);
}

std::string serialize_entry(const TraceEntry& entry) {
    std::string out = "{\"clock\":" + std::to_string(entry.clock);
    for (const auto& [var, ops] : entry.updates) {
        out += ',';
        out += json(var).dump();
        out += ":[";
        for (std::size_t i = 0; i < ops.size(); ++i) {
            if (i) out += ',';
            json args = json::array();
            for (const auto& a : ops[i].args) args.push_back(to_json(a));
            out += "{\"op\":" + json(ops[i].op).dump() + ",\"path\":" + json(ops[i].path).dump() +
                   ",\"args\":" + args.dump() + "}";
        }
        out += ']';
    }
    if (entry.event) out += ",\"event\":" + json(*entry.event).dump();
    if (entry.event_args) out += ",\"event_args\":" + json(*entry.event_args).dump();
    out += '}';
    return out;
}

std::string serialize_trace(const Trace& trace) {
    std::string out;
    for (const auto& e : trace.entries) {
        out += serialize_entry(e);
        out += '\n';
    }
    return out;
}

void write_trace_file(const std::string& path, const Trace& trace) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write trace file '" + path + "'");
    out << serialize_trace(trace);
    if (!out.flush()) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

Trace merge(const std::vector<Trace>& traces) {
    struct Ref {
        std::int64_t clock;
        std::size_t file;
        std::size_t line;
    };
    std::vector<Ref> refs;
    for (std::size_t f = 0; f < traces.size(); ++f)
        for (std::size_t l = 0; l < traces[f].entries.size(); ++l)
            refs.push_back({traces[f].entries[l].clock, f, l});
    std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
        return std::tie(a.clock, a.file, a.line) < std::tie(b.clock, b.file, b.line);
    });

    Trace out;
    out.entries.reserve(refs.size());
    for (const auto& r : refs) {
        const Trace& src = traces[r.file];
        out.entries.push_back(src.entries[r.line]);
        out.origins.push_back(r.line < src.origins.size() ? src.origins[r.line]
                                                          : "input " + std::to_string(r.file) + ":" +
                                                                std::to_string(r.line + 1));
    }
    return out;
}

std::string to_event_arg(const Value& v) {
    return v.is(Value::Kind::String) ? v.as_string() : value_to_json(v);
}

}  // namespace tracecheck
