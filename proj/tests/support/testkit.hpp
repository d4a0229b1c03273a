#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "tracecheck/trace.hpp"
#include "tracecheck/value.hpp"

namespace testkit {

using tracecheck::Value;

/// Seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t next() { return rng_(); }
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
    }
    bool coin(double p = 0.5) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
    template <class T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(items.size()) - 1))];
    }

    std::string text() {
        static const std::vector<std::string> pieces{"a", "b", "rm-0", "\"", "\\", "\n", "é", "日本", " ", "{", ":", "\t", "x\x01"};
        std::string out;
        for (std::int64_t n = range(0, 4); n > 0; --n) out += pick(pieces);
        return out;
    }

    std::string key() {
        static const std::vector<std::string> keys{"a", "b", "c", "rm-0", "rm-1", "type", "0", "1", "k\"q"};
        return pick(keys);
    }

    Value scalar() {
        switch (range(0, 2)) {
        case 0: return Value::string(text());
        case 1: return Value::integer(coin(0.2) ? static_cast<std::int64_t>(next()) : range(-5, 5));
        default: return Value::boolean(coin());
        }
    }

    /// Any value kind, nested up to `depth`.
    Value value(int depth = 3) {
        if (depth <= 0) return scalar();
        switch (range(0, 6)) {
        case 0:
        case 1: return scalar();
        case 2: return Value::set(list(depth));
        case 3: {
            std::vector<Value::BagEntry> entries;
            for (std::int64_t n = range(0, 3); n > 0; --n) entries.emplace_back(value(depth - 1), range(1, 3));
            return Value::bag(std::move(entries));
        }
        case 4: return Value::seq(list(depth));
        default: {
            Value::Fields f;
            for (std::int64_t n = range(0, 3); n > 0; --n) f.insert_or_assign(key(), value(depth - 1));
            return Value::record(std::move(f));
        }
        }
    }

    /// Only the kinds a JSON document can express without a shape hint.
    Value json_native(int depth = 3) {
        if (depth <= 0 || coin(0.4)) return scalar();
        if (coin()) {
            std::vector<Value> elems;
            for (std::int64_t n = range(0, 3); n > 0; --n) elems.push_back(json_native(depth - 1));
            return Value::seq(std::move(elems));
        }
        Value::Fields f;
        for (std::int64_t n = range(0, 3); n > 0; --n) f.insert_or_assign(key(), json_native(depth - 1));
        return Value::record(std::move(f));
    }

    std::vector<Value> list(int depth) {
        std::vector<Value> out;
        for (std::int64_t n = range(0, 3); n > 0; --n) out.push_back(value(depth - 1));
        return out;
    }

private:
    std::mt19937_64 rng_;
};

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        const char* base = std::getenv("TRACECHECK_TMP");
        std::filesystem::path root = base && *base ? base : std::filesystem::temp_directory_path();
        static std::uint64_t counter = 0;
        path_ = root / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline tracecheck::Trace truncated(const tracecheck::Trace& t, std::size_t n) {
    tracecheck::Trace out;
    for (std::size_t i = 0; i < t.size() && i < n; ++i) out.entries.push_back(t[i]);
    return out;
}

/// Deletes, duplicates or renames the event of one entry.
inline tracecheck::Trace mutate(const tracecheck::Trace& t, Gen& gen) {
    tracecheck::Trace out = t;
    out.origins.clear();
    if (out.empty()) return out;
    auto i = static_cast<std::size_t>(gen.range(0, static_cast<std::int64_t>(out.size()) - 1));
    switch (gen.range(0, 2)) {
    case 0: out.entries.erase(out.entries.begin() + static_cast<std::ptrdiff_t>(i)); break;
    case 1: {
        tracecheck::TraceEntry copy = out.entries[i];
        out.entries.insert(out.entries.begin() + static_cast<std::ptrdiff_t>(i), std::move(copy));
        break;
    }
    default: {
        static const std::vector<std::string> names{"RMPrepare",     "RMRcvCommitMsg", "RMRcvAbortMsg", "TMRcvPrepared",
                                                    "TMCommit",      "TMAbort",        "Bogus"};
        out.entries[i].event = gen.pick(names);
        break;
    }
    }
    return out;
}

}  // namespace testkit
