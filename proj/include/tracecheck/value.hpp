#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace tracecheck {

/// Immutable structured value held by specification variables.
///
/// Copies share the underlying representation. Every value carries its
/// canonical serialization, computed once at construction; equality,
/// ordering and fingerprints are all derived from it, so two structurally
/// equal values compare equal no matter how they were built.
class Value {
public:
    // Declaration order is the variant-tag order used by the canonical
    // total order.
    enum class Kind : std::uint8_t { String, Int, Bool, Set, Bag, Seq, Record };

    using BagEntry = std::pair<Value, std::int64_t>;
    using Fields = std::map<std::string, Value>;

    static Value string(std::string text);
    static Value integer(std::int64_t n);
    static Value boolean(bool b);
    /// Duplicates (by structural equality) are collapsed.
    static Value set(std::vector<Value> elements);
    /// Entries with equal elements are summed; zero counts are dropped.
    /// Throws TypeError on a negative count, Overflow on a sum past int64.
    static Value bag(std::vector<BagEntry> entries);
    static Value seq(std::vector<Value> elements);
    static Value record(Fields fields);

    static Value empty_set() { return set({}); }
    static Value empty_bag() { return bag({}); }
    static Value empty_seq() { return seq({}); }

    Kind kind() const noexcept;
    bool is(Kind k) const noexcept { return kind() == k; }

    // Accessors throw TypeError when the variant does not match.
    const std::string& as_string() const;
    std::int64_t as_int() const;
    bool as_bool() const;
    /// Elements of a Set (canonical order) or of a Seq (sequence order).
    std::span<const Value> elements() const;
    std::span<const BagEntry> bag_entries() const;
    const Fields& fields() const;

    std::size_t size() const;
    bool contains(const Value& element) const;          // Set
    std::int64_t count(const Value& element) const;     // Bag
    const Value* field(std::string_view key) const;     // Record; nullptr when absent
    const Value& at(std::string_view key) const;        // Record; PathError when absent

    const std::string& canonical() const noexcept;
    std::uint64_t fingerprint() const noexcept;

    /// Human-oriented rendering in TLA+-like notation, e.g.
    /// [type |-> "Prepared", rm |-> "rm-0"].
    std::string to_string() const;

    friend bool operator==(const Value& a, const Value& b) noexcept;
    friend std::strong_ordering operator<=>(const Value& a, const Value& b) noexcept;

private:
    struct Rep;
    explicit Value(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}

    std::shared_ptr<const Rep> rep_;
};

std::string_view to_string(Value::Kind kind);

/// Path of record keys leading to a nested field. Empty addresses the
/// whole value.
using Path = std::vector<std::string>;

/// Update operators understood by apply_update and the tracer.
enum class UpdateOperator { Update, Init, Add, Remove, AddToBag, RemoveFromBag, Clear, Append };

/// Throws UnknownOp for names outside the supported set.
UpdateOperator parse_operator(std::string_view name);
std::string_view operator_name(UpdateOperator op);
bool is_known_operator(std::string_view name) noexcept;

/// Returns a copy of `base` with `op(args)` applied to the sub-value at
/// `path`. `base` is never modified.
///
/// Arguments coming from JSON traces cannot distinguish sets, bags and
/// sequences, so arguments are first conformed (see conform_to) to the
/// shape of the sub-value they replace or enter.
Value apply_update(const Value& base, const Path& path, std::string_view op,
                   std::span<const Value> args);
Value apply_update(const Value& base, const Path& path, UpdateOperator op,
                   std::span<const Value> args);

/// Reshapes `v` after `like`: a Seq becomes a Set or a Bag (the latter from
/// [element, count] pairs) when `like` is one, and the conversion recurses
/// into elements and record fields. Elements are matched positionally when
/// the sizes agree and against the first element of `like` otherwise.
/// Values that cannot be reshaped are returned unchanged.
Value conform_to(const Value& v, const Value& like);

/// One recorded mutation of a variable: `op(args)` applied at `path`.
struct UpdateOp {
    std::string op;
    Path path;
    std::vector<Value> args;

    friend bool operator==(const UpdateOp&, const UpdateOp&) = default;
};

/// Left-to-right fold of apply_update. Errors carry the index of the
/// failing update.
Value apply_entry_updates(const Value& base, std::span<const UpdateOp> updates);

nlohmann::json to_json(const Value& v);
/// Arrays decode to Seq unless a `like` value supplies the intended shape.
/// Throws ParseError on null, floating-point numbers and integers outside
/// the int64 range.
Value from_json(const nlohmann::json& j, const Value* like = nullptr);

std::string value_to_json(const Value& v);
Value json_to_value(std::string_view text, const Value* like = nullptr);

}  // namespace tracecheck

template <>
struct std::hash<tracecheck::Value> {
    std::size_t operator()(const tracecheck::Value& v) const noexcept {
        return static_cast<std::size_t>(v.fingerprint());
    }
};
