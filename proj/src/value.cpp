#include "tracecheck/value.hpp"

#include <algorithm>
#include <limits>
#include <variant>

#include "tracecheck/errors.hpp"

namespace tracecheck {

struct Value::Rep {
    Kind kind;
    std::variant<std::string, std::int64_t, bool, std::vector<Value>, std::vector<BagEntry>, Fields>
        payload;
    std::string canon;
    std::uint64_t fp = 0;
};

namespace {

// Escapes quotes, backslashes and control bytes; every other byte is kept
// verbatim so the encoding stays injective for arbitrary byte strings.
void append_quoted(std::string& out, std::string_view text) {
    static constexpr char hex[] = "0123456789abcdef";
    out.push_back('"');
    for (unsigned char c : text) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
            out.push_back(static_cast<char>(c));
        } else if (c < 0x20) {
            out += "\\u00";
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    out.push_back('"');
}

std::uint64_t digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // splitmix64 finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

[[noreturn]] void type_error(const std::string& what) { throw Error(ErrorKind::Type, what); }

bool value_less(const Value& a, const Value& b) { return (a <=> b) < 0; }

}  // namespace

std::string_view to_string(Value::Kind kind) {
    switch (kind) {
    case Value::Kind::String: return "String";
    case Value::Kind::Int: return "Int";
    case Value::Kind::Bool: return "Bool";
    case Value::Kind::Set: return "Set";
    case Value::Kind::Bag: return "Bag";
    case Value::Kind::Seq: return "Seq";
    case Value::Kind::Record: return "Record";
    }
    return "?";
}

Value Value::string(std::string text) {
    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::String;
    rep->canon = "s";
    append_quoted(rep->canon, text);
    rep->payload = std::move(text);
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value Value::integer(std::int64_t n) {
    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::Int;
    rep->canon = "i" + std::to_string(n);
    rep->payload = n;
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value Value::boolean(bool b) {
    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::Bool;
    rep->canon = b ? "bT" : "bF";
    rep->payload = b;
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value Value::set(std::vector<Value> elements) {
    std::sort(elements.begin(), elements.end(), value_less);
    elements.erase(std::unique(elements.begin(), elements.end()), elements.end());
    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::Set;
    rep->canon = "S[";
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (i) rep->canon.push_back(',');
        rep->canon += elements[i].canonical();
    }
    rep->canon.push_back(']');
    rep->payload = std::move(elements);
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value Value::bag(std::vector<BagEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const BagEntry& a, const BagEntry& b) { return value_less(a.first, b.first); });
    std::vector<BagEntry> merged;
    merged.reserve(entries.size());
    for (auto& [element, n] : entries) {
        if (n < 0) type_error("negative bag multiplicity for " + element.to_string());
        if (!merged.empty() && merged.back().first == element) {
            if (merged.back().second > std::numeric_limits<std::int64_t>::max() - n)
                throw Error(ErrorKind::Overflow, "bag multiplicity overflows int64");
            merged.back().second += n;
        } else {
            merged.emplace_back(std::move(element), n);
        }
    }
    std::erase_if(merged, [](const BagEntry& e) { return e.second == 0; });

    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::Bag;
    rep->canon = "B[";
    for (std::size_t i = 0; i < merged.size(); ++i) {
        if (i) rep->canon.push_back(',');
        rep->canon += merged[i].first.canonical();
        rep->canon.push_back('#');
        rep->canon += std::to_string(merged[i].second);
    }
    rep->canon.push_back(']');
    rep->payload = std::move(merged);
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value Value::seq(std::vector<Value> elements) {
    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::Seq;
    rep->canon = "Q[";
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (i) rep->canon.push_back(',');
        rep->canon += elements[i].canonical();
    }
    rep->canon.push_back(']');
    rep->payload = std::move(elements);
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value Value::record(Fields fields) {
    auto rep = std::make_shared<Rep>();
    rep->kind = Kind::Record;
    rep->canon = "R{";
    bool first = true;
    for (const auto& [key, value] : fields) {
        if (!first) rep->canon.push_back(',');
        first = false;
        append_quoted(rep->canon, key);
        rep->canon.push_back(':');
        rep->canon += value.canonical();
    }
    rep->canon.push_back('}');
    rep->payload = std::move(fields);
    rep->fp = digest(rep->canon);
    return Value(std::move(rep));
}

Value::Kind Value::kind() const noexcept { return rep_->kind; }

const std::string& Value::as_string() const {
    if (kind() != Kind::String) type_error("expected String, got " + to_string());
    return std::get<std::string>(rep_->payload);
}

std::int64_t Value::as_int() const {
    if (kind() != Kind::Int) type_error("expected Int, got " + to_string());
    return std::get<std::int64_t>(rep_->payload);
}

bool Value::as_bool() const {
    if (kind() != Kind::Bool) type_error("expected Bool, got " + to_string());
    return std::get<bool>(rep_->payload);
}

std::span<const Value> Value::elements() const {
    if (kind() != Kind::Set && kind() != Kind::Seq)
        type_error("expected Set or Seq, got " + to_string());
    return std::get<std::vector<Value>>(rep_->payload);
}

std::span<const Value::BagEntry> Value::bag_entries() const {
    if (kind() != Kind::Bag) type_error("expected Bag, got " + to_string());
    return std::get<std::vector<BagEntry>>(rep_->payload);
}

const Value::Fields& Value::fields() const {
    if (kind() != Kind::Record) type_error("expected Record, got " + to_string());
    return std::get<Fields>(rep_->payload);
}

std::size_t Value::size() const {
    switch (kind()) {
    case Kind::Set:
    case Kind::Seq: return elements().size();
    case Kind::Bag: return bag_entries().size();
    case Kind::Record: return fields().size();
    case Kind::String: return as_string().size();
    default: type_error("size() of " + std::string(tracecheck::to_string(kind())));
    }
}

bool Value::contains(const Value& element) const {
    if (kind() != Kind::Set) type_error("membership test on non-Set " + to_string());
    auto elems = elements();
    return std::binary_search(elems.begin(), elems.end(), element, value_less);
}

std::int64_t Value::count(const Value& element) const {
    auto entries = bag_entries();
    auto it = std::lower_bound(entries.begin(), entries.end(), element,
                               [](const BagEntry& e, const Value& v) { return value_less(e.first, v); });
    return (it != entries.end() && it->first == element) ? it->second : 0;
}

const Value* Value::field(std::string_view key) const {
    const auto& f = fields();
    auto it = f.find(std::string(key));
    return it == f.end() ? nullptr : &it->second;
}

const Value& Value::at(std::string_view key) const {
    if (const Value* v = field(key)) return *v;
    throw Error(ErrorKind::Path, "no field '" + std::string(key) + "' in " + to_string());
}

const std::string& Value::canonical() const noexcept { return rep_->canon; }

std::uint64_t Value::fingerprint() const noexcept { return rep_->fp; }

std::string Value::to_string() const {
    std::string out;
    switch (kind()) {
    case Kind::String: append_quoted(out, as_string()); break;
    case Kind::Int: out = std::to_string(as_int()); break;
    case Kind::Bool: out = as_bool() ? "TRUE" : "FALSE"; break;
    case Kind::Set:
    case Kind::Seq: {
        bool is_set = kind() == Kind::Set;
        out = is_set ? "{" : "<<";
        bool first = true;
        for (const auto& e : elements()) {
            if (!first) out += ", ";
            first = false;
            out += e.to_string();
        }
        out += is_set ? "}" : ">>";
        break;
    }
    case Kind::Bag: {
        out = "Bag(";
        bool first = true;
        for (const auto& [e, n] : bag_entries()) {
            if (!first) out += ", ";
            first = false;
            out += e.to_string() + " :> " + std::to_string(n);
        }
        out += ")";
        break;
    }
    case Kind::Record: {
        out = "[";
        bool first = true;
        for (const auto& [k, v] : fields()) {
            if (!first) out += ", ";
            first = false;
            out += k + " |-> " + v.to_string();
        }
        out += "]";
        break;
    }
    }
    return out;
}

bool operator==(const Value& a, const Value& b) noexcept {
    if (a.rep_ == b.rep_) return true;
    return a.rep_->fp == b.rep_->fp && a.rep_->canon == b.rep_->canon;
}

std::strong_ordering operator<=>(const Value& a, const Value& b) noexcept {
    if (a.rep_ == b.rep_) return std::strong_ordering::equal;
    if (auto c = a.kind() <=> b.kind(); c != 0) return c;
    int c = a.canonical().compare(b.canonical());
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
}

// ---------------------------------------------------------------------------
// Update operators

namespace {

constexpr std::pair<std::string_view, UpdateOperator> kOperators[] = {
    {"Update", UpdateOperator::Update},       {"Init", UpdateOperator::Init},
    {"Add", UpdateOperator::Add},             {"Remove", UpdateOperator::Remove},
    {"AddToBag", UpdateOperator::AddToBag},   {"RemoveFromBag", UpdateOperator::RemoveFromBag},
    {"Clear", UpdateOperator::Clear},         {"Append", UpdateOperator::Append},
};

std::size_t arity(UpdateOperator op) { return op == UpdateOperator::Clear ? 0 : 1; }

// Representative element used to conform an incoming element.
const Value* sample_element(const Value& collection) {
    if (collection.is(Value::Kind::Bag)) {
        auto entries = collection.bag_entries();
        return entries.empty() ? nullptr : &entries.front().first;
    }
    auto elems = collection.elements();
    return elems.empty() ? nullptr : &elems.front();
}

Value conformed_element(const Value& arg, const Value& collection) {
    const Value* like = sample_element(collection);
    return like ? conform_to(arg, *like) : arg;
}

void require_kind(const Value& v, Value::Kind k, UpdateOperator op) {
    if (!v.is(k))
        type_error(std::string(operator_name(op)) + " expects a " + std::string(to_string(k)) +
                   ", found " + v.to_string());
}

Value apply_here(const Value& target, UpdateOperator op, std::span<const Value> args) {
    switch (op) {
    case UpdateOperator::Update:
    case UpdateOperator::Init: return conform_to(args[0], target);
    case UpdateOperator::Add: {
        require_kind(target, Value::Kind::Set, op);
        Value elem = conformed_element(args[0], target);
        if (target.contains(elem)) return target;
        auto elems = target.elements();
        std::vector<Value> out(elems.begin(), elems.end());
        out.push_back(std::move(elem));
        return Value::set(std::move(out));
    }
    case UpdateOperator::Remove: {
        require_kind(target, Value::Kind::Set, op);
        Value elem = conformed_element(args[0], target);
        if (!target.contains(elem)) return target;
        std::vector<Value> out;
        for (const auto& e : target.elements())
            if (!(e == elem)) out.push_back(e);
        return Value::set(std::move(out));
    }
    case UpdateOperator::AddToBag: {
        require_kind(target, Value::Kind::Bag, op);
        auto entries = target.bag_entries();
        std::vector<Value::BagEntry> out(entries.begin(), entries.end());
        out.emplace_back(conformed_element(args[0], target), 1);
        return Value::bag(std::move(out));
    }
    case UpdateOperator::RemoveFromBag: {
        require_kind(target, Value::Kind::Bag, op);
        Value elem = conformed_element(args[0], target);
        if (target.count(elem) == 0)
            throw Error(ErrorKind::BagUnderflow,
                        "RemoveFromBag of " + elem.to_string() + " absent from " + target.to_string());
        std::vector<Value::BagEntry> out;
        for (const auto& [e, n] : target.bag_entries())
            out.emplace_back(e, e == elem ? n - 1 : n);
        return Value::bag(std::move(out));
    }
    case UpdateOperator::Clear:
        switch (target.kind()) {
        case Value::Kind::Set: return Value::empty_set();
        case Value::Kind::Bag: return Value::empty_bag();
        case Value::Kind::Seq: return Value::empty_seq();
        default: type_error("Clear expects a Set, Bag or Seq, found " + target.to_string());
        }
    case UpdateOperator::Append: {
        require_kind(target, Value::Kind::Seq, op);
        auto elems = target.elements();
        std::vector<Value> out(elems.begin(), elems.end());
        out.push_back(conformed_element(args[0], target));
        return Value::seq(std::move(out));
    }
    }
    throw Error(ErrorKind::UnknownOp, "unhandled operator");
}

Value apply_at(const Value& base, const Path& path, std::size_t depth, UpdateOperator op,
               std::span<const Value> args) {
    if (depth == path.size()) return apply_here(base, op, args);
    const std::string& key = path[depth];
    if (!base.is(Value::Kind::Record))
        throw Error(ErrorKind::Path, "cannot descend into " + base.to_string() + " with key '" + key + "'");
    const Value* child = base.field(key);
    if (!child)
        throw Error(ErrorKind::Path, "no field '" + key + "' in " + base.to_string());
    Value::Fields fields = base.fields();
    fields.insert_or_assign(key, apply_at(*child, path, depth + 1, op, args));
    return Value::record(std::move(fields));
}

}  // namespace

UpdateOperator parse_operator(std::string_view name) {
    for (const auto& [n, op] : kOperators)
        if (n == name) return op;
    throw Error(ErrorKind::UnknownOp, "unknown update operator '" + std::string(name) + "'");
}

std::string_view operator_name(UpdateOperator op) {
    for (const auto& [n, o] : kOperators)
        if (o == op) return n;
    return "?";
}

bool is_known_operator(std::string_view name) noexcept {
    return std::any_of(std::begin(kOperators), std::end(kOperators),
                       [&](const auto& entry) { return entry.first == name; });
}

Value apply_update(const Value& base, const Path& path, std::string_view op, std::span<const Value> args) {
    return apply_update(base, path, parse_operator(op), args);
}

Value apply_update(const Value& base, const Path& path, UpdateOperator op, std::span<const Value> args) {
    if (args.size() != arity(op))
        type_error(std::string(operator_name(op)) + " takes " + std::to_string(arity(op)) +
                   " argument(s), got " + std::to_string(args.size()));
    return apply_at(base, path, 0, op, args);
}

Value apply_entry_updates(const Value& base, std::span<const UpdateOp> updates) {
    Value current = base;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        try {
            current = apply_update(current, updates[i].path, updates[i].op, updates[i].args);
        } catch (Error& e) {
            e.with_index(i);
            throw;
        }
    }
    return current;
}

Value conform_to(const Value& v, const Value& like) {
    auto pick = [](std::span<const Value> hints, std::size_t n, std::size_t i) -> const Value* {
        if (hints.empty()) return nullptr;
        return hints.size() == n ? &hints[i] : &hints.front();
    };
    switch (like.kind()) {
    case Value::Kind::Set:
        if (v.is(Value::Kind::Seq) || v.is(Value::Kind::Set)) {
            auto elems = v.elements();
            auto hints = like.elements();
            std::vector<Value> out;
            out.reserve(elems.size());
            for (std::size_t i = 0; i < elems.size(); ++i) {
                const Value* h = pick(hints, elems.size(), i);
                out.push_back(h ? conform_to(elems[i], *h) : elems[i]);
            }
            return Value::set(std::move(out));
        }
        return v;
    case Value::Kind::Seq:
        if (v.is(Value::Kind::Seq)) {
            auto elems = v.elements();
            auto hints = like.elements();
            std::vector<Value> out;
            out.reserve(elems.size());
            for (std::size_t i = 0; i < elems.size(); ++i) {
                const Value* h = pick(hints, elems.size(), i);
                out.push_back(h ? conform_to(elems[i], *h) : elems[i]);
            }
            return Value::seq(std::move(out));
        }
        return v;
    case Value::Kind::Bag: {
        if (!v.is(Value::Kind::Seq)) return v;
        auto pairs = v.elements();
        auto hints = like.bag_entries();
        std::vector<Value::BagEntry> out;
        out.reserve(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const Value& p = pairs[i];
            if (!p.is(Value::Kind::Seq) || p.elements().size() != 2 ||
                !p.elements()[1].is(Value::Kind::Int) || p.elements()[1].as_int() <= 0)
                return v;
            const Value* h = hints.empty() ? nullptr
                                           : &(hints.size() == pairs.size() ? hints[i] : hints.front()).first;
            out.emplace_back(h ? conform_to(p.elements()[0], *h) : p.elements()[0], p.elements()[1].as_int());
        }
        return Value::bag(std::move(out));
    }
    case Value::Kind::Record: {
        if (!v.is(Value::Kind::Record)) return v;
        Value::Fields out;
        for (const auto& [k, child] : v.fields()) {
            const Value* h = like.field(k);
            out.emplace(k, h ? conform_to(child, *h) : child);
        }
        return Value::record(std::move(out));
    }
    default: return v;
    }
}

// ---------------------------------------------------------------------------
// JSON mapping

nlohmann::json to_json(const Value& v) {
    using nlohmann::json;
    switch (v.kind()) {
    case Value::Kind::String: return v.as_string();
    case Value::Kind::Int: return v.as_int();
    case Value::Kind::Bool: return v.as_bool();
    case Value::Kind::Set:
    case Value::Kind::Seq: {
        json arr = json::array();
        for (const auto& e : v.elements()) arr.push_back(to_json(e));
        return arr;
    }
    case Value::Kind::Bag: {
        json arr = json::array();
        for (const auto& [e, n] : v.bag_entries()) arr.push_back(json::array({to_json(e), n}));
        return arr;
    }
    case Value::Kind::Record: {
        json obj = json::object();
        for (const auto& [k, child] : v.fields()) obj[k] = to_json(child);
        return obj;
    }
    }
    return nullptr;
}

namespace {

Value decode(const nlohmann::json& j) {
    using nlohmann::json;
    switch (j.type()) {
    case json::value_t::string: return Value::string(j.get<std::string>());
    case json::value_t::boolean: return Value::boolean(j.get<bool>());
    case json::value_t::number_integer: return Value::integer(j.get<std::int64_t>());
    case json::value_t::number_unsigned: {
        auto u = j.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            throw Error(ErrorKind::Parse, "integer " + std::to_string(u) + " exceeds the int64 range");
        return Value::integer(static_cast<std::int64_t>(u));
    }
    case json::value_t::array: {
        std::vector<Value> out;
        out.reserve(j.size());
        for (const auto& e : j) out.push_back(decode(e));
        return Value::seq(std::move(out));
    }
    case json::value_t::object: {
        Value::Fields out;
        for (auto it = j.begin(); it != j.end(); ++it) out.emplace(it.key(), decode(it.value()));
        return Value::record(std::move(out));
    }
    case json::value_t::number_float:
        throw Error(ErrorKind::Parse, "floating-point numbers are not supported: " + j.dump());
    default: throw Error(ErrorKind::Parse, "unsupported JSON value: " + j.dump());
    }
}

}  // namespace

Value from_json(const nlohmann::json& j, const Value* like) {
    Value v = decode(j);
    return like ? conform_to(v, *like) : v;
}

std::string value_to_json(const Value& v) {
    try {
        return to_json(v).dump();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Type, std::string("value is not JSON-encodable: ") + e.what());
    }
}

Value json_to_value(std::string_view text, const Value* like) {
    auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::Parse, "malformed JSON");
    return from_json(j, like);
}

}  // namespace tracecheck
