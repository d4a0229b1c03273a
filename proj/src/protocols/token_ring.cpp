#include "tracecheck/protocols/token_ring.hpp"

#include <memory>

#include "tracecheck/errors.hpp"

namespace tracecheck::tokenring {

namespace {

std::string key(std::int64_t i) { return std::to_string(i); }

Value with_flag(const Value& active, std::int64_t i, bool on) {
    Value::Fields f = active.fields();
    f.insert_or_assign(key(i), Value::boolean(on));
    return Value::record(std::move(f));
}

Value bag_adjust(const Value& bag, const Value& element, std::int64_t delta) {
    std::vector<Value::BagEntry> entries(bag.bag_entries().begin(), bag.bag_entries().end());
    for (auto& [e, n] : entries)
        if (e == element) {
            n += delta;
            return Value::bag(std::move(entries));
        }
    entries.emplace_back(element, delta);
    return Value::bag(std::move(entries));
}

bool is_active(const SpecState& s, const Value& node) { return s.get("active").at(key(node.as_int())).as_bool(); }

}  // namespace

std::map<std::string, std::vector<std::string>> detect_and_init_composition() {
    return {{kDetectAndInit, {"DetectTermination", "InitiateProbe"}}};
}

Spec build_spec(std::size_t n) {
    if (n < 2) throw Error(ErrorKind::InvalidSpec, "a token ring needs at least two nodes");
    const auto last = static_cast<std::int64_t>(n) - 1;
    std::vector<Value> nodes;
    Value::Fields all_active;
    for (std::int64_t i = 0; i <= last; ++i) {
        nodes.push_back(Value::integer(i));
        all_active.emplace(key(i), Value::boolean(true));
    }
    const std::vector<Param> per_node{{"i", nodes}};

    std::vector<ActionSchema> actions;

    actions.push_back({"Deactivate", per_node,
                       {{"active[i]", [](const SpecState& s, const Params& p) { return is_active(s, p[0]); }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{
                               s.with("active", with_flag(s.get("active"), p[0].as_int(), false))};
                       }});

    actions.push_back({"SendMsg", {{"i", nodes}, {"j", nodes}},
                       {{"active[i]", [](const SpecState& s, const Params& p) { return is_active(s, p[0]); }},
                        {"i # j", [](const SpecState&, const Params& p) { return p[0] != p[1]; }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{s.with("pending", bag_adjust(s.get("pending"), p[1], 1))};
                       }});

    actions.push_back({"RecvMsg", {{"j", nodes}},
                       {{"pending[j] > 0",
                         [](const SpecState& s, const Params& p) { return s.get("pending").count(p[0]) > 0; }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{
                               s.with("pending", bag_adjust(s.get("pending"), p[0], -1))
                                   .with("active", with_flag(s.get("active"), p[0].as_int(), true))};
                       }});

    actions.push_back({"PassToken", per_node,
                       {{"token = i", [](const SpecState& s, const Params& p) { return s.get("token") == p[0]; }},
                        {"i # 0", [](const SpecState&, const Params& p) { return p[0].as_int() != 0; }},
                        {"~active[i]", [](const SpecState& s, const Params& p) { return !is_active(s, p[0]); }},
                        {"~terminationDetected",
                         [](const SpecState& s, const Params&) { return !s.get("terminationDetected").as_bool(); }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{s.with("token", Value::integer(p[0].as_int() - 1))};
                       }});

    actions.push_back({"InitiateProbe", {},
                       {{"token = 0", [](const SpecState& s, const Params&) { return s.get("token") == Value::integer(0); }}},
                       [last](const SpecState& s, const Params&) {
                           return std::vector<SpecState>{s.with("token", Value::integer(last))};
                       }});

    actions.push_back({"DetectTermination", {},
                       {{"token = 0", [](const SpecState& s, const Params&) { return s.get("token") == Value::integer(0); }},
                        {"~terminationDetected",
                         [](const SpecState& s, const Params&) { return !s.get("terminationDetected").as_bool(); }},
                        {"\\A i \\in Node : ~active[i]",
                         [](const SpecState& s, const Params&) {
                             for (const auto& [k, v] : s.get("active").fields())
                                 if (v.as_bool()) return false;
                             return true;
                         }},
                        {"pending = EmptyBag",
                         [](const SpecState& s, const Params&) { return s.get("pending").size() == 0; }}},
                       [](const SpecState& s, const Params&) {
                           return std::vector<SpecState>{s.with("terminationDetected", Value::boolean(true))};
                       }});

    std::vector<Invariant> invariants;
    invariants.push_back({"TerminationCorrect", [](const SpecState& s) {
                              if (!s.get("terminationDetected").as_bool()) return true;
                              for (const auto& [k, v] : s.get("active").fields())
                                  if (v.as_bool()) return false;
                              return s.get("pending").size() == 0;
                          }});

    return Spec("tokenring:" + std::to_string(n), {"active", "token", "terminationDetected", "pending"},
                {{{"active", Value::record(all_active)},
                  {"token", Value::integer(0)},
                  {"terminationDetected", Value::boolean(false)},
                  {"pending", Value::empty_bag()}}},
                std::move(actions), std::move(invariants));
}

void check_config(const Config& cfg) {
    if (cfg.n < 2) throw Error(ErrorKind::Usage, "a token ring needs at least two nodes");
    if (cfg.message_delay.min < 0 || cfg.message_delay.max < cfg.message_delay.min)
        throw Error(ErrorKind::Usage, "invalid message delay range");
    if (cfg.work_time.min < 1 || cfg.work_time.max < cfg.work_time.min)
        throw Error(ErrorKind::Usage, "invalid work time range");
}

namespace {

// Termination detection after Dijkstra's EWD998: nodes count sent minus
// received messages and turn black on receipt; the token sums the counters
// and carries the colour back to the initiator.
class Simulation {
public:
    Simulation(const Config& cfg, const std::string& out_dir)
        : cfg_(cfg), sched_(cfg.time_limit), rng_(cfg.seed), net_(sched_, rng_, cfg.message_delay, 0.0) {
        const Clock clock = Clock::in_memory();
        for (std::size_t i = 0; i < cfg.n; ++i) {
            const std::string file = "node-" + std::to_string(i) + ".ndjson";
            files_.push_back(file);
            nodes_.push_back(std::make_unique<Node>(Node{static_cast<std::int64_t>(i),
                                                         Recorder(Tracer::get_tracer(out_dir + "/" + file, clock),
                                                                  cfg.record_level, i == 0)}));
            nodes_.back()->budget = cfg.messages_per_node;
        }
        nodes_[0]->has_token = true;
    }

    const std::vector<std::string>& files() const { return files_; }
    const SimNetwork& network() const { return net_; }
    std::int64_t now() const { return sched_.now(); }

    void run() {
        for (auto& node : nodes_) {
            net_.attach(key(node->id), [this, n = node.get()](const Message& m) { receive(*n, m); });
            schedule_work(*node);
        }
        sched_.run();
        if (!detected_) throw Error(ErrorKind::SimDeadlock, "the ring never detected termination");
    }

private:
    struct Token {
        std::int64_t q = 0;
        bool black = false;
        bool returned = false;
    };
    struct Node {
        std::int64_t id;
        Recorder rec;
        bool active = true;
        bool black = false;
        std::int64_t counter = 0;
        std::size_t budget = 0;
        bool has_token = false;
        Token token;
        bool sent_first = false;
    };

    std::int64_t last() const { return static_cast<std::int64_t>(cfg_.n) - 1; }

    void schedule_work(Node& node) {
        sched_.after(rng_.uniform(cfg_.work_time), [this, &node] { work(node); });
    }

    void work(Node& node) {
        if (!node.active) return;
        const bool self_send = cfg_.bug == Bug::SelfMessage && node.id == 1 && !node.sent_first;
        if (node.budget > 0 && (rng_.chance(0.5) || self_send)) {
            std::int64_t to = rng_.uniform(0, last() - 1);
            if (to >= node.id) ++to;
            if (self_send) to = node.id;
            node.sent_first = true;
            --node.budget;
            ++node.counter;
            node.rec.change("pending", {}, "AddToBag", Value::integer(to));
            node.rec.log("SendMsg", {Value::integer(node.id), Value::integer(to)});
            net_.send({key(node.id), key(to), "Msg"});
            schedule_work(node);
            return;
        }
        node.active = false;
        node.rec.change("active", {key(node.id)}, "Update", Value::boolean(false));
        node.rec.log("Deactivate", {Value::integer(node.id)});
        forward_token(node);
    }

    void receive(Node& node, const Message& m) {
        if (m.type == "Msg") {
            --node.counter;
            node.black = true;
            node.rec.change("pending", {}, "RemoveFromBag", Value::integer(node.id));
            node.rec.change("active", {key(node.id)}, "Update", Value::boolean(true));
            node.rec.log("RecvMsg", {Value::integer(node.id)});
            if (!node.active) {
                node.active = true;
                schedule_work(node);
            }
            return;
        }
        if (m.type == "TokenDup") return;
        if (m.type == "Terminated") {
            if (cfg_.bug == Bug::EternalToken && node.id != 0) pass(node, "Terminated");
            return;
        }
        node.has_token = true;
        node.token = Token{m.number, m.flag_a, node.id == 0};
        forward_token(node);
    }

    void forward_token(Node& node) {
        if (!node.has_token || node.active) return;
        if (node.id != 0) {
            node.token.q += node.counter;
            node.token.black = node.token.black || node.black;
            node.black = false;
            pass(node, "Token");
            return;
        }
        const Token& t = node.token;
        const bool clean = t.returned && !t.black && !node.black && node.counter + t.q == 0;
        node.has_token = false;
        if (clean) {
            detected_ = true;
            node.rec.change("terminationDetected", {}, "Update", Value::boolean(true));
            node.rec.change("token", {}, "Update", Value::integer(last()));
            node.rec.log(kDetectAndInit);
            net_.send({key(0), key(last()), "Terminated"});
            return;
        }
        node.black = false;
        node.token = Token{};
        node.rec.change("token", {}, "Update", Value::integer(last()));
        node.rec.log("InitiateProbe");
        net_.send({key(0), key(last()), "Token", 0, false});
    }

    void pass(Node& node, const std::string& type) {
        node.has_token = false;
        const std::int64_t to = node.id - 1;
        node.rec.change("token", {}, "Update", Value::integer(to));
        node.rec.log("PassToken", {Value::integer(node.id)});
        net_.send({key(node.id), key(to), type, node.token.q, node.token.black});
        if (cfg_.token_resend && node.id == 1 && type == "Token") {
            node.rec.change("token", {}, "Update", Value::integer(to));
            node.rec.log(std::nullopt);
            net_.send({key(node.id), key(to), "TokenDup"});
        }
    }

    const Config& cfg_;
    Scheduler sched_;
    Rng rng_;
    SimNetwork net_;
    std::vector<std::string> files_;
    std::vector<std::unique_ptr<Node>> nodes_;
    bool detected_ = false;
};

std::string_view bug_name(Bug b) {
    switch (b) {
    case Bug::None: return "none";
    case Bug::SelfMessage: return "self-message";
    case Bug::EternalToken: return "eternal-token";
    }
    return "?";
}

}  // namespace

RunResult run(const Config& cfg, const std::string& out_dir) {
    check_config(cfg);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < cfg.n; ++i) files.push_back("node-" + std::to_string(i) + ".ndjson");
    prepare_out_dir(out_dir, files);

    Simulation sim(cfg, out_dir);
    sim.run();

    nlohmann::json manifest{{"protocol", "tokenring"},
                            {"seed", cfg.seed},
                            {"config",
                             {{"n", cfg.n},
                              {"record_level", to_string(cfg.record_level)},
                              {"bug", bug_name(cfg.bug)},
                              {"messages_per_node", cfg.messages_per_node},
                              {"work_time", {cfg.work_time.min, cfg.work_time.max}},
                              {"message_delay", {cfg.message_delay.min, cfg.message_delay.max}},
                              {"token_resend", cfg.token_resend}}},
                            {"sim_time", sim.now()},
                            {"messages", {{"sent", sim.network().sent()}, {"lost", sim.network().lost()}}}};
    return finish_run(out_dir, sim.files(), std::move(manifest));
}

}  // namespace tracecheck::tokenring
