#include "tracecheck/protocols/two_phase.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include "tracecheck/errors.hpp"

namespace tracecheck::twophase {

namespace {

Value str(const std::string& s) { return Value::string(s); }

Value prepared_msg(const std::string& rm) {
    return Value::record({{"type", str("Prepared")}, {"rm", str(rm)}});
}

Value decision_msg(const std::string& type) { return Value::record({{"type", str(type)}}); }

Value with_added(const Value& set, Value element) {
    std::vector<Value> elems(set.elements().begin(), set.elements().end());
    elems.push_back(std::move(element));
    return Value::set(std::move(elems));
}

Value with_field(const Value& record, const std::string& key, Value v) {
    Value::Fields f = record.fields();
    f.insert_or_assign(key, std::move(v));
    return Value::record(std::move(f));
}

const std::string& rm_of(const Params& p) { return p[0].as_string(); }

}  // namespace

std::vector<std::string> rm_names(std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back("rm-" + std::to_string(i));
    return out;
}

Spec build_spec(const std::vector<std::string>& rms) {
    if (rms.empty()) throw Error(ErrorKind::InvalidSpec, "two-phase commit needs at least one RM");
    std::set<std::string> distinct(rms.begin(), rms.end());
    if (distinct.size() != rms.size()) throw Error(ErrorKind::InvalidSpec, "RM names must be distinct");

    std::vector<Value> rm_values;
    Value::Fields working;
    for (const auto& r : rms) {
        rm_values.push_back(str(r));
        working.emplace(r, str("working"));
    }
    const Value all_rms = Value::set(rm_values);
    const std::vector<Param> per_rm{{"r", rm_values}};

    std::vector<ActionSchema> actions;

    actions.push_back({"RMPrepare", per_rm,
                       {{"rmState[r] = \"working\"",
                         [](const SpecState& s, const Params& p) {
                             return s.get("rmState").at(rm_of(p)) == str("working");
                         }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{
                               s.with("rmState", with_field(s.get("rmState"), rm_of(p), str("prepared")))
                                   .with("msgs", with_added(s.get("msgs"), prepared_msg(rm_of(p))))};
                       }});

    actions.push_back({"RMRcvCommitMsg", per_rm,
                       {{"[type |-> \"Commit\"] \\in msgs",
                         [](const SpecState& s, const Params&) { return s.get("msgs").contains(decision_msg("Commit")); }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{
                               s.with("rmState", with_field(s.get("rmState"), rm_of(p), str("committed")))};
                       }});

    actions.push_back({"RMRcvAbortMsg", per_rm,
                       {{"[type |-> \"Abort\"] \\in msgs",
                         [](const SpecState& s, const Params&) { return s.get("msgs").contains(decision_msg("Abort")); }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{
                               s.with("rmState", with_field(s.get("rmState"), rm_of(p), str("aborted")))};
                       }});

    actions.push_back({"TMRcvPrepared", per_rm,
                       {{"tmState = \"init\"",
                         [](const SpecState& s, const Params&) { return s.get("tmState") == str("init"); }},
                        {"[type |-> \"Prepared\", rm |-> r] \\in msgs",
                         [](const SpecState& s, const Params& p) {
                             return s.get("msgs").contains(prepared_msg(rm_of(p)));
                         }}},
                       [](const SpecState& s, const Params& p) {
                           return std::vector<SpecState>{s.with("tmPrepared", with_added(s.get("tmPrepared"), p[0]))};
                       }});

    actions.push_back({"TMCommit", {},
                       {{"tmState = \"init\"",
                         [](const SpecState& s, const Params&) { return s.get("tmState") == str("init"); }},
                        {"tmPrepared = RM",
                         [all_rms](const SpecState& s, const Params&) { return s.get("tmPrepared") == all_rms; }}},
                       [](const SpecState& s, const Params&) {
                           return std::vector<SpecState>{
                               s.with("tmState", str("done")).with("msgs", with_added(s.get("msgs"), decision_msg("Commit")))};
                       }});

    actions.push_back({"TMAbort", {},
                       {{"tmState = \"init\"",
                         [](const SpecState& s, const Params&) { return s.get("tmState") == str("init"); }}},
                       [](const SpecState& s, const Params&) {
                           return std::vector<SpecState>{
                               s.with("tmState", str("done")).with("msgs", with_added(s.get("msgs"), decision_msg("Abort")))};
                       }});

    std::vector<Invariant> invariants;
    invariants.push_back({"TypeOK", [rms](const SpecState& s) {
                              const Value& rm_state = s.get("rmState");
                              if (!rm_state.is(Value::Kind::Record) || rm_state.size() != rms.size()) return false;
                              static const std::set<std::string> allowed{"working", "prepared", "committed", "aborted"};
                              for (const auto& r : rms) {
                                  const Value* v = rm_state.field(r);
                                  if (!v || !v->is(Value::Kind::String) || !allowed.count(v->as_string())) return false;
                              }
                              return true;
                          }});
    invariants.push_back({"Consistent", [](const SpecState& s) {
                              bool aborted = false, committed = false;
                              for (const auto& [r, v] : s.get("rmState").fields()) {
                                  aborted |= v == str("aborted");
                                  committed |= v == str("committed");
                              }
                              return !(aborted && committed);
                          }});

    return Spec("twophase:" + std::to_string(rms.size()), {"rmState", "tmState", "tmPrepared", "msgs"},
                {{{"rmState", Value::record(working)},
                  {"tmState", str("init")},
                  {"tmPrepared", Value::empty_set()},
                  {"msgs", Value::empty_set()}}},
                std::move(actions), std::move(invariants));
}

void check_config(const Config& cfg) {
    if (cfg.rm_names.empty()) throw Error(ErrorKind::Usage, "at least one RM is required");
    std::set<std::string> distinct(cfg.rm_names.begin(), cfg.rm_names.end());
    if (distinct.size() != cfg.rm_names.size()) throw Error(ErrorKind::Usage, "RM names must be distinct");
    if (distinct.count("tm")) throw Error(ErrorKind::Usage, "'tm' is reserved for the transaction manager");
    if (!(cfg.message_loss >= 0.0 && cfg.message_loss <= 1.0))
        throw Error(ErrorKind::Usage, "message loss must lie in [0, 1]");
    if (cfg.message_loss >= 1.0) throw Error(ErrorKind::Usage, "a network that loses every message cannot make progress");
    if (cfg.message_delay.min < 0 || cfg.message_delay.max < cfg.message_delay.min)
        throw Error(ErrorKind::Usage, "invalid message delay range");
    if (cfg.work_time.min < 0 || cfg.work_time.max < cfg.work_time.min)
        throw Error(ErrorKind::Usage, "invalid work time range");
    if (cfg.receive_timeout <= 0) throw Error(ErrorKind::Usage, "receive timeout must be positive");
}

namespace {

class Simulation {
public:
    Simulation(const Config& cfg, const std::string& out_dir)
        : cfg_(cfg), sched_(cfg.time_limit), rng_(cfg.seed),
          net_(sched_, rng_, cfg.message_delay, cfg.message_loss) {
        const Clock clock = Clock::in_memory();
        auto open = [&](const std::string& file, bool coordinator) {
            files_.push_back(file);
            return Recorder(Tracer::get_tracer(out_dir + "/" + file, clock), cfg.record_level, coordinator);
        };
        tm_ = std::make_unique<Tm>(Tm{open("tm.ndjson", true)});
        for (std::size_t i = 0; i < cfg.rm_names.size(); ++i)
            rms_.push_back(std::make_unique<Rm>(Rm{cfg.rm_names[i], open("rm-" + std::to_string(i) + ".ndjson", false)}));
    }

    const std::vector<std::string>& files() const { return files_; }
    const SimNetwork& network() const { return net_; }
    std::int64_t now() const { return sched_.now(); }

    void run() {
        net_.attach("tm", [this](const Message& m) { tm_receive(m); });
        for (auto& rm : rms_) net_.attach(rm->name, [this, r = rm.get()](const Message& m) { rm_receive(*r, m); });

        std::int64_t deadline = cfg_.abort_deadline;
        for (std::size_t i = 0; i < rms_.size(); ++i) {
            Rm& rm = *rms_[i];
            std::int64_t work = rng_.uniform(cfg_.work_time);
            rm.timeout = cfg_.receive_timeout;
            if (cfg_.force_resend) {
                // rm-0 prepares first and retransmits often enough for the TM
                // to see its Prepared once per RM before anyone else prepares.
                const std::int64_t short_timeout = 2 * cfg_.message_delay.max + 1;
                const std::int64_t long_work =
                    cfg_.work_time.min + static_cast<std::int64_t>(rms_.size() + 2) * (short_timeout + cfg_.message_delay.max);
                if (i == 0) {
                    work = cfg_.work_time.min;
                    rm.timeout = short_timeout;
                } else {
                    work = long_work + static_cast<std::int64_t>(i);
                }
                deadline = std::max(deadline, long_work + static_cast<std::int64_t>(rms_.size()) + 4 * cfg_.message_delay.max);
            }
            sched_.at(work, [this, &rm] { rm_finish_work(rm); });
        }
        sched_.at(deadline, [this] { tm_deadline(); });
        sched_.run();

        for (const auto& rm : rms_)
            if (rm->state == "working" || rm->state == "prepared")
                throw Error(ErrorKind::SimDeadlock, rm->name + " never learned the outcome");
    }

private:
    struct Rm {
        std::string name;
        Recorder rec;
        std::string state = "working";
        std::int64_t timeout = 0;
        std::uint64_t timer_generation = 0;
    };
    struct Tm {
        Recorder rec;
        std::string state = "init";
        std::set<std::string> prepared;
        std::size_t prepared_count = 0;
        std::string decision;
    };

    void rm_finish_work(Rm& rm) {
        if (rm.state != "working") return;
        rm.state = "prepared";
        rm.rec.change("rmState", {rm.name}, "Update", str("prepared"));
        rm.rec.change("msgs", {}, "Add", prepared_msg(rm.name));
        rm.rec.log("RMPrepare", {str(rm.name)});
        net_.send({rm.name, "tm", "Prepared"});
        arm_timer(rm);
    }

    void arm_timer(Rm& rm) {
        const std::uint64_t generation = ++rm.timer_generation;
        sched_.after(rm.timeout, [this, &rm, generation] {
            if (generation != rm.timer_generation || rm.state != "prepared") return;
            if (cfg_.log_resends) {
                rm.rec.change("msgs", {}, "Add", prepared_msg(rm.name));
                rm.rec.log(std::nullopt);
            }
            net_.send({rm.name, "tm", "Prepared"});
            arm_timer(rm);
        });
    }

    void rm_receive(Rm& rm, const Message& m) {
        if (rm.state == "committed" || rm.state == "aborted") return;
        if (m.type == "Commit") {
            rm.state = "committed";
            rm.rec.change("rmState", {rm.name}, "Update", str("committed"));
            rm.rec.log("RMRcvCommitMsg", {str(rm.name)});
        } else if (m.type == "Abort") {
            rm.state = "aborted";
            rm.rec.change("rmState", {rm.name}, "Update", str("aborted"));
            rm.rec.log("RMRcvAbortMsg", {str(rm.name)});
        }
        ++rm.timer_generation;
    }

    void tm_receive(const Message& m) {
        if (m.type != "Prepared") return;
        Tm& tm = *tm_;
        if (tm.state != "init") {
            // Decided already: the RM missed the outcome.
            if (cfg_.log_resends) {
                tm.rec.change("msgs", {}, "Add", decision_msg(tm.decision));
                tm.rec.log(std::nullopt);
            }
            net_.send({"tm", m.from, tm.decision});
            return;
        }
        if (cfg_.bug == Bug::CounterTM) {
            ++tm.prepared_count;
            tm.prepared.insert(m.from);
        } else {
            if (!tm.prepared.insert(m.from).second) return;
            tm.prepared_count = tm.prepared.size();
        }
        tm.rec.change("tmPrepared", {}, "Add", str(m.from));
        tm.rec.log("TMRcvPrepared", {str(m.from)});
        if (tm.prepared_count == rms_.size()) decide("Commit");
    }

    void tm_deadline() {
        if (tm_->state == "init") decide("Abort");
    }

    void decide(const std::string& decision) {
        Tm& tm = *tm_;
        tm.state = "done";
        tm.decision = decision;
        tm.rec.change("tmState", {}, "Update", str("done"));
        tm.rec.change("msgs", {}, "Add", decision_msg(decision));
        tm.rec.log(decision == "Commit" ? "TMCommit" : "TMAbort");
        for (const auto& rm : rms_) net_.send({"tm", rm->name, decision});
    }

    const Config& cfg_;
    Scheduler sched_;
    Rng rng_;
    SimNetwork net_;
    std::vector<std::string> files_;
    std::unique_ptr<Tm> tm_;
    std::vector<std::unique_ptr<Rm>> rms_;
};

std::string_view bug_name(Bug b) { return b == Bug::CounterTM ? "counter" : "none"; }

}  // namespace

RunResult run(const Config& cfg, const std::string& out_dir) {
    check_config(cfg);
    std::vector<std::string> files{"tm.ndjson"};
    for (std::size_t i = 0; i < cfg.rm_names.size(); ++i) files.push_back("rm-" + std::to_string(i) + ".ndjson");
    prepare_out_dir(out_dir, files);

    Simulation sim(cfg, out_dir);
    sim.run();

    nlohmann::json manifest{
        {"protocol", "twophase"},
        {"seed", cfg.seed},
        {"config",
         {{"rm_names", cfg.rm_names},
          {"receive_timeout", cfg.receive_timeout},
          {"message_delay", {cfg.message_delay.min, cfg.message_delay.max}},
          {"message_loss", cfg.message_loss},
          {"work_time", {cfg.work_time.min, cfg.work_time.max}},
          {"abort_deadline", cfg.abort_deadline},
          {"bug", bug_name(cfg.bug)},
          {"record_level", to_string(cfg.record_level)},
          {"force_resend", cfg.force_resend},
          {"log_resends", cfg.log_resends}}},
        {"sim_time", sim.now()},
        {"messages", {{"sent", sim.network().sent()}, {"lost", sim.network().lost()}}}};
    return finish_run(out_dir, sim.files(), std::move(manifest));
}

}  // namespace tracecheck::twophase
