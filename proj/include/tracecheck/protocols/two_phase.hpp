#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tracecheck/protocols/sim.hpp"
#include "tracecheck/spec.hpp"

namespace tracecheck::twophase {

/// "rm-0" .. "rm-(k-1)".
std::vector<std::string> rm_names(std::size_t k);

/// Two-Phase Commit with TM-driven abort: variables rmState, tmState,
/// tmPrepared, msgs; actions RMPrepare(r), RMRcvCommitMsg(r),
/// RMRcvAbortMsg(r), TMRcvPrepared(r), TMCommit, TMAbort; invariants TypeOK
/// and Consistent. Throws InvalidSpec for an empty or duplicated RM list.
Spec build_spec(const std::vector<std::string>& rm_names);

enum class Bug { None, CounterTM };

struct Config {
    std::vector<std::string> rm_names = {"rm-0", "rm-1"};
    /// RM retransmits Prepared when no decision arrives within this time.
    std::int64_t receive_timeout = 50;
    DelayRange message_delay{1, 10};
    double message_loss = 0.0;
    /// Time an RM spends working before it prepares.
    DelayRange work_time{1, 20};
    /// TM aborts when some RM has not prepared by this time.
    std::int64_t abort_deadline = 1000;
    std::uint64_t seed = 1;
    Bug bug = Bug::None;
    RecordLevel record_level = RecordLevel::VEA;
    /// rm-0 prepares at once with a short timeout while the other RMs work
    /// long, so its Prepared message reaches the TM repeatedly.
    bool force_resend = false;
    /// Log retransmissions as event-free entries; otherwise skip them.
    bool log_resends = true;
    /// Simulated time after which an unfinished run raises SimDeadlock.
    std::int64_t time_limit = 1'000'000;
};

/// Throws Usage for invalid configurations.
void check_config(const Config& cfg);

/// Simulates one TM and one task per RM over a seeded network, each with a
/// tracer on its own file (tm.ndjson, rm-<i>.ndjson) in `out_dir`, then
/// writes the merged trace.ndjson and manifest.json.
RunResult run(const Config& cfg, const std::string& out_dir);

}  // namespace tracecheck::twophase
