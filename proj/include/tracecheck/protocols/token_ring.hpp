#pragma once

#include <cstdint>
#include <string>

#include "tracecheck/protocols/sim.hpp"
#include "tracecheck/spec.hpp"

namespace tracecheck::tokenring {

/// Termination detection on a ring of `n` nodes numbered 0..n-1, node 0
/// being the initiator. Variables: active (record "0".."n-1" -> Bool),
/// token (holder, Int), terminationDetected (Bool), pending (bag of
/// destination nodes of in-flight messages). Actions: Deactivate(i),
/// SendMsg(i, j), RecvMsg(j), PassToken(i), InitiateProbe,
/// DetectTermination. Throws InvalidSpec for n < 2.
Spec build_spec(std::size_t n);

/// The event the initiator logs when it detects termination and launches
/// the final round in one step.
inline constexpr const char* kDetectAndInit = "DetectAndInit";

/// Composition map that explains kDetectAndInit.
std::map<std::string, std::vector<std::string>> detect_and_init_composition();

enum class Bug { None, SelfMessage, EternalToken };

struct Config {
    std::size_t n = 3;
    std::uint64_t seed = 1;
    RecordLevel record_level = RecordLevel::VEA;
    Bug bug = Bug::None;
    /// Ordinary messages each node may send over the whole run.
    std::size_t messages_per_node = 2;
    DelayRange work_time{1, 20};
    DelayRange message_delay{1, 10};
    /// Node 1 sends every token it passes to the initiator twice and logs
    /// the second send as an event-free entry with unchanged values.
    bool token_resend = false;
    std::int64_t time_limit = 1'000'000;
};

/// Throws Usage for invalid configurations.
void check_config(const Config& cfg);

/// Writes node-<i>.ndjson per node plus trace.ndjson and manifest.json.
RunResult run(const Config& cfg, const std::string& out_dir);

}  // namespace tracecheck::tokenring
