#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wam/experts/experts.hpp"
#include "wam/harness/config.hpp"
#include "wam/sim/types.hpp"
#include "wam/wm/world_model.hpp"

namespace wam::harness {

enum class PolicyKind {
    Harmowam,
    ImagineThenExecute,
    JointModeling,
    GateAveraging,
    KeyframeAveraging,
    HarmowamNoLatentsReactive,
    HarmowamNoLatentsPredictive,
};

std::string policy_name(PolicyKind k);
PolicyKind parse_policy(const std::string& s);

struct System {
    wm::WorldModel world;
    experts::ExpertModels ex;
};

/// Loads wm.ckpt and experts.ckpt from the run directory; missing files are a
/// configuration error.
System load_system(const std::filesystem::path& dir, const Config& cfg);

/// One success-table cell. Each task stage k produces two rows: stage 2k is
/// the transit sub-goal (effector reached the stage object's vicinity,
/// gated on the previous stage), stage 2k+1 the interaction sub-goal (object
/// placed and released, sequentially gated).
struct EvalRow {
    std::string policy;
    std::string scenario;
    int task = 0;
    int stage = 0;
    int successes = 0;
    int episodes = 0;
};

struct RouteEntry {
    int episode = 0;
    int step = 0;     // sim step at the decision
    double score = 0.0;
    int expert = 0;   // 0 reactive, 1 predictive
};

struct PolicyTiming {
    int rollouts = 0;
    double rollout_seconds = 0.0;
    long long actions = 0;
    double wall_seconds = 0.0;
    int episodes = 0;
};

struct RunResult {
    std::vector<EvalRow> rows;
    PolicyTiming timing;
    std::vector<RouteEntry> routing; // gate decisions (gated policy kinds)
    int full_successes = 0;          // episodes with every stage complete
    int episodes = 0;
};

/// Closed-loop evaluation: per chunk boundary the policy composes a chunk
/// from the experts per its kind, executes it open-loop, re-observes, and
/// stops at completion or the step cap. Fully deterministic given
/// (config, seed).
RunResult run_policy(const System& sys, const Config& cfg, PolicyKind kind,
                     sim::ScenarioKind scenario, const sim::TaskSpec& task, int episodes,
                     std::uint64_t seed, int n_denoise);

} // namespace wam::harness
