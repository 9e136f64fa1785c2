#pragma once

#include <cstdint>
#include <vector>

#include "wam/sim/types.hpp"

namespace wam::sim {

/// One dynamics step: translate-then-clamp, binarize the gripper command,
/// attach on a close transition within the grasp radius, release on open.
/// Degenerate inputs are clamped, never rejected.
SimState step(const SimState& state, const Action& action);

/// Deterministic rasterization of (state, scenario): background palette,
/// zone tints, seeded distractor blobs, then anti-aliased object stamps and
/// the effector marker painted opaquely (stamp pixels never mix with the
/// background, so they are background-invariant).
Observation render(const SimState& state, const ScenarioConfig& scenario);

/// Pixels any stamp touches for this state; used by render tests.
std::vector<bool> stamp_coverage(const SimState& state);

struct ExpertAction {
    Action action;
    bool done = false;
};

/// Deterministic demonstrator: per stage, approach (open) -> close within the
/// grasp radius -> carry to the zone -> release near the zone center. Slows
/// down near grasp/release points so event timing is forgiving.
ExpertAction scripted_expert(const SimState& state, const TaskSpec& task);

ScenarioConfig make_scenario(ScenarioKind kind, std::uint64_t seed);

/// Initial state for an episode: objects sampled inside the scenario's spawn
/// box with separation margins, codes drawn from the scenario's allowed sets,
/// effector started inside the training box, gripper open.
SimState spawn_state(const ScenarioConfig& scenario, const TaskSpec& task,
                     std::uint64_t episode_seed);

/// Stage k is true iff its object ends inside its zone with the gripper
/// released and every prior stage is true.
std::vector<bool> check_stage_success(const std::vector<SimState>& trajectory,
                                      const TaskSpec& task);

/// Whether the effector ever came within `radius` of stage k's object.
bool transit_reached(const std::vector<SimState>& trajectory, const TaskSpec& task,
                     std::size_t stage, double radius);

/// True between steps 'prior stages complete'; used by the expert and the
/// gate labeler. Returns stage count when all stages are done.
std::size_t current_stage(const SimState& state, const TaskSpec& task);

bool stage_done(const SimState& state, const TaskSpec& task, std::size_t stage);

/// Invariant check used by fuzz tests: held/gripper coupling and bounds.
bool state_valid(const SimState& state);

} // namespace wam::sim
