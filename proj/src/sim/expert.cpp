#include <algorithm>
#include <cmath>

#include "wam/sim/sim.hpp"

namespace wam::sim {

namespace {

// Cruise below the action bound so episodes land in the hundred-step range
// and grasp/release approaches decelerate; event timing stays forgiving for
// policies that fire a step early or late.
constexpr double kTransitSpeed = 0.022;
constexpr double kSlowZone = 0.04;   // within this distance approach speed drops
constexpr double kSlowSpeed = 0.01;
constexpr double kGraspTrigger = 0.005;
constexpr double kReleaseTrigger = 0.008;

Action move_toward(const Vec2& from, const Vec2& to, double g_cmd) {
    double d = dist(from, to);
    double cap = d >= kSlowZone ? kTransitSpeed : kSlowSpeed;
    Action a;
    a.dx = std::clamp(to.x - from.x, -cap, cap);
    a.dy = std::clamp(to.y - from.y, -cap, cap);
    a.g_cmd = g_cmd;
    return a;
}

} // namespace

ExpertAction scripted_expert(const SimState& state, const TaskSpec& task) {
    std::size_t stage = current_stage(state, task);
    if (stage >= task.stages.size()) {
        return ExpertAction{Action{0.0, 0.0, 0.0}, true};
    }
    const StageGoal& goal = task.stages[stage];
    const ObjectState& obj = state.objects[goal.object_index];
    const ZoneSpec& zone = state.zones[goal.zone_index];

    ExpertAction out;
    out.done = false;

    if (obj.held) {
        // carry toward the zone center; release once effectively centered
        if (dist(obj.pos, zone.center) <= kReleaseTrigger) {
            out.action = Action{0.0, 0.0, 0.0};
        } else {
            out.action = move_toward(state.effector, zone.center, 1.0);
        }
        return out;
    }

    if (state.gripper == 1) {
        // closed on nothing: open before re-approaching
        out.action = Action{0.0, 0.0, 0.0};
        return out;
    }

    if (dist(state.effector, obj.pos) <= kGraspTrigger) {
        out.action = Action{0.0, 0.0, 1.0};
    } else {
        out.action = move_toward(state.effector, obj.pos, 0.0);
    }
    return out;
}

} // namespace wam::sim
