#include <algorithm>

#include "wam/core/errors.hpp"
#include "wam/core/rng.hpp"
#include "wam/sim/sim.hpp"

namespace wam::sim {

ScenarioKind parse_scenario_kind(const std::string& s) {
    if (s == "ID" || s == "id") return ScenarioKind::ID;
    if (s == "ood_background") return ScenarioKind::OodBackground;
    if (s == "ood_position") return ScenarioKind::OodPosition;
    if (s == "ood_objects") return ScenarioKind::OodObjects;
    throw core::ConfigError("unknown scenario kind: " + s);
}

TaskSpec make_task(int id) {
    if (id < 0 || id >= kNumTasks) throw core::ConfigError("unknown task id: " + std::to_string(id));
    TaskSpec t;
    t.id = id;
    t.instruction = id;
    if (id == 0) {
        t.stages = {StageGoal{0, 0}};
    } else {
        t.stages = {StageGoal{0, 0}, StageGoal{1, 1}};
    }
    return t;
}

namespace {

const ZoneSpec kZoneTable[] = {
    {{0.50, 0.08}, 0.05},
    {{0.08, 0.50}, 0.05},
};

std::vector<int> training_codes() { return {0, 1, 2}; }
std::vector<int> held_out_codes() { return {3, 4}; }

} // namespace

ScenarioConfig make_scenario(ScenarioKind kind, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.kind = kind;
    cfg.seed = seed;
    cfg.background = kTrainingBackground;
    cfg.distractors = 0;
    cfg.spawn = kTrainingSpawn;
    cfg.shapes = training_codes();
    cfg.colors = training_codes();
    switch (kind) {
    case ScenarioKind::ID:
        break;
    case ScenarioKind::OodPosition:
        cfg.spawn = kOodPositionSpawn;
        break;
    case ScenarioKind::OodBackground: {
        cfg.background = kHeldOutBackground;
        std::uint64_t h = seed;
        cfg.distractors = 5 + static_cast<int>(core::splitmix64(h) % 4); // 5..8
        break;
    }
    case ScenarioKind::OodObjects:
        cfg.shapes = held_out_codes();
        cfg.colors = held_out_codes();
        break;
    }
    return cfg;
}

SimState spawn_state(const ScenarioConfig& scenario, const TaskSpec& task,
                     std::uint64_t episode_seed) {
    core::RngStream rng("spawn/" + std::to_string(scenario.seed), episode_seed);

    int object_count = 0;
    for (const StageGoal& g : task.stages) {
        object_count = std::max(object_count, g.object_index + 1);
    }

    SimState st;
    int zone_count = 0;
    for (const StageGoal& g : task.stages) zone_count = std::max(zone_count, g.zone_index + 1);
    for (int z = 0; z < zone_count; ++z) st.zones.push_back(kZoneTable[z % 2]);

    auto sample_pos = [&](const Box& box) {
        return Vec2{rng.uniform(box.x0, box.x1), rng.uniform(box.y0, box.y1)};
    };

    st.objects.resize(object_count);
    // Fixed appearance per (task, stage): the manipulation order is bound to
    // what the objects look like, the way real tasks name their objects.
    for (int k = 0; k < object_count; ++k) {
        ObjectState& obj = st.objects[k];
        obj.shape = scenario.shapes[(task.id + k) % scenario.shapes.size()];
        obj.color = scenario.colors[(task.id + k) % scenario.colors.size()];
        obj.held = false;
        for (int attempt = 0; attempt < 200; ++attempt) {
            Vec2 p = sample_pos(scenario.spawn);
            bool ok = true;
            for (int j = 0; j < k; ++j) {
                if (dist(p, st.objects[j].pos) < 0.14) ok = false;
            }
            for (const ZoneSpec& z : st.zones) {
                if (dist(p, z.center) < z.radius + 0.08) ok = false;
            }
            obj.pos = p;
            if (ok) break;
        }
    }

    // effector home is always drawn from the training box
    st.effector = sample_pos(kTrainingSpawn);
    st.gripper = 0;
    return st;
}

bool stage_done(const SimState& state, const TaskSpec& task, std::size_t stage) {
    const StageGoal& goal = task.stages[stage];
    const ObjectState& obj = state.objects[goal.object_index];
    const ZoneSpec& zone = state.zones[goal.zone_index];
    return !obj.held && dist(obj.pos, zone.center) <= zone.radius;
}

std::size_t current_stage(const SimState& state, const TaskSpec& task) {
    for (std::size_t k = 0; k < task.stages.size(); ++k) {
        if (!stage_done(state, task, k)) return k;
    }
    return task.stages.size();
}

std::vector<bool> check_stage_success(const std::vector<SimState>& trajectory,
                                      const TaskSpec& task) {
    if (trajectory.empty()) throw core::ContractError("check_stage_success: empty trajectory");
    const SimState& last = trajectory.back();
    std::vector<bool> out(task.stages.size(), false);
    bool chain = true;
    for (std::size_t k = 0; k < task.stages.size(); ++k) {
        chain = chain && stage_done(last, task, k);
        out[k] = chain;
    }
    return out;
}

bool transit_reached(const std::vector<SimState>& trajectory, const TaskSpec& task,
                     std::size_t stage, double radius) {
    const StageGoal& goal = task.stages.at(stage);
    for (const SimState& s : trajectory) {
        const ObjectState& obj = s.objects[goal.object_index];
        if (dist(s.effector, obj.pos) <= radius) return true;
    }
    return false;
}

} // namespace wam::sim
