#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wam::sim {

inline constexpr int kGrid = 24;                  // observation is kGrid x kGrid x 3
inline constexpr double kDeltaMax = 0.05;         // per-step displacement bound
inline constexpr double kGraspRadius = 0.03;      // closing this near an object attaches it
inline constexpr int kNumTasks = 2;

// Object codes 0..2 appear in training; 3..4 are held out for the
// unseen-objects split. Background 0 is the training background.
inline constexpr int kNumTrainingCodes = 3;
inline constexpr int kNumObjectCodes = 5;
inline constexpr int kTrainingBackground = 0;
inline constexpr int kHeldOutBackground = 1;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

double dist(const Vec2& a, const Vec2& b);

struct ObjectState {
    Vec2 pos;
    int shape = 0;
    int color = 0;
    bool held = false;
};

struct ZoneSpec {
    Vec2 center;
    double radius = 0.05;
};

/// Full ground-truth state of the tabletop. At most one object is held;
/// a held object sits exactly at the effector with the gripper closed.
struct SimState {
    Vec2 effector;
    int gripper = 0; // 0 open, 1 closed
    std::vector<ObjectState> objects;
    std::vector<ZoneSpec> zones;
};

/// Per-step command. Displacements clamp to [-kDeltaMax, kDeltaMax];
/// g_cmd binarizes at 0.5.
struct Action {
    double dx = 0.0;
    double dy = 0.0;
    double g_cmd = 0.0;
};

enum class ScenarioKind { ID, OodBackground, OodPosition, OodObjects };

std::string scenario_kind_name(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

struct Box {
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    bool contains(const Vec2& p) const {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
    bool intersects(const Box& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
};

inline constexpr Box kTrainingSpawn{0.10, 0.60, 0.15, 0.85};
inline constexpr Box kOodPositionSpawn{0.70, 0.95, 0.15, 0.85};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::ID;
    std::uint64_t seed = 0;
    int background = kTrainingBackground;
    int distractors = 0;
    Box spawn = kTrainingSpawn;
    std::vector<int> shapes;
    std::vector<int> colors;
};

struct StageGoal {
    int object_index = 0;
    int zone_index = 0;
};

/// Ordered sub-goals plus the one-hot instruction id.
struct TaskSpec {
    int id = 0;
    std::vector<StageGoal> stages;
    int instruction = 0;
};

TaskSpec make_task(int id);

/// Rendered image grid plus the effector proprioceptive triple (x, y, g).
struct Observation {
    std::vector<double> image; // kGrid*kGrid*3, row-major, values in [0,1]
    double px = 0.0, py = 0.0, pg = 0.0;
};

} // namespace wam::sim
