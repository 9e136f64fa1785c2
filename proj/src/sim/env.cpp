#include "wam/sim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wam/core/rng.hpp"

namespace wam::sim {

double dist(const Vec2& a, const Vec2& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

std::string scenario_kind_name(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::ID: return "ID";
    case ScenarioKind::OodBackground: return "ood_background";
    case ScenarioKind::OodPosition: return "ood_position";
    case ScenarioKind::OodObjects: return "ood_objects";
    }
    return "?";
}

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

} // namespace

SimState step(const SimState& state, const Action& action) {
    double dx = clampd(action.dx, -kDeltaMax, kDeltaMax);
    double dy = clampd(action.dy, -kDeltaMax, kDeltaMax);
    if (!std::isfinite(dx)) dx = 0.0;
    if (!std::isfinite(dy)) dy = 0.0;

    SimState next = state;
    next.effector.x = clampd(state.effector.x + dx, 0.0, 1.0);
    next.effector.y = clampd(state.effector.y + dy, 0.0, 1.0);

    int new_g = (std::isfinite(action.g_cmd) && action.g_cmd > 0.5) ? 1 : 0;

    // held object tracks the effector
    for (ObjectState& obj : next.objects) {
        if (obj.held) obj.pos = next.effector;
    }

    if (new_g == 1 && state.gripper == 0) {
        // closing: attach the nearest object within the grasp radius
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < next.objects.size(); ++i) {
            if (next.objects[i].held) continue;
            double d = dist(next.effector, next.objects[i].pos);
            if (d <= kGraspRadius && d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        if (best >= 0) {
            next.objects[best].held = true;
            next.objects[best].pos = next.effector;
        }
    } else if (new_g == 0) {
        for (ObjectState& obj : next.objects) obj.held = false;
    }
    next.gripper = new_g;
    return next;
}

bool state_valid(const SimState& state) {
    int held_count = 0;
    for (const ObjectState& obj : state.objects) {
        if (obj.pos.x < 0.0 || obj.pos.x > 1.0 || obj.pos.y < 0.0 || obj.pos.y > 1.0) return false;
        if (obj.held) {
            ++held_count;
            if (state.gripper != 1) return false;
            if (obj.pos.x != state.effector.x || obj.pos.y != state.effector.y) return false;
        }
    }
    if (held_count > 1) return false;
    const Vec2& e = state.effector;
    return e.x >= 0.0 && e.x <= 1.0 && e.y >= 0.0 && e.y <= 1.0;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

struct Rgb {
    double r, g, b;
};

const Rgb kBackgrounds[] = {
    {0.16, 0.17, 0.20}, // training
    {0.45, 0.38, 0.30}, // held out
};

const Rgb kObjectColors[kNumObjectCodes] = {
    {0.90, 0.20, 0.15},
    {0.20, 0.75, 0.90},
    {0.95, 0.85, 0.20},
    {0.20, 0.90, 0.30},
    {0.85, 0.40, 0.90},
};

const Rgb kZoneColors[] = {
    {0.15, 0.55, 0.25},
    {0.50, 0.20, 0.55},
};

// 3x3 intensity masks per shape code
const double kShapeMasks[kNumObjectCodes][9] = {
    {1, 1, 1, 1, 1, 1, 1, 1, 1},            // solid
    {0.25, 1, 0.25, 1, 1, 1, 0.25, 1, 0.25}, // plus
    {1, 0.25, 1, 0.25, 1, 0.25, 1, 0.25, 1}, // cross
    {1, 1, 1, 1, 0.25, 1, 1, 1, 1},          // ring (held out)
    {0, 1, 0, 1, 0.30, 1, 0, 1, 0},          // diamond (held out)
};

const double kMarkerOpen[9] = {0, 0.8, 0, 0.8, 1, 0.8, 0, 0.8, 0};
const double kMarkerClosed[9] = {0.8, 0.8, 0.8, 0.8, 1, 0.8, 0.8, 0.8, 0.8};
const Rgb kMarkerOpenColor{0.95, 0.95, 0.95};
const Rgb kMarkerClosedColor{0.95, 0.25, 0.85};

inline std::size_t pix(int i, int j, int c) {
    return (static_cast<std::size_t>(i) * kGrid + j) * 3 + c;
}

/// Anti-aliased opaque stamp: bilinear weights of a 3x3 mask centered at a
/// continuous position. Touched pixels are overwritten with weight*color
/// (composited over black, never the background).
void splat_stamp(std::vector<double>& img, std::vector<bool>* cover, const Vec2& pos,
                 const double* mask, const Rgb& color) {
    double py = pos.y * kGrid - 0.5;
    double px = pos.x * kGrid - 0.5;
    double i0 = std::floor(py), j0 = std::floor(px);
    double fi = py - i0, fj = px - j0;

    // accumulate the stamp's alpha on a 5x5 neighborhood
    double alpha[5][5] = {};
    for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
            double m = mask[(di + 1) * 3 + (dj + 1)];
            if (m == 0.0) continue;
            alpha[di + 1][dj + 1] += m * (1.0 - fi) * (1.0 - fj);
            alpha[di + 1][dj + 2] += m * (1.0 - fi) * fj;
            alpha[di + 2][dj + 1] += m * fi * (1.0 - fj);
            alpha[di + 2][dj + 2] += m * fi * fj;
        }
    }
    for (int ai = 0; ai < 5; ++ai) {
        for (int aj = 0; aj < 5; ++aj) {
            double a = alpha[ai][aj];
            if (a <= 0.0) continue;
            int i = static_cast<int>(i0) + ai - 1;
            int j = static_cast<int>(j0) + aj - 1;
            if (i < 0 || i >= kGrid || j < 0 || j >= kGrid) continue;
            a = std::min(a, 1.0);
            img[pix(i, j, 0)] = a * color.r;
            img[pix(i, j, 1)] = a * color.g;
            img[pix(i, j, 2)] = a * color.b;
            if (cover) (*cover)[static_cast<std::size_t>(i) * kGrid + j] = true;
        }
    }
}

void paint_stamps(const SimState& state, std::vector<double>& img, std::vector<bool>* cover) {
    for (const ObjectState& obj : state.objects) {
        int shape = std::clamp(obj.shape, 0, kNumObjectCodes - 1);
        int color = std::clamp(obj.color, 0, kNumObjectCodes - 1);
        splat_stamp(img, cover, obj.pos, kShapeMasks[shape], kObjectColors[color]);
    }
    // effector drawn last; marker reflects the gripper state
    if (state.gripper == 1) {
        splat_stamp(img, cover, state.effector, kMarkerClosed, kMarkerClosedColor);
    } else {
        splat_stamp(img, cover, state.effector, kMarkerOpen, kMarkerOpenColor);
    }
}

} // namespace

Observation render(const SimState& state, const ScenarioConfig& scenario) {
    Observation obs;
    obs.image.assign(static_cast<std::size_t>(kGrid) * kGrid * 3, 0.0);

    int bg = scenario.background;
    const Rgb& bgc = kBackgrounds[bg >= 0 && bg < 2 ? bg : 0];
    for (int i = 0; i < kGrid; ++i) {
        for (int j = 0; j < kGrid; ++j) {
            obs.image[pix(i, j, 0)] = bgc.r;
            obs.image[pix(i, j, 1)] = bgc.g;
            obs.image[pix(i, j, 2)] = bgc.b;
        }
    }

    // zone tints blend with the background
    for (std::size_t z = 0; z < state.zones.size(); ++z) {
        const ZoneSpec& zone = state.zones[z];
        const Rgb& zc = kZoneColors[z % 2];
        for (int i = 0; i < kGrid; ++i) {
            for (int j = 0; j < kGrid; ++j) {
                Vec2 c{(j + 0.5) / kGrid, (i + 0.5) / kGrid};
                double d = dist(c, zone.center);
                double w = 0.0;
                if (d <= zone.radius) w = 0.45;
                else if (d <= zone.radius + 1.0 / kGrid) w = 0.20;
                if (w == 0.0) continue;
                obs.image[pix(i, j, 0)] = (1.0 - w) * obs.image[pix(i, j, 0)] + w * zc.r;
                obs.image[pix(i, j, 1)] = (1.0 - w) * obs.image[pix(i, j, 1)] + w * zc.g;
                obs.image[pix(i, j, 2)] = (1.0 - w) * obs.image[pix(i, j, 2)] + w * zc.b;
            }
        }
    }

    // seeded distractor blobs (background OOD clutter)
    if (scenario.distractors > 0) {
        core::RngStream rng("distractors", scenario.seed);
        for (int d = 0; d < scenario.distractors; ++d) {
            int i = static_cast<int>(rng.next_below(kGrid - 1));
            int j = static_cast<int>(rng.next_below(kGrid - 1));
            Rgb c{rng.uniform(0.30, 0.90), rng.uniform(0.30, 0.90), rng.uniform(0.30, 0.90)};
            for (int di = 0; di < 2; ++di) {
                for (int dj = 0; dj < 2; ++dj) {
                    obs.image[pix(i + di, j + dj, 0)] = c.r;
                    obs.image[pix(i + di, j + dj, 1)] = c.g;
                    obs.image[pix(i + di, j + dj, 2)] = c.b;
                }
            }
        }
    }

    paint_stamps(state, obs.image, nullptr);

    obs.px = state.effector.x;
    obs.py = state.effector.y;
    obs.pg = static_cast<double>(state.gripper);
    return obs;
}

std::vector<bool> stamp_coverage(const SimState& state) {
    std::vector<double> scratch(static_cast<std::size_t>(kGrid) * kGrid * 3, 0.0);
    std::vector<bool> cover(static_cast<std::size_t>(kGrid) * kGrid, false);
    paint_stamps(state, scratch, &cover);
    return cover;
}

} // namespace wam::sim
