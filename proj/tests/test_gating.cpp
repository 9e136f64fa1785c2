#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "wam/core/errors.hpp"
#include "wam/core/rng.hpp"
#include "wam/gate/gating.hpp"
#include "wam/sim/sim.hpp"

using namespace wam;
using namespace wam::gate;

namespace {

std::vector<std::pair<sim::SimState, sim::Action>> flip_trajectory(
    int length, const std::vector<int>& flips) {
    std::vector<std::pair<sim::SimState, sim::Action>> traj(length);
    int g = 0;
    for (int t = 0; t < length; ++t) {
        for (int f : flips) {
            if (f == t) g = 1 - g;
        }
        traj[t].first.gripper = g;
        traj[t].first.effector = {0.5, 0.5};
    }
    return traj;
}

/// Reference labeler: frame t is 1 iff some event lies within the window.
std::vector<int> brute_force_labels(
    const std::vector<std::pair<sim::SimState, sim::Action>>& traj, int window,
    const ContactRule& rule) {
    int n = static_cast<int>(traj.size());
    std::vector<int> out(n, 0);
    for (int t = 0; t < n; ++t) {
        for (int e = 0; e < n; ++e) {
            bool flip = e > 0 && traj[e].first.gripper != traj[e - 1].first.gripper;
            bool contact = rule && rule(traj[e].first);
            if ((flip || contact) && std::abs(t - e) <= window) {
                out[t] = 1;
                break;
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("route: threshold and tie rule") {
    CHECK(route(0.7) == Expert::Predictive);
    CHECK(route(0.5) == Expert::Reactive);
    CHECK(route(0.0) == Expert::Reactive);
    CHECK(route(0.500001) == Expert::Predictive);
}

TEST_CASE("label_trajectory: single flip window") {
    auto traj = flip_trajectory(20, {10});
    auto labels = label_trajectory(traj, 3, nullptr);
    REQUIRE(labels.size() == 20);
    for (int t = 0; t < 20; ++t) {
        CHECK(labels[t] == ((t >= 7 && t <= 13) ? 1 : 0));
    }
}

TEST_CASE("label_trajectory: no events, all transit") {
    auto traj = flip_trajectory(15, {});
    auto labels = label_trajectory(traj, 3, nullptr);
    for (int l : labels) CHECK(l == 0);
}

TEST_CASE("label_trajectory: overlapping windows union") {
    auto traj = flip_trajectory(20, {5, 9});
    auto labels = label_trajectory(traj, 3, nullptr);
    for (int t = 0; t < 20; ++t) {
        CHECK(labels[t] == ((t >= 2 && t <= 12) ? 1 : 0));
    }
}

TEST_CASE("label_trajectory: agrees with brute force on 1000 random trajectories") {
    core::RngStream rng("label-prop", 2025);
    // contact rule fires wherever the effector sits right of 0.8
    ContactRule rule = [](const sim::SimState& s) { return s.effector.x > 0.8; };
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 5 + static_cast<int>(rng.next_below(56));
        std::vector<std::pair<sim::SimState, sim::Action>> traj(n);
        int g = 0;
        for (int t = 0; t < n; ++t) {
            if (rng.uniform() < 0.1) g = 1 - g;
            traj[t].first.gripper = g;
            traj[t].first.effector = {rng.uniform(), rng.uniform()};
        }
        int window = static_cast<int>(rng.next_below(6));
        auto fast = label_trajectory(traj, window, rule);
        auto slow = brute_force_labels(traj, window, rule);
        CHECK(fast == slow);
    }
}

TEST_CASE("default contact rule: fires on grasp-range contact and carry") {
    sim::TaskSpec task = sim::make_task(0);
    sim::SimState st;
    st.objects = {sim::ObjectState{{0.4, 0.4}, 0, 0, false}};
    st.zones = {sim::ZoneSpec{{0.5, 0.08}, 0.05}};
    ContactRule rule = default_contact_rule(task);

    // inside the grasp radius with the gripper open: grasp imminent
    st.effector = {0.4 + sim::kGraspRadius - 0.001, 0.4};
    CHECK(rule(st));
    // approaching but out of range: transit
    st.effector = {0.4 + 0.2, 0.4};
    CHECK_FALSE(rule(st));

    // carrying the stage object: contact for the whole transport
    st.objects[0].held = true;
    st.gripper = 1;
    st.objects[0].pos = {0.7, 0.7};
    st.effector = st.objects[0].pos;
    CHECK(rule(st));

    // placed and released: stage complete, no event
    st.objects[0].held = false;
    st.gripper = 0;
    st.objects[0].pos = {0.5, 0.09};
    st.effector = {0.5, 0.12};
    CHECK_FALSE(rule(st));
}

TEST_CASE("gate_score: sigmoid range, determinism, zero-weight midpoint") {
    experts::ExpertModels m = experts::build_experts(60);
    sim::TaskSpec task = sim::make_task(0);
    sim::ScenarioConfig cfg = sim::make_scenario(sim::ScenarioKind::ID, 3);
    sim::SimState st = sim::spawn_state(cfg, task, 3);
    auto tokens = experts::patch_tokens(m, sim::render(st, cfg).image);

    double s1 = gate_score(m, tokens);
    double s2 = gate_score(m, tokens);
    CHECK(s1 == s2);
    CHECK(s1 > 0.0);
    CHECK(s1 < 1.0);

    for (std::size_t l = 0; l < m.gate.layers(); ++l) {
        m.params.update(m.gate.weight_name(l),
                        std::vector<double>(m.params.get(m.gate.weight_name(l)).size(), 0.0));
        m.params.update(m.gate.bias_name(l),
                        std::vector<double>(m.params.get(m.gate.bias_name(l)).size(), 0.0));
    }
    CHECK(gate_score(m, tokens) == 0.5);
}

TEST_CASE("gate_loss: confident, uncertain, batched") {
    CHECK(gate_loss({1.0 - 1e-7}, {1}) == doctest::Approx(1e-7).epsilon(0.01));
    CHECK(gate_loss({0.5}, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(gate_loss({0.5, 0.5}, {1, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK_THROWS_AS(gate_loss({0.5}, {1, 0}), core::ContractError);
}

TEST_CASE("gate_loss: monotone in score on a grid") {
    double prev = gate_loss({0.05}, {1});
    for (double s = 0.10; s < 1.0; s += 0.05) {
        double cur = gate_loss({s}, {1});
        CHECK(cur < prev);
        prev = cur;
    }
    prev = gate_loss({0.05}, {0});
    for (double s = 0.10; s < 1.0; s += 0.05) {
        double cur = gate_loss({s}, {0});
        CHECK(cur > prev);
        prev = cur;
    }
}
