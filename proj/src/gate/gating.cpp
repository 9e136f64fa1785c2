#include "wam/gate/gating.hpp"

#include <algorithm>
#include <cmath>

#include "wam/core/errors.hpp"
#include "wam/sim/sim.hpp"

namespace wam::gate {

Expert route(double score) {
    return score > 0.5 ? Expert::Predictive : Expert::Reactive;
}

ContactRule default_contact_rule(const sim::TaskSpec& task) {
    // Contact means the effector is within the grasp radius of the current
    // stage object: about to close on it, or carrying it toward its place
    // point (the held object sits at the effector). Both are moments where a
    // grasp or release lies ahead, the 2D stand-in for the lifted posture.
    return [task](const sim::SimState& state) {
        std::size_t stage = sim::current_stage(state, task);
        if (stage >= task.stages.size()) return false;
        const sim::StageGoal& goal = task.stages[stage];
        const sim::ObjectState& obj = state.objects[goal.object_index];
        return sim::dist(state.effector, obj.pos) <= sim::kGraspRadius;
    };
}

std::vector<int> label_trajectory(
    const std::vector<std::pair<sim::SimState, sim::Action>>& trajectory, int window,
    const ContactRule& contact_rule) {
    if (trajectory.empty()) throw core::ContractError("label_trajectory: empty trajectory");
    if (window < 0) throw core::ContractError("label_trajectory: negative window");

    const int n = static_cast<int>(trajectory.size());
    std::vector<int> events;
    for (int t = 0; t < n; ++t) {
        bool flip = t > 0 && trajectory[t].first.gripper != trajectory[t - 1].first.gripper;
        bool contact = contact_rule && contact_rule(trajectory[t].first);
        if (flip || contact) events.push_back(t);
    }

    std::vector<int> labels(n, 0);
    for (int e : events) {
        int lo = std::max(0, e - window);
        int hi = std::min(n - 1, e + window);
        for (int t = lo; t <= hi; ++t) labels[t] = 1;
    }
    return labels;
}

double gate_score(const experts::ExpertModels& m,
                  const std::vector<std::vector<double>>& image_tokens) {
    if (image_tokens.empty()) throw core::ContractError("gate_score: no tokens");
    std::vector<double> mean(experts::kTokenDim, 0.0);
    for (const auto& tok : image_tokens) {
        if (tok.size() != experts::kTokenDim) {
            throw core::DimensionError("gate_score: token width mismatch");
        }
        for (int d = 0; d < experts::kTokenDim; ++d) mean[d] += tok[d];
    }
    double inv = 1.0 / static_cast<double>(image_tokens.size());
    for (double& v : mean) v *= inv;
    core::Tensor out = core::mlp_apply(m.params, m.gate, core::Tensor::vec(mean));
    return out[0];
}

double gate_loss(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw core::ContractError("gate_loss: length mismatch");
    if (scores.empty()) throw core::ContractError("gate_loss: empty batch");
    const double eps = 1e-7;
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double s = std::clamp(scores[i], eps, 1.0 - eps);
        double y = static_cast<double>(labels[i]);
        acc += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
    }
    return acc / static_cast<double>(scores.size());
}

} // namespace wam::gate
