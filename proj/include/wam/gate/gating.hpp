#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "wam/experts/experts.hpp"
#include "wam/sim/types.hpp"

namespace wam::gate {

enum class Expert { Reactive, Predictive };

/// Hard threshold at 0.5; ties go to the reactive expert.
Expert route(double score);

/// Fires on frames that are the center of an interaction moment beyond a
/// plain gripper flip: an imminent grasp (open, within the grasp radius of
/// the current stage object) or an imminent release (carrying the stage
/// object inside its target zone).
using ContactRule = std::function<bool(const sim::SimState&)>;

ContactRule default_contact_rule(const sim::TaskSpec& task);

/// Key events are gripper flips between consecutive frames plus contact-rule
/// firings; every frame within +-window of an event is labeled 1
/// (interaction), all others 0 (transit). Windows union.
std::vector<int> label_trajectory(
    const std::vector<std::pair<sim::SimState, sim::Action>>& trajectory, int window,
    const ContactRule& contact_rule);

/// Mean-pooled image tokens -> MLP -> sigmoid confidence in [0,1].
double gate_score(const experts::ExpertModels& m,
                  const std::vector<std::vector<double>>& image_tokens);

/// Binary cross-entropy with scores clamped to [1e-7, 1-1e-7] before the log.
double gate_loss(const std::vector<double>& scores, const std::vector<int>& labels);

} // namespace wam::gate
