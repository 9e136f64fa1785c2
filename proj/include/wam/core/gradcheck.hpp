#pragma once

#include <functional>
#include <string>

#include "wam/core/adam.hpp"
#include "wam/core/param_store.hpp"
#include "wam/core/rng.hpp"

namespace wam::core {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int probes = 0;
    int skipped = 0; // probes discarded because the finite difference itself was unstable
};

/// Central finite-difference check of an analytic gradient. `loss_fn` must
/// recompute the loss from the store's current values. Probes random
/// (parameter, index) coordinates restricted to `prefix` (all parameters when
/// empty). A probe whose two-step-size finite differences disagree (a relu
/// kink under the probe) is skipped rather than counted as a failure.
GradCheckReport finite_diff_check(ParamStore& params, const GradMap& analytic,
                                  const std::function<double()>& loss_fn,
                                  RngStream& rng, int probes, double step,
                                  const std::string& prefix = "");

} // namespace wam::core
