#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "wam/core/graph.hpp"
#include "wam/core/param_store.hpp"

namespace wam::core {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment buffers, lazily created per parameter.
class AdamState {
public:
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::uint64_t t = 0;
};

/// One bias-corrected adaptive-moment update over every parameter in the
/// store. Grads must contain a (possibly zero) entry for each parameter.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               const AdamHyper& hyper);

/// Updates exactly the parameters named in `grads`, leaving the rest and
/// their moments untouched (training-loop fast path for partial objectives).
void adam_step_subset(ParamStore& params, const GradMap& grads, AdamState& state,
                      const AdamHyper& hyper);

} // namespace wam::core
