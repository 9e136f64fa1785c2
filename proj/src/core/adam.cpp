#include "wam/core/adam.hpp"

#include <cmath>

#include "wam/core/errors.hpp"

namespace wam::core {

namespace {

void check_hyper(const AdamHyper& hyper) {
    if (hyper.lr <= 0.0 || hyper.eps <= 0.0 ||
        hyper.beta1 <= 0.0 || hyper.beta1 >= 1.0 ||
        hyper.beta2 <= 0.0 || hyper.beta2 >= 1.0) {
        throw ContractError("adam_step: hyperparameters out of range");
    }
}

void update_one(ParamStore& params, const std::string& name, const Tensor& g, AdamState& state,
                const AdamHyper& hyper, double bc1, double bc2) {
    const Tensor& p = params.get(name);
    if (!g.same_shape(p)) throw DimensionError("adam_step: gradient shape mismatch for " + name);
    g.ensure_finite("gradient " + name);

    Tensor& m = state.m.try_emplace(name, Tensor(p.shape())).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(p.shape())).first->second;

    std::vector<double> upd = p.vec_data();
    for (std::size_t i = 0; i < upd.size(); ++i) {
        double gi = g[i];
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        upd[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
    params.update(name, upd);
}

} // namespace

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               const AdamHyper& hyper) {
    check_hyper(hyper);
    state.t += 1;
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (const std::string& name : params.names()) {
        auto git = grads.find(name);
        if (git == grads.end()) throw ContractError("adam_step: missing gradient for " + name);
        update_one(params, name, git->second, state, hyper, bc1, bc2);
    }
    params.bump_step();
}

void adam_step_subset(ParamStore& params, const GradMap& grads, AdamState& state,
                      const AdamHyper& hyper) {
    check_hyper(hyper);
    state.t += 1;
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (const auto& [name, g] : grads) {
        update_one(params, name, g, state, hyper, bc1, bc2);
    }
    params.bump_step();
}

} // namespace wam::core
