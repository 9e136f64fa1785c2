#include "wam/wm/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "wam/core/checkpoint.hpp"
#include "wam/core/errors.hpp"
#include "wam/sim/dataset.hpp"

namespace wam::wm {

namespace {

core::MlpSpec enc_spec() {
    return {"wm.enc", {kObsDim, 96, kLatentDim}, {core::Act::Relu, core::Act::Linear}};
}

core::MlpSpec dec_spec() {
    return {"wm.dec", {kLatentDim, 96, kObsDim}, {core::Act::Relu, core::Act::Linear}};
}

core::MlpSpec flow_spec(int horizon, int tasks) {
    std::size_t in = kLatentDim + 1 + kLatentDim + static_cast<std::size_t>(tasks) +
                     static_cast<std::size_t>(horizon);
    return {"wm.flow", {in, 144, 144, kLatentDim},
            {core::Act::Relu, core::Act::Relu, core::Act::Linear}};
}

} // namespace

WorldModel build_world_model(int horizon, std::uint64_t init_seed) {
    WorldModel m;
    m.horizon = horizon;
    m.enc = enc_spec();
    m.dec = dec_spec();
    m.flow = flow_spec(horizon, m.tasks);
    core::RngStream rng("wm-init", init_seed);
    core::init_mlp(m.params, m.enc, rng);
    core::init_mlp(m.params, m.dec, rng);
    core::init_mlp(m.params, m.flow, rng);
    return m;
}

WorldModel world_model_from_checkpoint(const std::filesystem::path& path, int horizon) {
    WorldModel m;
    m.horizon = horizon;
    m.enc = enc_spec();
    m.dec = dec_spec();
    m.flow = flow_spec(horizon, m.tasks);
    m.params = core::load_checkpoint(path);
    if (!m.params.has(m.flow.weight_name(0))) {
        throw core::ConfigError("checkpoint lacks world-model parameters: " + path.string());
    }
    return m;
}

std::vector<double> obs_to_vec(const sim::Observation& obs) {
    std::vector<double> v = obs.image;
    v.push_back(obs.px);
    v.push_back(obs.py);
    v.push_back(obs.pg);
    return v;
}

Latent encode(const WorldModel& m, const sim::Observation& obs) {
    core::Tensor out = core::mlp_apply(m.params, m.enc, core::Tensor::vec(obs_to_vec(obs)));
    return out.vec_data();
}

sim::Observation decode(const WorldModel& m, const Latent& z) {
    core::Tensor in = core::Tensor::vec(z);
    in.ensure_finite("decode input");
    core::Tensor out = core::mlp_apply(m.params, m.dec, in);
    sim::Observation obs;
    std::size_t n = static_cast<std::size_t>(sim::kGrid) * sim::kGrid * 3;
    obs.image.assign(out.vec_data().begin(), out.vec_data().begin() + n);
    for (double& p : obs.image) p = std::clamp(p, 0.0, 1.0);
    obs.px = std::clamp(out[n], 0.0, 1.0);
    obs.py = std::clamp(out[n + 1], 0.0, 1.0);
    obs.pg = std::clamp(out[n + 2], 0.0, 1.0);
    return obs;
}

std::vector<double> flow_input(const WorldModel& m, const Latent& x, double xi,
                               const Latent& z_current, int task_id, int future_step) {
    if (future_step < 1 || future_step > m.horizon) {
        throw core::ContractError("flow_input: future step out of range");
    }
    std::vector<double> in;
    in.reserve(m.flow.in_width());
    in.insert(in.end(), x.begin(), x.end());
    in.push_back(xi);
    in.insert(in.end(), z_current.begin(), z_current.end());
    for (int t = 0; t < m.tasks; ++t) in.push_back(t == task_id ? 1.0 : 0.0);
    for (int s = 0; s < m.horizon; ++s) in.push_back(s == future_step - 1 ? 1.0 : 0.0);
    return in;
}

FlowSample flow_interpolate(const Latent& x0, const Latent& x1, double xi) {
    if (!(xi >= 0.0 && xi <= 1.0)) {
        throw core::ContractError("flow_interpolate: xi outside [0,1]");
    }
    if (x0.size() != x1.size()) throw core::DimensionError("flow_interpolate: latent size mismatch");
    FlowSample s;
    s.x0 = x0;
    s.x1 = x1;
    s.xi = xi;
    s.x_xi.resize(x0.size());
    s.v_xi.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        s.x_xi[i] = (1.0 - xi) * x0[i] + xi * x1[i];
        s.v_xi[i] = x1[i] - x0[i];
    }
    return s;
}

double stage1_loss(const WorldModel& m, const std::vector<FlowBatchItem>& batch,
                   const FlowWeightFn& weight) {
    if (batch.empty()) throw core::ContractError("stage1_loss: empty batch");
    double acc = 0.0;
    for (const FlowBatchItem& item : batch) {
        std::vector<double> in =
            flow_input(m, item.sample.x_xi, item.sample.xi, item.z_current, item.task_id,
                       item.future_step);
        core::Tensor out = core::mlp_apply(m.params, m.flow, core::Tensor::vec(in));
        double w = weight ? weight(item.sample.xi) : 1.0;
        double sq = 0.0;
        for (std::size_t i = 0; i < item.sample.v_xi.size(); ++i) {
            double d = out[i] - item.sample.v_xi[i];
            sq += d * d;
        }
        acc += w * sq;
    }
    return acc / static_cast<double>(batch.size());
}

core::Graph::NodeId stage1_loss_node(core::Graph& g, const WorldModel& m,
                                     const std::vector<FlowBatchItem>& batch,
                                     const FlowWeightFn& weight) {
    if (batch.empty()) throw core::ContractError("stage1_loss: empty batch");
    std::vector<core::Graph::NodeId> terms;
    terms.reserve(batch.size());
    for (const FlowBatchItem& item : batch) {
        std::vector<double> in =
            flow_input(m, item.sample.x_xi, item.sample.xi, item.z_current, item.task_id,
                       item.future_step);
        auto out = core::mlp_node(g, m.params, m.flow, g.input(core::Tensor::vec(in)));
        auto diff = g.sub(out, g.input(core::Tensor::vec(item.sample.v_xi)));
        auto sq = g.squared_norm(diff);
        double w = weight ? weight(item.sample.xi) : 1.0;
        terms.push_back(w == 1.0 ? sq : g.scale(sq, w));
    }
    return g.mean_scalars(terms);
}

WorldRollout rollout(const WorldModel& m, const sim::Observation& obs, const sim::TaskSpec& task,
                     int horizon, int sampler_steps, std::uint64_t seed) {
    if (horizon < 1) throw core::ContractError("rollout: horizon must be >= 1");
    if (horizon > m.horizon) throw core::ContractError("rollout: horizon exceeds model horizon");
    if (sampler_steps < 1) throw core::ContractError("rollout: sampler steps must be >= 1");

    WorldRollout r;
    r.horizon = horizon;
    r.sampler_steps = sampler_steps;
    Latent z_t = encode(m, obs);
    r.latents.push_back(z_t);

    core::RngStream rng("wm-rollout", seed);
    double h = 1.0 / static_cast<double>(sampler_steps);
    for (int s = 1; s <= horizon; ++s) {
        Latent z = rng.normal_vec(kLatentDim);
        for (int i = 0; i < sampler_steps; ++i) {
            double xi = static_cast<double>(i) * h;
            std::vector<double> in = flow_input(m, z, xi, z_t, task.id, s);
            core::Tensor v = core::mlp_apply(m.params, m.flow, core::Tensor::vec(in));
            for (int d = 0; d < kLatentDim; ++d) z[d] += h * v[d];
        }
        r.latents.push_back(z);
        r.frames.push_back(decode(m, z));
    }
    return r;
}

void dump_rollout(const std::filesystem::path& path, const WorldRollout& r,
                  const sim::TaskSpec& task, const sim::ScenarioConfig& scenario) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write rollout dump: " + path.string());
    for (std::size_t s = 0; s < r.frames.size(); ++s) {
        const sim::Observation& o = r.frames[s];
        f << "episode=0 t=" << (s + 1) << " predicted=true"
          << " task_id=" << task.id
          << " scenario=" << sim::scenario_kind_name(scenario.kind) << "," << scenario.seed
          << " proprio=" << sim::format_double(o.px) << "," << sim::format_double(o.py) << ","
          << sim::format_double(o.pg) << " frame=";
        for (std::size_t i = 0; i < o.image.size(); ++i) {
            if (i) f << ",";
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.5f", o.image[i]);
            f << buf;
        }
        f << '\n';
    }
}

} // namespace wam::wm
