#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "wam/core/graph.hpp"
#include "wam/core/mlp.hpp"
#include "wam/core/param_store.hpp"
#include "wam/core/rng.hpp"
#include "wam/sim/types.hpp"

namespace wam::wm {

inline constexpr int kLatentDim = 32;
inline constexpr int kObsDim = sim::kGrid * sim::kGrid * 3 + 3; // image + proprio

using Latent = std::vector<double>;

/// Observation autoencoder plus the conditional flow dynamics net. The flow
/// field consumes (x_xi, xi, encoded current obs, task one-hot, future-step
/// one-hot) and regresses the straight-line velocity toward the future
/// latent.
struct WorldModel {
    core::ParamStore params;
    core::MlpSpec enc;
    core::MlpSpec dec;
    core::MlpSpec flow;
    int horizon = 8;
    int tasks = sim::kNumTasks;
};

WorldModel build_world_model(int horizon, std::uint64_t init_seed);
WorldModel world_model_from_checkpoint(const std::filesystem::path& path, int horizon);

std::vector<double> obs_to_vec(const sim::Observation& obs);

Latent encode(const WorldModel& m, const sim::Observation& obs);
sim::Observation decode(const WorldModel& m, const Latent& z);

/// Flow-net input layout shared by training and sampling.
std::vector<double> flow_input(const WorldModel& m, const Latent& x, double xi,
                               const Latent& z_current, int task_id, int future_step);

struct FlowSample {
    Latent x0;       // Gaussian draw
    Latent x1;       // data latent
    double xi = 0.0;
    Latent x_xi;     // (1-xi) x0 + xi x1
    Latent v_xi;     // x1 - x0
};

/// Exact linear interpolant and target velocity. xi outside [0,1] is a
/// contract error.
FlowSample flow_interpolate(const Latent& x0, const Latent& x1, double xi);

struct FlowBatchItem {
    FlowSample sample;
    Latent z_current;
    int task_id = 0;
    int future_step = 1; // 1..horizon
};

using FlowWeightFn = std::function<double(double)>;

/// Mean over the batch of w(xi) * ||f(x_xi, xi, c) - v_xi||^2. Default weight
/// is identically one.
double stage1_loss(const WorldModel& m, const std::vector<FlowBatchItem>& batch,
                   const FlowWeightFn& weight = {});

/// Recorded version used by the stage-1 training loop.
core::Graph::NodeId stage1_loss_node(core::Graph& g, const WorldModel& m,
                                     const std::vector<FlowBatchItem>& batch,
                                     const FlowWeightFn& weight = {});

/// Predicted future frames plus per-step latents. latents[0] is the encoded
/// current observation; latents[s], s>=1, is the flow sample for future step
/// s; frames[s-1] decodes latents[s].
struct WorldRollout {
    std::vector<sim::Observation> frames;
    std::vector<Latent> latents;
    int horizon = 0;
    int sampler_steps = 0;
};

/// Integrates dz/dxi = f(z, xi, c_s) from a seeded Gaussian with N uniform
/// Euler steps for each future step s = 1..H.
WorldRollout rollout(const WorldModel& m, const sim::Observation& obs, const sim::TaskSpec& task,
                     int horizon, int sampler_steps, std::uint64_t seed);

/// Debug dump of a rollout in the dataset text layout with predicted=true.
void dump_rollout(const std::filesystem::path& path, const WorldRollout& r,
                  const sim::TaskSpec& task, const sim::ScenarioConfig& scenario);

} // namespace wam::wm
