#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "wam/core/graph.hpp"
#include "wam/core/mlp.hpp"
#include "wam/core/param_store.hpp"
#include "wam/core/rng.hpp"
#include "wam/sim/types.hpp"
#include "wam/wm/world_model.hpp"

namespace wam::experts {

inline constexpr int kChunkH = 8;
inline constexpr int kActionDim = 3;
inline constexpr int kChunkDim = kChunkH * kActionDim;
inline constexpr int kDiffusionK = 20;
inline constexpr int kPatchSize = 4;
inline constexpr int kPatchGrid = sim::kGrid / kPatchSize;
inline constexpr int kPatchTokens = kPatchGrid * kPatchGrid; // 36
inline constexpr int kTokenDim = 16;
inline constexpr int kPoolFactor = 4;
inline constexpr double kSmoothL1Beta = 0.1;

// ---------------------------------------------------------------------------
// action normalization: dx,dy scaled by the displacement bound, gripper
// mapped {0,1} -> {-1,1}; execution de-normalizes and clamps.

std::array<double, 3> normalize_action(const sim::Action& a);
sim::Action denormalize_action(const double* v);

// ---------------------------------------------------------------------------
// diffusion schedule (cosine alpha-bar)

struct NoiseSchedule {
    int K = 0;
    std::vector<double> alpha_bar; // index 0..K, alpha_bar[0] == 1
};

NoiseSchedule cosine_schedule(int K);

struct DiffusionSample {
    std::vector<double> clean;
    std::vector<double> noise;
    std::vector<double> noisy;
    int k = 0;
};

/// Forward-process sample a_k = sqrt(abar_k) a + sqrt(1-abar_k) eps.
DiffusionSample noise_actions(const std::vector<double>& chunk, int k,
                              const NoiseSchedule& schedule, core::RngStream& rng);

/// Posterior mean of the step from alpha_bar[k_hi] down to alpha_bar[k_lo]
/// given the noisy chunk and a clean estimate; the reverse sampler and the
/// forward/reverse consistency test share this formula.
std::vector<double> posterior_mean(const NoiseSchedule& schedule, int k_hi, int k_lo,
                                   const std::vector<double>& noisy,
                                   const std::vector<double>& clean_estimate);

// ---------------------------------------------------------------------------
// shared conditioning

/// Image patch tokens, instruction one-hot and the world model's current-step
/// latent; the predictive trunk consumes the tokens concatenated in patch
/// order.
struct ConditioningBundle {
    std::vector<double> img_tokens; // kPatchTokens * kTokenDim, patch order
    std::vector<double> task_onehot;
    std::vector<double> f_v; // wm::kLatentDim, zeroed by the "-vid" variants
};

/// All stage-2 trainables share one store: the patch encoder, the predictive
/// trunk, the reactive decoder head and the gating head.
struct ExpertModels {
    core::ParamStore params;
    core::MlpSpec patch; // per-patch encoder (pixels + patch-center coords)
    core::MlpSpec trunk; // predictive noise model
    core::MlpSpec dori;  // reactive decoder head after token mean-pool
    core::MlpSpec gate;  // gating head after token mean-pool
    NoiseSchedule schedule;
    int tasks = sim::kNumTasks;
};

ExpertModels build_experts(std::uint64_t init_seed, int tasks = sim::kNumTasks);
ExpertModels experts_from_checkpoint(const std::filesystem::path& path,
                                     int tasks = sim::kNumTasks);

// ---------------------------------------------------------------------------
// patch tokens

/// Shared encoder applied per non-overlapping 4x4 patch; each patch input is
/// its 48 pixel values plus the patch-center coordinates, so token content
/// carries position without per-patch weights.
std::vector<std::vector<double>> patch_tokens(const ExpertModels& m,
                                              const std::vector<double>& image);
std::vector<double> flatten_tokens(const std::vector<std::vector<double>>& tokens);

/// Recorded variant; returns one node per token.
std::vector<core::Graph::NodeId> patch_token_nodes(core::Graph& g, const ExpertModels& m,
                                                   const std::vector<double>& image);

// ---------------------------------------------------------------------------
// predictive expert

std::vector<double> tau_features(int k, int K);

std::vector<double> eps_predict(const ExpertModels& m, const std::vector<double>& noisy,
                                int k, const ConditioningBundle& cond);

double pred_loss(const ExpertModels& m, const std::vector<DiffusionSample>& batch,
                 const std::vector<ConditioningBundle>& conds);

/// Ancestral reverse diffusion over `steps` timesteps (a strided subset when
/// steps < K); output de-normalized and clamped to action bounds.
std::vector<sim::Action> sample_chunk(const ExpertModels& m, const ConditioningBundle& cond,
                                      int steps, std::uint64_t seed);

// ---------------------------------------------------------------------------
// reactive expert

std::vector<double> pool_channels(const std::vector<double>& latent, int factor);
std::vector<std::vector<double>> latent_tokens(const std::vector<double>& latent, int factor,
                                               int token_dim = kTokenDim);

/// a_s = D_ori(mean-pool of [patch tokens ; pooled latent tokens]).
sim::Action react_predict(const ExpertModels& m, const sim::Observation& frame,
                          const wm::Latent& f_v);

/// Mean smooth-L1 distance between normalized chunks, beta = 0.1.
double react_loss(const std::vector<double>& pred, const std::vector<double>& target);

/// One reactive action per rollout frame, concatenated into a chunk.
std::vector<sim::Action> react_chunk(const ExpertModels& m, const wm::WorldRollout& rollout,
                                     bool zero_latents = false);

// ---------------------------------------------------------------------------
// recorded heads for the stage-2 training loop and gradient checks

core::Graph::NodeId trunk_node(core::Graph& g, const ExpertModels& m,
                               const std::vector<double>& noisy, int k,
                               const std::vector<core::Graph::NodeId>& img_tokens,
                               const std::vector<double>& task_onehot,
                               const std::vector<double>& f_v);

core::Graph::NodeId dori_node(core::Graph& g, const ExpertModels& m,
                              const std::vector<core::Graph::NodeId>& patch_tokens,
                              const std::vector<std::vector<double>>& latent_toks);

core::Graph::NodeId gate_score_node(core::Graph& g, const ExpertModels& m,
                                    const std::vector<core::Graph::NodeId>& patch_tokens);

} // namespace wam::experts
