#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wam/experts/experts.hpp"
#include "wam/harness/config.hpp"
#include "wam/sim/dataset.hpp"
#include "wam/wm/world_model.hpp"

namespace wam::harness {

/// Loaded dataset with an episode index and a deterministic episode-level
/// train/held-out split (the last held_out_fraction of each task's episodes).
struct DatasetView {
    std::vector<sim::Record> records;

    struct EpisodeSpan {
        int task_id = 0;
        sim::ScenarioKind kind = sim::ScenarioKind::ID;
        std::uint64_t scenario_seed = 0;
        std::size_t begin = 0;
        std::size_t end = 0; // exclusive
    };
    std::vector<EpisodeSpan> episodes;
    std::vector<std::size_t> train_episodes;
    std::vector<std::size_t> held_episodes;

    static DatasetView load(const std::filesystem::path& dataset_path, double held_out_fraction);
};

/// Scripted-expert demonstrations for every task, gate labels included.
/// Writes dataset.txt and manifest.txt under out_dir.
void gen_data(const Config& cfg, std::uint64_t seed, const std::filesystem::path& out_dir);

/// Re-labels an existing dataset with the configured window into a new file.
void label_dataset(const std::filesystem::path& src, const std::filesystem::path& dst,
                   const Config& cfg);

struct Stage1Result {
    wm::WorldModel model;
    double recon_mae = 0.0;      // held-out, after autoencoder training
    double flow_loss_init = 0.0; // held-out stage-1 loss before flow training
    double flow_loss_final = 0.0;
};

/// Stage 1: autoencoder pretraining on broad synthetic scenes, autoencoder
/// fine-tuning on demonstration frames, then conditional flow matching on the
/// frozen encoder's latents. Writes wm.ckpt and metrics_stage1.csv.
Stage1Result train_stage1(const DatasetView& data, const Config& cfg, std::uint64_t seed,
                          const std::filesystem::path& out_dir);

/// L_pred + lambda_react L_react + lambda_gate L_gate, exactly.
double stage2_total(double pred, double react, double gate, const LossWeights& weights);

struct Stage2Result {
    experts::ExpertModels models;
    double pred_init = 0.0, pred_final = 0.0;   // held-out component losses
    double react_init = 0.0, react_final = 0.0;
    double gate_init = 0.0, gate_final = 0.0;
    double gate_accuracy = 0.0; // held-out frame accuracy
};

/// Stage 2: joint optimization of the predictive expert, reactive expert and
/// gate under the weighted total, conditioned on the frozen world model.
/// Writes experts.ckpt and metrics_stage2.csv. The world-model checkpoint is
/// read, never written.
Stage2Result train_stage2(const DatasetView& data, const std::filesystem::path& wm_ckpt,
                          const Config& cfg, std::uint64_t seed,
                          const std::filesystem::path& out_dir);

struct GateTrainResult {
    experts::ExpertModels models;
    double accuracy = 0.0;
    double seconds = 0.0;
};

/// Full gate training in isolation: reuses the expert stack's visual tokens
/// (patch encoder frozen), re-initializes the gate head and fits it with BCE
/// from scratch. Bounds the cost of training the gating network.
GateTrainResult train_gate_only(const DatasetView& data, const Config& cfg, std::uint64_t seed,
                                const experts::ExpertModels& base);

} // namespace wam::harness
