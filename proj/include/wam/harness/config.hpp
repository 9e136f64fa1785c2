#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace wam::harness {

/// Loss-balance weights for the stage-2 objective.
struct LossWeights {
    double lambda_react = 0.1;
    double lambda_gate = 0.05;
};

/// Flat key = value run configuration. Every knob has a documented default;
/// unknown keys in a config file are a hard error.
struct Config {
    // horizons / sampler steps
    int horizon = 8;            // future steps per rollout and actions per chunk
    int denoise_steps = 5;      // world-model sampler (Euler) steps
    int diffusion_steps = 20;   // predictive-expert reverse steps at inference

    // gating
    int gate_window = 3;        // labeler half-window W
    bool gate_per_frame = false; // re-gate every step instead of per chunk

    // loss weights
    LossWeights weights;

    // data generation
    int episodes_per_task = 100;
    int tasks = 2;

    // training budgets
    int ae_pretrain_steps = 12000; // broad-coverage autoencoder pretraining
    int ae_finetune_steps = 8000;  // autoencoder steps on demonstration frames
    int flow_steps = 45000;
    int stage2_steps = 36000;
    int batch_size = 8;
    double lr = 1e-3;
    double lr_stage2 = 1e-3;
    double held_out_fraction = 0.1; // episode-level held-out split

    bool react_train_on_predicted = false; // reactive targets from rollouts
    bool reroll_per_chunk = true;          // re-roll the world model each chunk

    // evaluation
    int eval_episodes = 50;
    int step_cap = 300;
    double transit_radius = 0.10; // effector-to-object vicinity for transit credit
    int ablate_episodes = 30;
    bool dump_rollouts = false;

    static Config load(const std::filesystem::path& path);
    static Config parse(const std::string& text);
};

/// splitmix of base ^ fnv(tag); every derived seed in the pipeline goes
/// through here so reruns reproduce the exact stream layout.
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag);

} // namespace wam::harness
