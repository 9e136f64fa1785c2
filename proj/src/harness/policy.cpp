#include "wam/harness/policy.hpp"

#include <chrono>

#include "wam/core/errors.hpp"
#include "wam/gate/gating.hpp"
#include "wam/sim/sim.hpp"

namespace wam::harness {

std::string policy_name(PolicyKind k) {
    switch (k) {
    case PolicyKind::Harmowam: return "harmowam";
    case PolicyKind::ImagineThenExecute: return "imagine_then_execute";
    case PolicyKind::JointModeling: return "joint_modeling";
    case PolicyKind::GateAveraging: return "gate_averaging";
    case PolicyKind::KeyframeAveraging: return "keyframe_averaging";
    case PolicyKind::HarmowamNoLatentsReactive: return "harmowam_no_latents_reactive";
    case PolicyKind::HarmowamNoLatentsPredictive: return "harmowam_no_latents_predictive";
    }
    return "?";
}

PolicyKind parse_policy(const std::string& s) {
    if (s == "harmowam") return PolicyKind::Harmowam;
    if (s == "imagine_then_execute") return PolicyKind::ImagineThenExecute;
    if (s == "joint_modeling") return PolicyKind::JointModeling;
    if (s == "gate_averaging") return PolicyKind::GateAveraging;
    if (s == "keyframe_averaging") return PolicyKind::KeyframeAveraging;
    if (s == "harmowam_no_latents_reactive") return PolicyKind::HarmowamNoLatentsReactive;
    if (s == "harmowam_no_latents_predictive") return PolicyKind::HarmowamNoLatentsPredictive;
    throw core::ConfigError("unknown policy kind: " + s);
}

System load_system(const std::filesystem::path& dir, const Config& cfg) {
    System sys;
    sys.world = wm::world_model_from_checkpoint(dir / "wm.ckpt", cfg.horizon);
    sys.ex = experts::experts_from_checkpoint(dir / "experts.ckpt");
    return sys;
}

namespace {

using Clock = std::chrono::steady_clock;

bool needs_rollout(PolicyKind kind, bool routed_reactive) {
    switch (kind) {
    case PolicyKind::ImagineThenExecute:
    case PolicyKind::GateAveraging:
        return true;
    case PolicyKind::JointModeling:
        return false;
    case PolicyKind::Harmowam:
    case PolicyKind::HarmowamNoLatentsReactive:
    case PolicyKind::HarmowamNoLatentsPredictive:
        return routed_reactive;
    case PolicyKind::KeyframeAveraging:
        return true; // reactive chunk needed in both branches
    }
    return false;
}

std::vector<sim::Action> mean_chunks(const std::vector<sim::Action>& a,
                                     const std::vector<sim::Action>& b) {
    std::vector<sim::Action> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i].dx = 0.5 * (a[i].dx + b[i].dx);
        out[i].dy = 0.5 * (a[i].dy + b[i].dy);
        out[i].g_cmd = 0.5 * (a[i].g_cmd + b[i].g_cmd);
    }
    return out;
}

bool all_done(const sim::SimState& st, const sim::TaskSpec& task) {
    return sim::current_stage(st, task) >= task.stages.size();
}

} // namespace

RunResult run_policy(const System& sys, const Config& cfg, PolicyKind kind,
                     sim::ScenarioKind scenario_kind, const sim::TaskSpec& task, int episodes,
                     std::uint64_t seed, int n_denoise) {
    if (n_denoise < 1) n_denoise = cfg.denoise_steps;
    const bool gated = kind == PolicyKind::Harmowam ||
                       kind == PolicyKind::HarmowamNoLatentsReactive ||
                       kind == PolicyKind::HarmowamNoLatentsPredictive ||
                       kind == PolicyKind::KeyframeAveraging;

    RunResult result;
    result.episodes = episodes;
    std::vector<int> transit_hits(task.stages.size(), 0);
    std::vector<int> inter_hits(task.stages.size(), 0);

    auto run_start = Clock::now();
    for (int e = 0; e < episodes; ++e) {
        std::string etag = std::to_string(e);
        sim::ScenarioConfig scen =
            sim::make_scenario(scenario_kind, derive_seed(seed, "scen/" + etag));
        sim::SimState state = sim::spawn_state(scen, task, derive_seed(seed, "ep/" + etag));
        std::vector<sim::SimState> traj{state};

        int steps = 0;
        int chunk_idx = 0;
        wm::WorldRollout cached_roll;
        bool have_cached = false;
        while (steps < cfg.step_cap && !all_done(state, task)) {
            std::string ctag = etag + "/" + std::to_string(chunk_idx);
            sim::Observation obs = sim::render(state, scen);
            auto tokens = experts::patch_tokens(sys.ex, obs.image);
            wm::Latent f_v = wm::encode(sys.world, obs);

            double score = 0.0;
            bool reactive_branch = false;
            if (gated) {
                score = gate::gate_score(sys.ex, tokens);
                reactive_branch = gate::route(score) == gate::Expert::Reactive;
                result.routing.push_back({e, steps, score, reactive_branch ? 0 : 1});
            }

            wm::WorldRollout roll;
            if (needs_rollout(kind, reactive_branch)) {
                if (!cfg.reroll_per_chunk && have_cached) {
                    roll = cached_roll;
                } else {
                    auto t0 = Clock::now();
                    roll = wm::rollout(sys.world, obs, task, cfg.horizon, n_denoise,
                                       derive_seed(seed, "roll/" + ctag));
                    result.timing.rollout_seconds +=
                        std::chrono::duration<double>(Clock::now() - t0).count();
                    ++result.timing.rollouts;
                    cached_roll = roll;
                    have_cached = true;
                }
            }

            auto predictive = [&](bool zero_latents) {
                experts::ConditioningBundle cond;
                cond.img_tokens = experts::flatten_tokens(tokens);
                cond.task_onehot.assign(sys.ex.tasks, 0.0);
                cond.task_onehot[task.id] = 1.0;
                cond.f_v = zero_latents ? wm::Latent(wm::kLatentDim, 0.0) : f_v;
                return experts::sample_chunk(sys.ex, cond, cfg.diffusion_steps,
                                             derive_seed(seed, "chunk/" + ctag));
            };

            std::vector<sim::Action> chunk;
            switch (kind) {
            case PolicyKind::Harmowam:
                chunk = reactive_branch ? experts::react_chunk(sys.ex, roll) : predictive(false);
                break;
            case PolicyKind::HarmowamNoLatentsReactive:
                chunk = reactive_branch ? experts::react_chunk(sys.ex, roll, true)
                                        : predictive(false);
                break;
            case PolicyKind::HarmowamNoLatentsPredictive:
                chunk = reactive_branch ? experts::react_chunk(sys.ex, roll) : predictive(true);
                break;
            case PolicyKind::ImagineThenExecute:
                chunk = experts::react_chunk(sys.ex, roll);
                break;
            case PolicyKind::JointModeling:
                chunk = predictive(false);
                break;
            case PolicyKind::GateAveraging:
                chunk = mean_chunks(experts::react_chunk(sys.ex, roll), predictive(false));
                break;
            case PolicyKind::KeyframeAveraging:
                if (reactive_branch) {
                    chunk = experts::react_chunk(sys.ex, roll);
                } else {
                    chunk = mean_chunks(experts::react_chunk(sys.ex, roll), predictive(false));
                }
                break;
            }

            for (std::size_t h = 0; h < chunk.size() && steps < cfg.step_cap; ++h) {
                if (cfg.gate_per_frame && gated && h > 0) {
                    // per-frame mode: re-plan as soon as the routing flips
                    auto now_tokens =
                        experts::patch_tokens(sys.ex, sim::render(state, scen).image);
                    bool now_reactive =
                        gate::route(gate::gate_score(sys.ex, now_tokens)) ==
                        gate::Expert::Reactive;
                    if (now_reactive != reactive_branch) break;
                }
                state = sim::step(state, chunk[h]);
                traj.push_back(state);
                ++steps;
                ++result.timing.actions;
            }
            ++chunk_idx;
        }

        auto inter = sim::check_stage_success(traj, task);
        bool chain = true;
        for (std::size_t k = 0; k < task.stages.size(); ++k) {
            bool reached = sim::transit_reached(traj, task, k, cfg.transit_radius);
            bool prior_ok = k == 0 || inter[k - 1];
            if (reached && prior_ok) ++transit_hits[k];
            if (inter[k]) ++inter_hits[k];
            chain = chain && inter[k];
        }
        if (chain) ++result.full_successes;
        ++result.timing.episodes;
    }
    result.timing.wall_seconds = std::chrono::duration<double>(Clock::now() - run_start).count();

    for (std::size_t k = 0; k < task.stages.size(); ++k) {
        EvalRow transit;
        transit.policy = policy_name(kind);
        transit.scenario = sim::scenario_kind_name(scenario_kind);
        transit.task = task.id;
        transit.stage = static_cast<int>(2 * k);
        transit.successes = transit_hits[k];
        transit.episodes = episodes;
        result.rows.push_back(transit);

        EvalRow inter_row = transit;
        inter_row.stage = static_cast<int>(2 * k + 1);
        inter_row.successes = inter_hits[k];
        result.rows.push_back(inter_row);
    }
    return result;
}

} // namespace wam::harness
