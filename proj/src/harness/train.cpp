#include "wam/harness/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "wam/core/adam.hpp"
#include "wam/core/checkpoint.hpp"
#include "wam/core/errors.hpp"
#include "wam/gate/gating.hpp"
#include "wam/sim/sim.hpp"

namespace wam::harness {

namespace {

namespace fs = std::filesystem;

sim::ScenarioConfig scenario_of(const DatasetView::EpisodeSpan& ep) {
    return sim::make_scenario(ep.kind, ep.scenario_seed);
}

std::vector<double> normalized_action(const sim::Action& a) {
    auto n = experts::normalize_action(a);
    return {n[0], n[1], n[2]};
}

/// Normalized flattened chunk of the actions taken from step t on, padded
/// with the zero action past the episode end.
std::vector<double> chunk_target(const DatasetView& data, const DatasetView::EpisodeSpan& ep,
                                 std::size_t t, int horizon) {
    std::vector<double> out;
    out.reserve(3 * horizon);
    for (int h = 0; h < horizon; ++h) {
        std::size_t idx = ep.begin + t + h;
        sim::Action a = idx < ep.end ? data.records[idx].action : sim::Action{0.0, 0.0, 0.0};
        auto n = experts::normalize_action(a);
        out.insert(out.end(), n.begin(), n.end());
    }
    return out;
}

struct LatentCache {
    std::vector<wm::Latent> z; // per record index
};

LatentCache build_latent_cache(const wm::WorldModel& model, const DatasetView& data) {
    LatentCache cache;
    cache.z.resize(data.records.size());
    for (const auto& ep : data.episodes) {
        sim::ScenarioConfig scen = scenario_of(ep);
        for (std::size_t i = ep.begin; i < ep.end; ++i) {
            cache.z[i] = wm::encode(model, sim::render(data.records[i].state, scen));
        }
    }
    return cache;
}

void write_metrics(const fs::path& path, const std::vector<std::string>& rows) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write metrics: " + path.string());
    f << "phase,step,metric,value\n";
    for (const auto& r : rows) f << r << '\n';
}

std::string metric_row(const std::string& phase, int step, const std::string& name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return phase + "," + std::to_string(step) + "," + name + "," + buf;
}

/// Eight-dim state summary the latent's pooled block-means are aligned to:
/// effector, gripper, held flag and up to two object positions, scaled to
/// [-1, 1]. Missing object slots park at -1.5.
std::vector<double> state_summary(const sim::SimState& st) {
    auto sc = [](double v) { return 2.0 * v - 1.0; };
    bool held = false;
    for (const auto& o : st.objects) held = held || o.held;
    std::vector<double> out{sc(st.effector.x), sc(st.effector.y),
                            st.gripper ? 1.0 : -1.0, held ? 1.0 : -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
        if (k < st.objects.size()) {
            out.push_back(sc(st.objects[k].pos.x));
            out.push_back(sc(st.objects[k].pos.y));
        } else {
            out.push_back(-1.5);
            out.push_back(-1.5);
        }
    }
    return out;
}

/// Constant 8x32 block-mean matrix: row j averages latent dims 4j..4j+3,
/// matching the expert-side channel pooling exactly.
core::Tensor pooling_matrix() {
    core::Tensor w({8, static_cast<std::size_t>(wm::kLatentDim)});
    for (int j = 0; j < 8; ++j) {
        for (int i = 0; i < 4; ++i) w[j * wm::kLatentDim + 4 * j + i] = 0.25;
    }
    return w;
}

/// Broad-coverage synthetic scene for autoencoder pretraining: random
/// positions over the whole table, any object/background code, random grip.
std::pair<sim::SimState, sim::ScenarioConfig> synthetic_scene(core::RngStream& rng) {
    sim::ScenarioConfig scen;
    scen.kind = sim::ScenarioKind::ID;
    scen.seed = rng.next_u64();
    scen.background = rng.uniform() < 0.5 ? sim::kTrainingBackground : sim::kHeldOutBackground;
    scen.distractors = rng.uniform() < 0.35 ? static_cast<int>(rng.next_below(9)) : 0;

    sim::TaskSpec task = sim::make_task(static_cast<int>(rng.next_below(sim::kNumTasks)));
    sim::SimState st;
    int zone_count = task.id == 0 ? 1 : 2;
    const sim::ZoneSpec zones[2] = {{{0.50, 0.08}, 0.05}, {{0.08, 0.50}, 0.05}};
    for (int z = 0; z < zone_count; ++z) st.zones.push_back(zones[z]);

    int nobj = 1 + static_cast<int>(rng.next_below(2));
    for (int k = 0; k < nobj; ++k) {
        sim::ObjectState obj;
        obj.pos = {rng.uniform(0.03, 0.97), rng.uniform(0.03, 0.97)};
        obj.shape = static_cast<int>(rng.next_below(sim::kNumObjectCodes));
        obj.color = static_cast<int>(rng.next_below(sim::kNumObjectCodes));
        st.objects.push_back(obj);
    }
    st.effector = {rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98)};
    double grip = rng.uniform();
    if (grip < 0.30 && !st.objects.empty()) {
        st.gripper = 1;
        st.objects[0].held = true;
        st.objects[0].pos = st.effector;
    } else if (grip < 0.45) {
        st.gripper = 1;
    } else {
        st.gripper = 0;
    }
    return {st, scen};
}

double held_out_recon_mae(const wm::WorldModel& model, const DatasetView& data, int max_frames) {
    double acc = 0.0;
    std::size_t n = 0;
    int used = 0;
    for (std::size_t e : data.held_episodes) {
        const auto& ep = data.episodes[e];
        sim::ScenarioConfig scen = scenario_of(ep);
        for (std::size_t i = ep.begin; i < ep.end && used < max_frames; i += 3, ++used) {
            sim::Observation obs = sim::render(data.records[i].state, scen);
            sim::Observation rec = wm::decode(model, wm::encode(model, obs));
            for (std::size_t p = 0; p < obs.image.size(); ++p) {
                acc += std::abs(obs.image[p] - rec.image[p]);
                ++n;
            }
        }
        if (used >= max_frames) break;
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

struct FlowProbe {
    std::vector<wm::FlowBatchItem> items;
};

/// Deterministic held-out probe batch for the stage-1 loss curve.
FlowProbe build_flow_probe(const wm::WorldModel& model, const DatasetView& data,
                           const LatentCache& cache, const Config& cfg, std::uint64_t seed,
                           int count) {
    FlowProbe probe;
    core::RngStream rng("flow-probe", seed);
    if (data.held_episodes.empty()) throw core::ContractError("no held-out episodes");
    for (int i = 0; i < count; ++i) {
        const auto& ep = data.episodes[data.held_episodes[rng.next_below(data.held_episodes.size())]];
        std::size_t len = ep.end - ep.begin;
        std::size_t t = rng.next_below(len);
        int s = 1 + static_cast<int>(rng.next_below(cfg.horizon));
        std::size_t u = std::min(ep.begin + t + s, ep.end - 1);
        wm::FlowBatchItem item;
        item.sample = wm::flow_interpolate(rng.normal_vec(wm::kLatentDim), cache.z[u],
                                           rng.uniform());
        item.z_current = cache.z[ep.begin + t];
        item.task_id = ep.task_id;
        item.future_step = s;
        probe.items.push_back(std::move(item));
    }
    (void)model;
    return probe;
}

} // namespace

// ---------------------------------------------------------------------------

DatasetView DatasetView::load(const fs::path& dataset_path, double held_out_fraction) {
    DatasetView v;
    v.records = sim::read_dataset(dataset_path);
    if (v.records.empty()) throw core::IoError("empty dataset: " + dataset_path.string());

    std::size_t begin = 0;
    for (std::size_t i = 1; i <= v.records.size(); ++i) {
        if (i == v.records.size() || v.records[i].episode != v.records[begin].episode) {
            EpisodeSpan ep;
            ep.task_id = v.records[begin].task_id;
            ep.kind = v.records[begin].kind;
            ep.scenario_seed = v.records[begin].scenario_seed;
            ep.begin = begin;
            ep.end = i;
            v.episodes.push_back(ep);
            begin = i;
        }
    }

    // the last fraction of each task's episodes is held out
    std::map<int, std::vector<std::size_t>> by_task;
    for (std::size_t e = 0; e < v.episodes.size(); ++e) {
        by_task[v.episodes[e].task_id].push_back(e);
    }
    for (auto& [task, eps] : by_task) {
        std::size_t held = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(held_out_fraction * eps.size())));
        if (held >= eps.size()) held = eps.size() > 1 ? eps.size() - 1 : 0;
        std::size_t cut = eps.size() - held;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            (i < cut ? v.train_episodes : v.held_episodes).push_back(eps[i]);
        }
    }
    return v;
}

void gen_data(const Config& cfg, std::uint64_t seed, const fs::path& out_dir) {
    std::vector<sim::Record> records;
    sim::Manifest manifest;

    for (int task_id = 0; task_id < cfg.tasks; ++task_id) {
        sim::TaskSpec task = sim::make_task(task_id);
        gate::ContactRule rule = gate::default_contact_rule(task);
        for (int e = 0; e < cfg.episodes_per_task; ++e) {
            std::string tag = std::to_string(task_id) + "/" + std::to_string(e);
            std::uint64_t scen_seed = derive_seed(seed, "scen/" + tag);
            std::uint64_t ep_seed = derive_seed(seed, "ep/" + tag);
            sim::ScenarioConfig scen = sim::make_scenario(sim::ScenarioKind::ID, scen_seed);
            sim::SimState state = sim::spawn_state(scen, task, ep_seed);

            std::vector<std::pair<sim::SimState, sim::Action>> traj;
            std::vector<sim::SimState> states{state};
            for (int t = 0; t < 250; ++t) {
                sim::ExpertAction ea = sim::scripted_expert(states.back(), task);
                traj.emplace_back(states.back(), ea.action);
                if (ea.done) break;
                states.push_back(sim::step(states.back(), ea.action));
            }
            std::vector<int> labels = gate::label_trajectory(traj, cfg.gate_window, rule);

            int ep_index = task_id * cfg.episodes_per_task + e;
            for (std::size_t t = 0; t < traj.size(); ++t) {
                sim::Record r;
                r.episode = ep_index;
                r.t = static_cast<int>(t);
                r.state = traj[t].first;
                r.action = traj[t].second;
                r.task_id = task_id;
                r.kind = sim::ScenarioKind::ID;
                r.scenario_seed = scen_seed;
                r.gate = labels[t];
                records.push_back(std::move(r));
            }

            auto ok = sim::check_stage_success(states, task);
            bool all_ok = true;
            for (bool s : ok) all_ok = all_ok && s;
            manifest.episodes.push_back({ep_index, task_id, sim::ScenarioKind::ID, scen_seed,
                                         ep_seed, static_cast<int>(traj.size()), all_ok});
        }
    }

    fs::create_directories(out_dir);
    sim::write_dataset(out_dir / "dataset.txt", records);
    sim::write_manifest(out_dir / "manifest.txt", manifest);
}

void label_dataset(const fs::path& src, const fs::path& dst, const Config& cfg) {
    DatasetView data = DatasetView::load(src, 0.0);
    for (const auto& ep : data.episodes) {
        sim::TaskSpec task = sim::make_task(data.records[ep.begin].task_id);
        gate::ContactRule rule = gate::default_contact_rule(task);
        std::vector<std::pair<sim::SimState, sim::Action>> traj;
        for (std::size_t i = ep.begin; i < ep.end; ++i) {
            traj.emplace_back(data.records[i].state, data.records[i].action);
        }
        std::vector<int> labels = gate::label_trajectory(traj, cfg.gate_window, rule);
        for (std::size_t i = ep.begin; i < ep.end; ++i) {
            data.records[i].gate = labels[i - ep.begin];
        }
    }
    sim::write_dataset(dst, data.records);
}

// ---------------------------------------------------------------------------

Stage1Result train_stage1(const DatasetView& data, const Config& cfg, std::uint64_t seed,
                          const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> metrics;

    wm::WorldModel model = wm::build_world_model(cfg.horizon, derive_seed(seed, "wm-init"));
    core::AdamHyper hyper;
    hyper.lr = cfg.lr;

    // --- autoencoder: broad pretraining then demonstration fine-tuning
    {
        core::AdamState adam;
        core::RngStream rng("ae-train", derive_seed(seed, "ae"));
        int total = cfg.ae_pretrain_steps + cfg.ae_finetune_steps;
        for (int step = 0; step < total; ++step) {
            bool pretrain = step < cfg.ae_pretrain_steps;
            hyper.lr = step < 3 * total / 4 ? cfg.lr : 0.2 * cfg.lr;
            core::Graph g;
            std::vector<core::Graph::NodeId> losses;
            for (int b = 0; b < cfg.batch_size; ++b) {
                sim::Observation obs;
                sim::SimState frame_state;
                std::vector<bool> cover;
                if (pretrain) {
                    auto [st, scen] = synthetic_scene(rng);
                    obs = sim::render(st, scen);
                    cover = sim::stamp_coverage(st);
                    frame_state = st;
                } else {
                    const auto& ep = data.episodes[data.train_episodes[rng.next_below(
                        data.train_episodes.size())]];
                    std::size_t i = ep.begin + rng.next_below(ep.end - ep.begin);
                    obs = sim::render(data.records[i].state, scenario_of(ep));
                    cover = sim::stamp_coverage(data.records[i].state);
                    frame_state = data.records[i].state;
                }
                // stamps still get a mild emphasis so decoded frames keep
                // legible markers for the patch pathway
                core::Tensor weights({static_cast<std::size_t>(wm::kObsDim)});
                for (int pidx = 0; pidx < sim::kGrid * sim::kGrid; ++pidx) {
                    double w = cover[pidx] ? 3.0 : 1.0;
                    weights[pidx * 3] = w;
                    weights[pidx * 3 + 1] = w;
                    weights[pidx * 3 + 2] = w;
                }
                weights[wm::kObsDim - 3] = 3.0;
                weights[wm::kObsDim - 2] = 3.0;
                weights[wm::kObsDim - 1] = 3.0;
                auto in = g.input(core::Tensor::vec(wm::obs_to_vec(obs)));
                auto z = core::mlp_node(g, model.params, model.enc, in);
                auto rec = core::mlp_node(g, model.params, model.dec, z);
                auto recon = g.weighted_mse_mean(rec, in, std::move(weights));
                // align the latent's pooled block-means with the state
                // summary so the expert-side channel pooling reads geometry
                auto pooled = g.linear(z, g.input(pooling_matrix()),
                                       g.input(core::Tensor({8})), "wm.pool");
                auto align = g.mse_mean(pooled, g.input(core::Tensor::vec(
                                                    state_summary(frame_state))));
                losses.push_back(g.add(recon, g.scale(align, 1.5)));
            }
            auto loss = g.mean_scalars(losses);
            core::GradMap grads = g.backward(loss, model.params, "wm.");
            core::adam_step_subset(model.params, grads, adam, hyper);
            if (step % 1000 == 0) {
                metrics.push_back(metric_row("ae", step, "train_mse", g.value(loss)[0]));
            }
        }
    }
    double recon = held_out_recon_mae(model, data, 400);
    metrics.push_back(metric_row("ae", cfg.ae_pretrain_steps + cfg.ae_finetune_steps,
                                 "recon_mae_held", recon));

    // --- flow matching on the frozen encoder's latents
    LatentCache cache = build_latent_cache(model, data);
    FlowProbe probe = build_flow_probe(model, data, cache, cfg, derive_seed(seed, "probe"), 512);
    double flow_init = wm::stage1_loss(model, probe.items);
    metrics.push_back(metric_row("flow", 0, "held_loss", flow_init));

    {
        core::AdamState adam;
        core::RngStream rng("flow-train", derive_seed(seed, "flow"));
        for (int step = 0; step < cfg.flow_steps; ++step) {
            hyper.lr = step < 3 * cfg.flow_steps / 4 ? cfg.lr : 0.2 * cfg.lr;
            std::vector<wm::FlowBatchItem> batch;
            batch.reserve(cfg.batch_size);
            for (int b = 0; b < cfg.batch_size; ++b) {
                const auto& ep = data.episodes[data.train_episodes[rng.next_below(
                    data.train_episodes.size())]];
                std::size_t len = ep.end - ep.begin;
                std::size_t t = rng.next_below(len);
                int s = 1 + static_cast<int>(rng.next_below(cfg.horizon));
                std::size_t u = std::min(ep.begin + t + s, ep.end - 1);
                wm::FlowBatchItem item;
                item.sample = wm::flow_interpolate(rng.normal_vec(wm::kLatentDim), cache.z[u],
                                                   rng.uniform());
                item.z_current = cache.z[ep.begin + t];
                item.task_id = ep.task_id;
                item.future_step = s;
                batch.push_back(std::move(item));
            }
            core::Graph g;
            auto loss = wm::stage1_loss_node(g, model, batch);
            core::GradMap grads = g.backward(loss, model.params, "wm.flow");
            core::adam_step_subset(model.params, grads, adam, hyper);
            if (step % 2000 == 0) {
                metrics.push_back(metric_row("flow", step, "train_loss", g.value(loss)[0]));
            }
        }
    }
    double flow_final = wm::stage1_loss(model, probe.items);
    metrics.push_back(metric_row("flow", cfg.flow_steps, "held_loss", flow_final));

    core::save_checkpoint(model.params, out_dir / "wm.ckpt");
    write_metrics(out_dir / "metrics_stage1.csv", metrics);

    Stage1Result res;
    res.model = std::move(model);
    res.recon_mae = recon;
    res.flow_loss_init = flow_init;
    res.flow_loss_final = flow_final;
    return res;
}

// ---------------------------------------------------------------------------

double stage2_total(double pred, double react, double gate, const LossWeights& weights) {
    for (double v : {pred, react, gate}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw core::ContractError("stage2_total: loss components must be finite and >= 0");
        }
    }
    return pred + weights.lambda_react * react + weights.lambda_gate * gate;
}

namespace {

struct Stage2Sample {
    std::size_t episode = 0; // index into data.episodes
    std::size_t t = 0;       // offset within episode
    int future = 1;          // reactive future step
    int k = 1;               // diffusion step
};

Stage2Sample draw_stage2_sample(const DatasetView& data, const Config& cfg,
                                core::RngStream& rng, bool held) {
    const auto& pool = held ? data.held_episodes : data.train_episodes;
    Stage2Sample s;
    s.episode = pool[rng.next_below(pool.size())];
    const auto& ep = data.episodes[s.episode];
    s.t = rng.next_below(ep.end - ep.begin);
    s.future = 1 + static_cast<int>(rng.next_below(cfg.horizon));
    s.k = 1 + static_cast<int>(rng.next_below(experts::kDiffusionK));
    return s;
}

struct Stage2Losses {
    double pred = 0.0, react = 0.0, gate = 0.0;
};

/// Pure (ungraphed) evaluation of the three component losses on a probe set;
/// used for the held-out curves and the improvement properties.
Stage2Losses eval_stage2_losses(const experts::ExpertModels& ex, const wm::WorldModel& model,
                                const DatasetView& data, const LatentCache& cache,
                                const Config& cfg, std::uint64_t seed, int count) {
    (void)model;
    core::RngStream rng("s2-probe", seed);
    Stage2Losses out;
    std::vector<double> gate_scores;
    std::vector<int> gate_labels;
    for (int i = 0; i < count; ++i) {
        Stage2Sample s = draw_stage2_sample(data, cfg, rng, true);
        const auto& ep = data.episodes[s.episode];
        sim::ScenarioConfig scen = scenario_of(ep);
        const sim::Record& rec = data.records[ep.begin + s.t];
        sim::Observation obs = sim::render(rec.state, scen);
        auto tokens = experts::patch_tokens(ex, obs.image);

        // predictive
        experts::ConditioningBundle cond;
        cond.img_tokens = experts::flatten_tokens(tokens);
        cond.task_onehot.assign(ex.tasks, 0.0);
        cond.task_onehot[ep.task_id] = 1.0;
        cond.f_v = cache.z[ep.begin + s.t];
        std::vector<double> chunk = chunk_target(data, ep, s.t, cfg.horizon);
        chunk.resize(experts::kChunkDim, 0.0);
        experts::DiffusionSample ds = experts::noise_actions(chunk, s.k, ex.schedule, rng);
        std::vector<double> eps = experts::eps_predict(ex, ds.noisy, ds.k, cond);
        double sq = 0.0;
        for (std::size_t d = 0; d < eps.size(); ++d) {
            double diff = eps[d] - ds.noise[d];
            sq += diff * diff;
        }
        out.pred += sq;

        // reactive: uniform frame within the episode
        std::size_t u = ep.begin + rng.next_below(ep.end - ep.begin);
        sim::Observation frame = wm::decode(model, cache.z[u]);
        sim::Action pred_a = experts::react_predict(ex, frame, cache.z[u]);
        auto pn = experts::normalize_action(pred_a);
        auto tn = experts::normalize_action(data.records[u].action);
        out.react += experts::react_loss({pn[0], pn[1], pn[2]}, {tn[0], tn[1], tn[2]});

        // gate
        gate_scores.push_back(gate::gate_score(ex, tokens));
        gate_labels.push_back(rec.gate >= 0 ? rec.gate : 0);
    }
    out.pred /= count;
    out.react /= count;
    out.gate = gate::gate_loss(gate_scores, gate_labels);
    return out;
}

double eval_gate_accuracy(const experts::ExpertModels& ex, const DatasetView& data,
                          int stride = 2) {
    std::size_t hit = 0, total = 0;
    for (std::size_t e : data.held_episodes) {
        const auto& ep = data.episodes[e];
        sim::ScenarioConfig scen = scenario_of(ep);
        for (std::size_t i = ep.begin; i < ep.end; i += stride) {
            const sim::Record& rec = data.records[i];
            if (rec.gate < 0) continue;
            auto tokens = experts::patch_tokens(ex, sim::render(rec.state, scen).image);
            int predicted = gate::gate_score(ex, tokens) > 0.5 ? 1 : 0;
            hit += predicted == rec.gate ? 1 : 0;
            ++total;
        }
    }
    return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

} // namespace

Stage2Result train_stage2(const DatasetView& data, const fs::path& wm_ckpt, const Config& cfg,
                          std::uint64_t seed, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    wm::WorldModel model = wm::world_model_from_checkpoint(wm_ckpt, cfg.horizon);
    LatentCache cache = build_latent_cache(model, data);

    // gate labels must exist; fall back to relabeling on the fly
    DatasetView labeled = data;
    bool missing = false;
    for (const auto& r : labeled.records) missing = missing || r.gate < 0;
    if (missing) {
        for (const auto& ep : labeled.episodes) {
            sim::TaskSpec task = sim::make_task(labeled.records[ep.begin].task_id);
            gate::ContactRule rule = gate::default_contact_rule(task);
            std::vector<std::pair<sim::SimState, sim::Action>> traj;
            for (std::size_t i = ep.begin; i < ep.end; ++i) {
                traj.emplace_back(labeled.records[i].state, labeled.records[i].action);
            }
            auto labels = gate::label_trajectory(traj, cfg.gate_window, rule);
            for (std::size_t i = ep.begin; i < ep.end; ++i) {
                labeled.records[i].gate = labels[i - ep.begin];
            }
        }
    }
    const DatasetView& d = labeled;

    experts::ExpertModels ex = experts::build_experts(derive_seed(seed, "ex-init"));
    core::AdamState adam;
    core::AdamHyper hyper;
    hyper.lr = cfg.lr_stage2;

    // frame pools for the reactive branch: uniform coverage plus an index of
    // gripper flips, which are rare but carry the grasp/release timing signal
    std::vector<std::size_t> train_frames;
    std::vector<std::size_t> flip_frames;
    std::vector<std::size_t> frame_episode(d.records.size(), 0);
    for (std::size_t e : d.train_episodes) {
        const auto& ep = d.episodes[e];
        for (std::size_t i = ep.begin; i < ep.end; ++i) {
            train_frames.push_back(i);
            frame_episode[i] = e;
            int cmd = d.records[i].action.g_cmd > 0.5 ? 1 : 0;
            if (cmd != d.records[i].state.gripper) flip_frames.push_back(i);
        }
    }

    std::vector<std::string> metrics;
    Stage2Losses init = eval_stage2_losses(ex, model, d, cache, cfg, derive_seed(seed, "pr"), 256);
    metrics.push_back(metric_row("stage2", 0, "held_pred", init.pred));
    metrics.push_back(metric_row("stage2", 0, "held_react", init.react));
    metrics.push_back(metric_row("stage2", 0, "held_gate", init.gate));

    core::RngStream rng("stage2-train", derive_seed(seed, "s2"));
    for (int step = 0; step < cfg.stage2_steps; ++step) {
        // settle into the minimum once the bulk of training is done
        hyper.lr = step < 3 * cfg.stage2_steps / 4 ? cfg.lr_stage2 : 0.2 * cfg.lr_stage2;
        core::Graph g;
        std::vector<core::Graph::NodeId> pred_terms, react_terms;
        std::vector<core::Graph::NodeId> gate_scores;
        std::vector<double> gate_labels;

        for (int b = 0; b < cfg.batch_size; ++b) {
            Stage2Sample s = draw_stage2_sample(d, cfg, rng, false);
            const auto& ep = d.episodes[s.episode];
            sim::ScenarioConfig scen = scenario_of(ep);
            const sim::Record& rec = d.records[ep.begin + s.t];
            sim::Observation obs = sim::render(rec.state, scen);
            auto tokens = experts::patch_token_nodes(g, ex, obs.image);

            // predictive: denoise the noisy chunk conditioned on tokens/task/F_V
            std::vector<double> chunk = chunk_target(d, ep, s.t, cfg.horizon);
            chunk.resize(experts::kChunkDim, 0.0);
            experts::DiffusionSample ds = experts::noise_actions(chunk, s.k, ex.schedule, rng);
            std::vector<double> onehot(ex.tasks, 0.0);
            onehot[ep.task_id] = 1.0;
            auto eps_hat = experts::trunk_node(g, ex, ds.noisy, ds.k, tokens, onehot,
                                               cache.z[ep.begin + s.t]);
            auto eps_err = g.sub(eps_hat, g.input(core::Tensor::vec(ds.noise)));
            pred_terms.push_back(g.squared_norm(eps_err));

            // reactive: one frame per sample; uniform over frames with flips
            // oversampled, or a rollout frame in predicted mode
            sim::Observation frame;
            wm::Latent frame_latent;
            std::size_t u;
            if (cfg.react_train_on_predicted) {
                u = std::min(ep.begin + s.t + s.future, ep.end - 1);
                wm::WorldRollout r = wm::rollout(
                    model, obs, sim::make_task(ep.task_id), cfg.horizon, cfg.denoise_steps,
                    derive_seed(seed, "s2roll/" + std::to_string(step * cfg.batch_size + b)));
                frame = r.frames[s.future - 1];
                frame_latent = r.latents[s.future];
            } else {
                bool hard = !flip_frames.empty() && rng.uniform() < 0.15;
                u = hard ? flip_frames[rng.next_below(flip_frames.size())]
                         : train_frames[rng.next_below(train_frames.size())];
                // ground-truth frame rendered by the world model's decoder:
                // the same domain the rollout frames come from
                frame = wm::decode(model, cache.z[u]);
                frame_latent = cache.z[u];
            }
            auto frame_tokens = experts::patch_token_nodes(g, ex, frame.image);
            auto act_hat = experts::dori_node(
                g, ex, frame_tokens, experts::latent_tokens(frame_latent, experts::kPoolFactor));
            auto target = normalized_action(d.records[u].action);
            react_terms.push_back(g.smooth_l1_mean(
                act_hat, g.input(core::Tensor::vec(target)), experts::kSmoothL1Beta));

            // gate: BCE on the current frame's label
            gate_scores.push_back(experts::gate_score_node(g, ex, tokens));
            gate_labels.push_back(static_cast<double>(rec.gate));
        }

        auto pred_loss = g.mean_scalars(pred_terms);
        auto react_loss = g.mean_scalars(react_terms);
        auto gate_loss = g.bce_mean(g.concat(gate_scores),
                                    g.input(core::Tensor::vec(gate_labels)));
        auto total = g.add(pred_loss, g.add(g.scale(react_loss, cfg.weights.lambda_react),
                                            g.scale(gate_loss, cfg.weights.lambda_gate)));
        core::GradMap grads = g.backward(total, ex.params);
        core::adam_step(ex.params, grads, adam, hyper);

        if (step % 2000 == 0) {
            metrics.push_back(metric_row("stage2", step, "train_total", g.value(total)[0]));
        }
    }

    // gate-head polish: the shared encoder is converged, so finish the gate
    // coordinate of the stage-2 objective on cached pooled tokens
    {
        std::vector<std::vector<double>> pooled(d.records.size());
        std::vector<std::size_t> train_idx;
        for (std::size_t e : d.train_episodes) {
            const auto& ep = d.episodes[e];
            sim::ScenarioConfig scen = scenario_of(ep);
            for (std::size_t i = ep.begin; i < ep.end; ++i) {
                auto tokens = experts::patch_tokens(ex, sim::render(d.records[i].state, scen).image);
                std::vector<double> mean(experts::kTokenDim, 0.0);
                for (const auto& tok : tokens) {
                    for (int k = 0; k < experts::kTokenDim; ++k) mean[k] += tok[k];
                }
                double inv = 1.0 / static_cast<double>(tokens.size());
                for (double& v : mean) v *= inv;
                pooled[i] = std::move(mean);
                train_idx.push_back(i);
            }
        }
        core::AdamState polish_adam;
        core::RngStream polish_rng("gate-polish", derive_seed(seed, "polish"));
        for (int step = 0; step < 4000; ++step) {
            core::Graph g;
            std::vector<core::Graph::NodeId> scores;
            std::vector<double> labels;
            for (int b = 0; b < 2 * cfg.batch_size; ++b) {
                std::size_t i = train_idx[polish_rng.next_below(train_idx.size())];
                scores.push_back(
                    core::mlp_node(g, ex.params, ex.gate, g.input(core::Tensor::vec(pooled[i]))));
                labels.push_back(static_cast<double>(d.records[i].gate));
            }
            auto loss = g.bce_mean(g.concat(scores), g.input(core::Tensor::vec(labels)));
            core::GradMap grads = g.backward(loss, ex.params, "ex.gate");
            core::adam_step_subset(ex.params, grads, polish_adam, hyper);
        }
    }

    Stage2Losses fin = eval_stage2_losses(ex, model, d, cache, cfg, derive_seed(seed, "pr"), 256);
    double acc = eval_gate_accuracy(ex, d);
    metrics.push_back(metric_row("stage2", cfg.stage2_steps, "held_pred", fin.pred));
    metrics.push_back(metric_row("stage2", cfg.stage2_steps, "held_react", fin.react));
    metrics.push_back(metric_row("stage2", cfg.stage2_steps, "held_gate", fin.gate));
    metrics.push_back(metric_row("stage2", cfg.stage2_steps, "gate_accuracy", acc));

    core::save_checkpoint(ex.params, out_dir / "experts.ckpt");
    write_metrics(out_dir / "metrics_stage2.csv", metrics);

    Stage2Result res;
    res.models = std::move(ex);
    res.pred_init = init.pred;
    res.react_init = init.react;
    res.gate_init = init.gate;
    res.pred_final = fin.pred;
    res.react_final = fin.react;
    res.gate_final = fin.gate;
    res.gate_accuracy = acc;
    return res;
}

GateTrainResult train_gate_only(const DatasetView& data, const Config& cfg, std::uint64_t seed,
                                const experts::ExpertModels& base) {
    auto t0 = std::chrono::steady_clock::now();
    experts::ExpertModels ex = base;

    // fresh gate head on top of the frozen visual tokens
    core::RngStream init_rng("gate-reinit", derive_seed(seed, "gate-init"));
    for (std::size_t l = 0; l < ex.gate.layers(); ++l) {
        const core::Tensor& w = ex.params.get(ex.gate.weight_name(l));
        std::size_t in = w.shape()[1];
        double bound = std::sqrt(3.0 / static_cast<double>(in));
        std::vector<double> fresh(w.size());
        for (double& v : fresh) v = init_rng.uniform(-bound, bound);
        ex.params.update(ex.gate.weight_name(l), fresh);
        ex.params.update(ex.gate.bias_name(l),
                         std::vector<double>(ex.params.get(ex.gate.bias_name(l)).size(), 0.0));
    }

    // the tokens are reused, not retrained: pool them once per frame
    struct Item {
        std::vector<double> pooled;
        double label;
        bool held;
    };
    std::vector<Item> items;
    std::vector<char> is_held_episode(data.episodes.size(), 0);
    for (std::size_t e : data.held_episodes) is_held_episode[e] = 1;
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        const auto& ep = data.episodes[e];
        sim::ScenarioConfig scen = scenario_of(ep);
        for (std::size_t i = ep.begin; i < ep.end; ++i) {
            const sim::Record& rec = data.records[i];
            auto tokens = experts::patch_tokens(ex, sim::render(rec.state, scen).image);
            Item it;
            it.pooled.assign(experts::kTokenDim, 0.0);
            for (const auto& tok : tokens) {
                for (int d = 0; d < experts::kTokenDim; ++d) it.pooled[d] += tok[d];
            }
            double inv = 1.0 / static_cast<double>(tokens.size());
            for (double& v : it.pooled) v *= inv;
            it.label = static_cast<double>(std::max(rec.gate, 0));
            it.held = is_held_episode[e] != 0;
            items.push_back(std::move(it));
        }
    }
    std::vector<std::size_t> train_items;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].held) train_items.push_back(i);
    }

    core::AdamState adam;
    core::AdamHyper hyper;
    hyper.lr = cfg.lr_stage2;
    core::RngStream rng("gate-train", derive_seed(seed, "gate"));
    int steps = std::max(4000, cfg.stage2_steps / 3);
    for (int step = 0; step < steps; ++step) {
        core::Graph g;
        std::vector<core::Graph::NodeId> scores;
        std::vector<double> labels;
        for (int b = 0; b < 2 * cfg.batch_size; ++b) {
            const Item& it = items[train_items[rng.next_below(train_items.size())]];
            auto in = g.input(core::Tensor::vec(it.pooled));
            scores.push_back(core::mlp_node(g, ex.params, ex.gate, in));
            labels.push_back(it.label);
        }
        auto loss = g.bce_mean(g.concat(scores), g.input(core::Tensor::vec(labels)));
        core::GradMap grads = g.backward(loss, ex.params, "ex.gate");
        core::adam_step_subset(ex.params, grads, adam, hyper);
    }

    std::size_t hit = 0, total = 0;
    for (const Item& it : items) {
        if (!it.held) continue;
        core::Tensor s = core::mlp_apply(ex.params, ex.gate, core::Tensor::vec(it.pooled));
        hit += (s[0] > 0.5 ? 1.0 : 0.0) == it.label ? 1 : 0;
        ++total;
    }

    GateTrainResult res;
    res.accuracy = total ? static_cast<double>(hit) / total : 0.0;
    res.models = std::move(ex);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace wam::harness
