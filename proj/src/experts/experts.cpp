#include "wam/experts/experts.hpp"

#include <algorithm>
#include <cmath>

#include "wam/core/checkpoint.hpp"
#include "wam/core/errors.hpp"

namespace wam::experts {

std::array<double, 3> normalize_action(const sim::Action& a) {
    return {a.dx / sim::kDeltaMax, a.dy / sim::kDeltaMax, 2.0 * a.g_cmd - 1.0};
}

sim::Action denormalize_action(const double* v) {
    sim::Action a;
    a.dx = std::clamp(v[0], -1.0, 1.0) * sim::kDeltaMax;
    a.dy = std::clamp(v[1], -1.0, 1.0) * sim::kDeltaMax;
    a.g_cmd = std::clamp(0.5 * (v[2] + 1.0), 0.0, 1.0);
    return a;
}

// ---------------------------------------------------------------------------

NoiseSchedule cosine_schedule(int K) {
    if (K < 1) throw core::ContractError("cosine_schedule: K must be >= 1");
    NoiseSchedule s;
    s.K = K;
    s.alpha_bar.resize(K + 1);
    const double offset = 0.008;
    auto f = [&](double k) {
        double x = ((k / K) + offset) / (1.0 + offset) * (M_PI / 2.0);
        double c = std::cos(x);
        return c * c;
    };
    double f0 = f(0.0);
    for (int k = 0; k <= K; ++k) {
        s.alpha_bar[k] = std::clamp(f(static_cast<double>(k)) / f0, 1e-6, 1.0);
    }
    s.alpha_bar[0] = 1.0;
    return s;
}

DiffusionSample noise_actions(const std::vector<double>& chunk, int k,
                              const NoiseSchedule& schedule, core::RngStream& rng) {
    if (k < 1 || k > schedule.K) throw core::ContractError("noise_actions: k out of range");
    DiffusionSample out;
    out.clean = chunk;
    out.k = k;
    out.noise = rng.normal_vec(chunk.size());
    out.noisy.resize(chunk.size());
    double ab = schedule.alpha_bar[k];
    double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
        out.noisy[i] = sa * chunk[i] + sb * out.noise[i];
    }
    return out;
}

std::vector<double> posterior_mean(const NoiseSchedule& schedule, int k_hi, int k_lo,
                                   const std::vector<double>& noisy,
                                   const std::vector<double>& clean_estimate) {
    if (k_lo < 0 || k_hi <= k_lo || k_hi > schedule.K) {
        throw core::ContractError("posterior_mean: bad step pair");
    }
    double ab_hi = schedule.alpha_bar[k_hi];
    double ab_lo = schedule.alpha_bar[k_lo];
    double alpha = ab_hi / ab_lo;
    double denom = 1.0 - ab_hi;
    double c_clean = std::sqrt(ab_lo) * (1.0 - alpha) / denom;
    double c_noisy = std::sqrt(alpha) * (1.0 - ab_lo) / denom;
    std::vector<double> mean(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        mean[i] = c_clean * clean_estimate[i] + c_noisy * noisy[i];
    }
    return mean;
}

// ---------------------------------------------------------------------------

namespace {

core::MlpSpec patch_spec() {
    std::size_t in = kPatchSize * kPatchSize * 3 + 2;
    return {"ex.patch", {in, 64, kTokenDim}, {core::Act::Relu, core::Act::Linear}};
}

core::MlpSpec trunk_spec(int tasks) {
    std::size_t in = kChunkDim + 5 + kPatchTokens * kTokenDim + static_cast<std::size_t>(tasks) +
                     wm::kLatentDim;
    return {"ex.trunk", {in, 192, 128, kChunkDim},
            {core::Act::Relu, core::Act::Relu, core::Act::Linear}};
}

core::MlpSpec dori_spec() {
    // reads the two group means: patch tokens and pooled-latent tokens
    return {"ex.dori", {2 * kTokenDim, 96, 96, kActionDim},
            {core::Act::Relu, core::Act::Relu, core::Act::Linear}};
}

core::MlpSpec gate_spec() {
    return {"ex.gate", {kTokenDim, 64, 64, 1},
            {core::Act::Relu, core::Act::Relu, core::Act::Sigmoid}};
}

} // namespace

ExpertModels build_experts(std::uint64_t init_seed, int tasks) {
    ExpertModels m;
    m.tasks = tasks;
    m.patch = patch_spec();
    m.trunk = trunk_spec(tasks);
    m.dori = dori_spec();
    m.gate = gate_spec();
    m.schedule = cosine_schedule(kDiffusionK);
    core::RngStream rng("experts-init", init_seed);
    core::init_mlp(m.params, m.patch, rng);
    core::init_mlp(m.params, m.trunk, rng);
    core::init_mlp(m.params, m.dori, rng);
    core::init_mlp(m.params, m.gate, rng);
    return m;
}

ExpertModels experts_from_checkpoint(const std::filesystem::path& path, int tasks) {
    ExpertModels m;
    m.tasks = tasks;
    m.patch = patch_spec();
    m.trunk = trunk_spec(tasks);
    m.dori = dori_spec();
    m.gate = gate_spec();
    m.schedule = cosine_schedule(kDiffusionK);
    m.params = core::load_checkpoint(path);
    if (!m.params.has(m.trunk.weight_name(0))) {
        throw core::ConfigError("checkpoint lacks expert parameters: " + path.string());
    }
    return m;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> patch_input(const std::vector<double>& image, int pi, int pj) {
    std::vector<double> in;
    in.reserve(kPatchSize * kPatchSize * 3 + 2);
    for (int di = 0; di < kPatchSize; ++di) {
        int i = pi * kPatchSize + di;
        for (int dj = 0; dj < kPatchSize; ++dj) {
            int j = pj * kPatchSize + dj;
            std::size_t base = (static_cast<std::size_t>(i) * sim::kGrid + j) * 3;
            in.push_back(image[base]);
            in.push_back(image[base + 1]);
            in.push_back(image[base + 2]);
        }
    }
    in.push_back((pj + 0.5) / kPatchGrid); // patch-center x
    in.push_back((pi + 0.5) / kPatchGrid); // patch-center y
    return in;
}

} // namespace

std::vector<std::vector<double>> patch_tokens(const ExpertModels& m,
                                              const std::vector<double>& image) {
    if (image.size() != static_cast<std::size_t>(sim::kGrid) * sim::kGrid * 3) {
        throw core::DimensionError("patch_tokens: image does not match the patch grid");
    }
    std::vector<std::vector<double>> tokens;
    tokens.reserve(kPatchTokens);
    for (int pi = 0; pi < kPatchGrid; ++pi) {
        for (int pj = 0; pj < kPatchGrid; ++pj) {
            core::Tensor out = core::mlp_apply(
                m.params, m.patch, core::Tensor::vec(patch_input(image, pi, pj)));
            tokens.push_back(out.vec_data());
        }
    }
    return tokens;
}

std::vector<double> flatten_tokens(const std::vector<std::vector<double>>& tokens) {
    std::vector<double> out;
    out.reserve(tokens.size() * kTokenDim);
    for (const auto& t : tokens) out.insert(out.end(), t.begin(), t.end());
    return out;
}

std::vector<core::Graph::NodeId> patch_token_nodes(core::Graph& g, const ExpertModels& m,
                                                   const std::vector<double>& image) {
    std::vector<core::Graph::NodeId> nodes;
    nodes.reserve(kPatchTokens);
    for (int pi = 0; pi < kPatchGrid; ++pi) {
        for (int pj = 0; pj < kPatchGrid; ++pj) {
            auto in = g.input(core::Tensor::vec(patch_input(image, pi, pj)));
            nodes.push_back(core::mlp_node(g, m.params, m.patch, in));
        }
    }
    return nodes;
}

// ---------------------------------------------------------------------------

std::vector<double> tau_features(int k, int K) {
    double u = static_cast<double>(k) / static_cast<double>(K);
    return {u, std::sin(2.0 * M_PI * u), std::cos(2.0 * M_PI * u),
            std::sin(4.0 * M_PI * u), std::cos(4.0 * M_PI * u)};
}

namespace {

std::vector<double> trunk_input(const ExpertModels& m, const std::vector<double>& noisy,
                                int k, const ConditioningBundle& cond) {
    if (static_cast<int>(cond.task_onehot.size()) != m.tasks) {
        throw core::DimensionError("conditioning: task one-hot width mismatch");
    }
    std::vector<double> in;
    in.reserve(m.trunk.in_width());
    in.insert(in.end(), noisy.begin(), noisy.end());
    std::vector<double> tau = tau_features(k, m.schedule.K);
    in.insert(in.end(), tau.begin(), tau.end());
    in.insert(in.end(), cond.img_tokens.begin(), cond.img_tokens.end());
    in.insert(in.end(), cond.task_onehot.begin(), cond.task_onehot.end());
    in.insert(in.end(), cond.f_v.begin(), cond.f_v.end());
    return in;
}

} // namespace

std::vector<double> eps_predict(const ExpertModels& m, const std::vector<double>& noisy,
                                int k, const ConditioningBundle& cond) {
    core::Tensor out =
        core::mlp_apply(m.params, m.trunk, core::Tensor::vec(trunk_input(m, noisy, k, cond)));
    return out.vec_data();
}

double pred_loss(const ExpertModels& m, const std::vector<DiffusionSample>& batch,
                 const std::vector<ConditioningBundle>& conds) {
    if (batch.empty() || batch.size() != conds.size()) {
        throw core::ContractError("pred_loss: batch and conditioning misaligned");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<double> eps = eps_predict(m, batch[i].noisy, batch[i].k, conds[i]);
        double sq = 0.0;
        for (std::size_t d = 0; d < eps.size(); ++d) {
            double diff = eps[d] - batch[i].noise[d];
            sq += diff * diff;
        }
        acc += sq;
    }
    return acc / static_cast<double>(batch.size());
}

std::vector<sim::Action> sample_chunk(const ExpertModels& m, const ConditioningBundle& cond,
                                      int steps, std::uint64_t seed) {
    if (steps < 1) throw core::ContractError("sample_chunk: steps must be >= 1");
    const NoiseSchedule& sch = m.schedule;
    steps = std::min(steps, sch.K);

    // strided timestep ladder K = t0 > t1 > ... > t_{steps-1} >= 1
    std::vector<int> ladder(steps);
    for (int i = 0; i < steps; ++i) {
        double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        ladder[i] = static_cast<int>(std::lround(sch.K - f * (sch.K - 1)));
    }

    core::RngStream rng("chunk-sample", seed);
    std::vector<double> a = rng.normal_vec(kChunkDim);
    for (int i = 0; i < steps; ++i) {
        int k_hi = ladder[i];
        int k_lo = i + 1 < steps ? ladder[i + 1] : 0;
        std::vector<double> eps = eps_predict(m, a, k_hi, cond);
        double ab_hi = sch.alpha_bar[k_hi];
        std::vector<double> clean(kChunkDim);
        for (int d = 0; d < kChunkDim; ++d) {
            clean[d] = (a[d] - std::sqrt(1.0 - ab_hi) * eps[d]) / std::sqrt(ab_hi);
        }
        std::vector<double> mean = posterior_mean(sch, k_hi, k_lo, a, clean);
        if (k_lo > 0) {
            double ab_lo = sch.alpha_bar[k_lo];
            double alpha = ab_hi / ab_lo;
            double var = (1.0 - ab_lo) / (1.0 - ab_hi) * (1.0 - alpha);
            double sigma = std::sqrt(std::max(var, 0.0));
            for (int d = 0; d < kChunkDim; ++d) mean[d] += sigma * rng.normal();
        }
        a = std::move(mean);
    }

    std::vector<sim::Action> chunk(kChunkH);
    for (int h = 0; h < kChunkH; ++h) {
        chunk[h] = denormalize_action(a.data() + h * kActionDim);
    }
    return chunk;
}

// ---------------------------------------------------------------------------

std::vector<double> pool_channels(const std::vector<double>& latent, int factor) {
    if (factor < 1) throw core::ContractError("pool_channels: factor must be >= 1");
    if (latent.size() % static_cast<std::size_t>(factor) != 0) {
        throw core::ContractError("pool_channels: dimension not divisible by factor");
    }
    std::vector<double> out(latent.size() / factor);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < factor; ++j) acc += latent[i * factor + j];
        out[i] = acc / factor;
    }
    return out;
}

std::vector<std::vector<double>> latent_tokens(const std::vector<double>& latent, int factor,
                                               int token_dim) {
    std::vector<double> pooled = pool_channels(latent, factor);
    std::vector<std::vector<double>> tokens;
    for (std::size_t off = 0; off < pooled.size(); off += token_dim) {
        std::vector<double> tok(token_dim, 0.0);
        std::size_t n = std::min<std::size_t>(token_dim, pooled.size() - off);
        std::copy(pooled.begin() + off, pooled.begin() + off + n, tok.begin());
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

namespace {

std::vector<double> group_mean(const std::vector<std::vector<double>>& tokens) {
    std::vector<double> mean(kTokenDim, 0.0);
    for (const auto& t : tokens) {
        for (int d = 0; d < kTokenDim; ++d) mean[d] += t[d];
    }
    double inv = 1.0 / static_cast<double>(tokens.size());
    for (double& v : mean) v *= inv;
    return mean;
}

/// Group-wise mean pooling of the fused token sequence: patch tokens and
/// latent tokens each collapse to their own mean, so the latent geometry is
/// not diluted by the 36 image tokens.
std::vector<double> fused_mean(const ExpertModels& m, const std::vector<double>& image,
                               const wm::Latent& f_v) {
    std::vector<double> out = group_mean(patch_tokens(m, image));
    std::vector<double> lat = group_mean(latent_tokens(f_v, kPoolFactor));
    out.insert(out.end(), lat.begin(), lat.end());
    return out;
}

} // namespace

sim::Action react_predict(const ExpertModels& m, const sim::Observation& frame,
                          const wm::Latent& f_v) {
    std::vector<double> pooled = fused_mean(m, frame.image, f_v);
    core::Tensor out = core::mlp_apply(m.params, m.dori, core::Tensor::vec(pooled));
    return denormalize_action(out.data());
}

double react_loss(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw core::ContractError("react_loss: length mismatch");
    if (pred.empty()) throw core::ContractError("react_loss: empty chunks");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = std::abs(pred[i] - target[i]);
        acc += d < kSmoothL1Beta ? 0.5 * d * d / kSmoothL1Beta : d - 0.5 * kSmoothL1Beta;
    }
    return acc / static_cast<double>(pred.size());
}

core::Graph::NodeId trunk_node(core::Graph& g, const ExpertModels& m,
                               const std::vector<double>& noisy, int k,
                               const std::vector<core::Graph::NodeId>& img_tokens,
                               const std::vector<double>& task_onehot,
                               const std::vector<double>& f_v) {
    std::vector<core::Graph::NodeId> parts;
    parts.reserve(img_tokens.size() + 4);
    parts.push_back(g.input(core::Tensor::vec(noisy)));
    parts.push_back(g.input(core::Tensor::vec(tau_features(k, m.schedule.K))));
    for (auto t : img_tokens) parts.push_back(t);
    parts.push_back(g.input(core::Tensor::vec(task_onehot)));
    parts.push_back(g.input(core::Tensor::vec(f_v)));
    return core::mlp_node(g, m.params, m.trunk, g.concat(parts));
}

core::Graph::NodeId dori_node(core::Graph& g, const ExpertModels& m,
                              const std::vector<core::Graph::NodeId>& patch_toks,
                              const std::vector<std::vector<double>>& latent_toks) {
    std::vector<core::Graph::NodeId> lat;
    lat.reserve(latent_toks.size());
    for (const auto& t : latent_toks) lat.push_back(g.input(core::Tensor::vec(t)));
    auto fused = g.concat({g.mean_tokens(patch_toks), g.mean_tokens(lat)});
    return core::mlp_node(g, m.params, m.dori, fused);
}

core::Graph::NodeId gate_score_node(core::Graph& g, const ExpertModels& m,
                                    const std::vector<core::Graph::NodeId>& patch_toks) {
    return core::mlp_node(g, m.params, m.gate, g.mean_tokens(patch_toks));
}

std::vector<sim::Action> react_chunk(const ExpertModels& m, const wm::WorldRollout& rollout,
                                     bool zero_latents) {
    if (rollout.horizon < 1 || rollout.frames.empty()) {
        throw core::ContractError("react_chunk: empty rollout");
    }
    if (rollout.latents.size() != rollout.frames.size() + 1) {
        throw core::ContractError("react_chunk: rollout horizon mismatch");
    }
    std::vector<sim::Action> chunk;
    chunk.reserve(rollout.frames.size());
    wm::Latent zero(wm::kLatentDim, 0.0);
    for (std::size_t s = 0; s < rollout.frames.size(); ++s) {
        const wm::Latent& f_v = zero_latents ? zero : rollout.latents[s + 1];
        chunk.push_back(react_predict(m, rollout.frames[s], f_v));
    }
    return chunk;
}

} // namespace wam::experts
