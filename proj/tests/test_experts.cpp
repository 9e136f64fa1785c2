#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "wam/core/errors.hpp"
#include "wam/core/rng.hpp"
#include "wam/experts/experts.hpp"
#include "wam/sim/sim.hpp"

using namespace wam;
using namespace wam::experts;

namespace {

sim::Observation make_obs(std::uint64_t seed) {
    sim::TaskSpec task = sim::make_task(1);
    sim::ScenarioConfig cfg = sim::make_scenario(sim::ScenarioKind::ID, seed);
    sim::SimState st = sim::spawn_state(cfg, task, seed);
    return sim::render(st, cfg);
}

ConditioningBundle make_cond(const ExpertModels& m, std::uint64_t seed) {
    sim::Observation obs = make_obs(seed);
    ConditioningBundle cond;
    cond.img_tokens = flatten_tokens(patch_tokens(m, obs.image));
    cond.task_onehot = {1.0, 0.0};
    core::RngStream rng("cond", seed);
    cond.f_v = rng.normal_vec(wm::kLatentDim);
    return cond;
}

void force_constant_trunk(ExpertModels& m, const std::vector<double>& c) {
    for (std::size_t l = 0; l < m.trunk.layers(); ++l) {
        m.params.update(m.trunk.weight_name(l),
                        std::vector<double>(m.params.get(m.trunk.weight_name(l)).size(), 0.0));
        m.params.update(m.trunk.bias_name(l),
                        std::vector<double>(m.params.get(m.trunk.bias_name(l)).size(), 0.0));
    }
    m.params.update(m.trunk.bias_name(m.trunk.layers() - 1), c);
}

} // namespace

TEST_CASE("action normalization round-trips and clamps") {
    sim::Action a{0.03, -0.05, 1.0};
    auto n = normalize_action(a);
    CHECK(n[0] == doctest::Approx(0.6));
    CHECK(n[1] == doctest::Approx(-1.0));
    CHECK(n[2] == doctest::Approx(1.0));
    sim::Action back = denormalize_action(n.data());
    CHECK(back.dx == doctest::Approx(a.dx));
    CHECK(back.dy == doctest::Approx(a.dy));
    CHECK(back.g_cmd == doctest::Approx(a.g_cmd));

    double wild[3] = {4.0, -9.0, 3.0};
    sim::Action c = denormalize_action(wild);
    CHECK(c.dx == sim::kDeltaMax);
    CHECK(c.dy == -sim::kDeltaMax);
    CHECK(c.g_cmd == 1.0);
}

TEST_CASE("cosine schedule endpoints and monotonicity") {
    NoiseSchedule sch = cosine_schedule(kDiffusionK);
    CHECK(sch.alpha_bar[0] == 1.0);
    for (int k = 1; k <= sch.K; ++k) CHECK(sch.alpha_bar[k] < sch.alpha_bar[k - 1]);
    CHECK(sch.alpha_bar[sch.K] < 0.05);

    // k -> 0 limit: alpha_bar = 1 makes the forward process the identity
    double sa = std::sqrt(sch.alpha_bar[0]), sb = std::sqrt(1.0 - sch.alpha_bar[0]);
    CHECK(sa == 1.0);
    CHECK(sb == 0.0);
}

TEST_CASE("noise_actions: replayed rng reproduces the stored noise") {
    NoiseSchedule sch = cosine_schedule(kDiffusionK);
    core::RngStream rng("fwd", 5);
    std::vector<double> chunk(kChunkDim, 0.25);
    DiffusionSample s = noise_actions(chunk, 7, sch, rng);
    core::RngStream replay("fwd", 5);
    std::vector<double> eps = replay.normal_vec(kChunkDim);
    CHECK(s.noise == eps);
    double ab = sch.alpha_bar[7];
    for (int i = 0; i < kChunkDim; ++i) {
        CHECK(s.noisy[i] == std::sqrt(ab) * 0.25 + std::sqrt(1.0 - ab) * eps[i]);
    }
    CHECK_THROWS_AS(noise_actions(chunk, 0, sch, rng), core::ContractError);
    CHECK_THROWS_AS(noise_actions(chunk, sch.K + 1, sch, rng), core::ContractError);
}

TEST_CASE("noise_actions: forward-process variance matches the schedule within 2%") {
    NoiseSchedule sch = cosine_schedule(kDiffusionK);
    const int k = 9;
    const double clean_sigma = 0.5;
    core::RngStream rng("mc", 11);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    std::vector<double> chunk(1);
    for (int i = 0; i < n; ++i) {
        chunk[0] = clean_sigma * rng.normal();
        DiffusionSample s = noise_actions(chunk, k, sch, rng);
        sum += s.noisy[0];
        sq += s.noisy[0] * s.noisy[0];
    }
    double var = sq / n - (sum / n) * (sum / n);
    double expected = sch.alpha_bar[k] * clean_sigma * clean_sigma + (1.0 - sch.alpha_bar[k]);
    CHECK(std::abs(var - expected) / expected < 0.02);
}

TEST_CASE("one reverse step with the oracle denoiser hits the posterior mean exactly") {
    NoiseSchedule sch = cosine_schedule(kDiffusionK);
    core::RngStream rng("post", 3);
    std::vector<double> a0 = rng.normal_vec(kChunkDim);
    for (int k : {1, 5, 13, kDiffusionK}) {
        DiffusionSample s = noise_actions(a0, k, sch, rng);
        // epsilon-form reverse mean
        double ab_k = sch.alpha_bar[k], ab_p = sch.alpha_bar[k - 1];
        double alpha = ab_k / ab_p, beta = 1.0 - alpha;
        std::vector<double> eps_form(kChunkDim);
        for (int i = 0; i < kChunkDim; ++i) {
            eps_form[i] = (s.noisy[i] - beta / std::sqrt(1.0 - ab_k) * s.noise[i]) /
                          std::sqrt(alpha);
        }
        // (a0, a_k)-form posterior mean
        std::vector<double> post = posterior_mean(sch, k, k - 1, s.noisy, a0);
        for (int i = 0; i < kChunkDim; ++i) {
            CHECK(eps_form[i] == doctest::Approx(post[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("pred_loss: oracle denoiser, unit offset, batch linearity") {
    ExpertModels m = build_experts(21);
    ConditioningBundle cond = make_cond(m, 1);
    NoiseSchedule sch = m.schedule;
    core::RngStream rng("pl", 9);
    std::vector<double> chunk(kChunkDim, -0.5);
    DiffusionSample s = noise_actions(chunk, 4, sch, rng);

    force_constant_trunk(m, s.noise);
    CHECK(pred_loss(m, {s}, {cond}) == doctest::Approx(0.0).epsilon(1e-15));

    std::vector<double> off = s.noise;
    off[0] += 1.0;
    force_constant_trunk(m, off);
    CHECK(pred_loss(m, {s}, {cond}) == doctest::Approx(1.0).epsilon(1e-12));

    ExpertModels m2 = build_experts(22);
    core::RngStream rng2("pl2", 10);
    DiffusionSample s2 = noise_actions(chunk, 9, sch, rng2);
    double l1 = pred_loss(m2, {s}, {cond});
    double l2 = pred_loss(m2, {s2}, {cond});
    double both = pred_loss(m2, {s, s2}, {cond, cond});
    CHECK(both == doctest::Approx(0.5 * (l1 + l2)).epsilon(1e-12));
}

TEST_CASE("sample_chunk: deterministic and within action bounds") {
    ExpertModels m = build_experts(30);
    ConditioningBundle cond = make_cond(m, 8);
    auto c1 = sample_chunk(m, cond, kDiffusionK, 99);
    auto c2 = sample_chunk(m, cond, kDiffusionK, 99);
    REQUIRE(c1.size() == kChunkH);
    for (int h = 0; h < kChunkH; ++h) {
        CHECK(c1[h].dx == c2[h].dx);
        CHECK(c1[h].dy == c2[h].dy);
        CHECK(c1[h].g_cmd == c2[h].g_cmd);
        CHECK(std::abs(c1[h].dx) <= sim::kDeltaMax);
        CHECK(std::abs(c1[h].dy) <= sim::kDeltaMax);
        CHECK(c1[h].g_cmd >= 0.0);
        CHECK(c1[h].g_cmd <= 1.0);
    }
    auto c3 = sample_chunk(m, cond, kDiffusionK, 100);
    bool differs = false;
    for (int h = 0; h < kChunkH; ++h) differs = differs || c1[h].dx != c3[h].dx;
    CHECK(differs);
}

TEST_CASE("pool_channels: mean rule, constants, contract error") {
    CHECK(pool_channels({1.0, 2.0, 3.0, 4.0}, 4) == std::vector<double>{2.5});
    std::vector<double> c(32, 3.25);
    for (double v : pool_channels(c, 4)) CHECK(v == 3.25);
    CHECK(pool_channels(c, 4).size() == 8);
    std::vector<double> bad(5, 1.0);
    CHECK_THROWS_AS(pool_channels(bad, 4), core::ContractError);
}

TEST_CASE("latent_tokens: zero-padded final token") {
    std::vector<double> lat(32, 2.0);
    auto toks = latent_tokens(lat, 4);
    REQUIRE(toks.size() == 1);
    REQUIRE(toks[0].size() == kTokenDim);
    for (int d = 0; d < 8; ++d) CHECK(toks[0][d] == 2.0);
    for (int d = 8; d < kTokenDim; ++d) CHECK(toks[0][d] == 0.0);
}

TEST_CASE("react_loss: smooth L1 branches") {
    CHECK(react_loss({0.3, -0.2}, {0.3, -0.2}) == 0.0);
    CHECK(react_loss({0.05}, {0.0}) == doctest::Approx(0.0125).epsilon(1e-12));
    CHECK(react_loss({0.5}, {0.0}) == doctest::Approx(0.45).epsilon(1e-12));
    CHECK_THROWS_AS(react_loss({1.0}, {1.0, 2.0}), core::ContractError);
}

TEST_CASE("smooth L1 is C1 at the branch point") {
    const double beta = kSmoothL1Beta;
    auto d = [&](double x) { return x < beta ? 0.5 * x * x / beta : x - 0.5 * beta; };
    double eps = 1e-9;
    CHECK(std::abs(d(beta - eps) - d(beta + eps)) < 1e-8);
    double left = (d(beta) - d(beta - eps)) / eps;
    double right = (d(beta + eps) - d(beta)) / eps;
    CHECK(std::abs(left - right) < 1e-6);
    CHECK(left == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("react_predict: deterministic, bounded, patch-grid checked") {
    ExpertModels m = build_experts(17);
    sim::Observation obs = make_obs(3);
    core::RngStream rng("latent", 2);
    wm::Latent f_v = rng.normal_vec(wm::kLatentDim);
    sim::Action a = react_predict(m, obs, f_v);
    sim::Action b = react_predict(m, obs, f_v);
    CHECK(a.dx == b.dx);
    CHECK(std::abs(a.dx) <= sim::kDeltaMax);
    CHECK(a.g_cmd >= 0.0);
    CHECK(a.g_cmd <= 1.0);

    sim::Observation bad = obs;
    bad.image.resize(100);
    CHECK_THROWS_AS(react_predict(m, bad, f_v), core::DimensionError);
}

TEST_CASE("mean-pooled fusion is invariant to latent-token permutation") {
    ExpertModels m = build_experts(40);
    sim::Observation obs = make_obs(5);
    // 128-wide latent -> two pooled tokens; integer entries keep sums exact
    std::vector<double> f_v(128);
    for (int i = 0; i < 128; ++i) f_v[i] = static_cast<double>((i * 7) % 11);
    std::vector<double> swapped(128);
    std::copy(f_v.begin() + 64, f_v.end(), swapped.begin());
    std::copy(f_v.begin(), f_v.begin() + 64, swapped.begin() + 64);

    sim::Action a = react_predict(m, obs, f_v);
    sim::Action b = react_predict(m, obs, swapped);
    CHECK(a.dx == b.dx);
    CHECK(a.dy == b.dy);
    CHECK(a.g_cmd == b.g_cmd);
}

TEST_CASE("react_chunk: length, composition, contract") {
    ExpertModels m = build_experts(50);
    wm::WorldRollout r;
    r.horizon = 3;
    r.sampler_steps = 1;
    core::RngStream rng("rc", 6);
    r.latents.push_back(rng.normal_vec(wm::kLatentDim));
    for (int s = 0; s < 3; ++s) {
        r.frames.push_back(make_obs(10 + s));
        r.latents.push_back(rng.normal_vec(wm::kLatentDim));
    }
    auto chunk = react_chunk(m, r);
    REQUIRE(chunk.size() == 3);
    for (int s = 0; s < 3; ++s) {
        sim::Action direct = react_predict(m, r.frames[s], r.latents[s + 1]);
        CHECK(chunk[s].dx == direct.dx);
        CHECK(chunk[s].dy == direct.dy);
    }
    wm::WorldRollout broken = r;
    broken.latents.pop_back();
    CHECK_THROWS_AS(react_chunk(m, broken), core::ContractError);
}
