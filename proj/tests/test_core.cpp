#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "wam/core/adam.hpp"
#include "wam/core/checkpoint.hpp"
#include "wam/core/errors.hpp"
#include "wam/core/gradcheck.hpp"
#include "wam/core/graph.hpp"
#include "wam/core/mlp.hpp"
#include "wam/core/param_store.hpp"
#include "wam/core/rng.hpp"

using namespace wam::core;

namespace {

MlpSpec two_layer_spec(const std::string& prefix, std::size_t in, std::size_t hid,
                       std::size_t out) {
    return MlpSpec{prefix, {in, hid, out}, {Act::Tanh, Act::Linear}};
}

} // namespace

TEST_CASE("rng streams are reproducible and name-sensitive") {
    RngStream a("train", 7), b("train", 7), c("eval", 7), d("train", 8);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    CHECK(a.draws() == 100);
    CHECK(c.next_u64() != d.next_u64());
    RngStream e("train", 7);
    double u = e.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    // child streams are independent of the parent's draw position
    RngStream p1("root", 3), p2("root", 3);
    (void)p1.next_u64();
    CHECK(p1.child("ep0").next_u64() == p2.child("ep0").next_u64());
}

TEST_CASE("rng normals have sane moments") {
    RngStream r("norm", 11);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.size() == 4);
    Tensor bad({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(bad.ensure_finite("x"), DomainError);
}

TEST_CASE("mlp_apply zero weights returns bias, identity returns input") {
    ParamStore store;
    MlpSpec spec{"net", {3, 3}, {Act::Linear}};
    store.create("net.w0", Tensor({3, 3}));
    store.create("net.b0", Tensor({3}, {0.5, -1.0, 2.0}));
    Tensor in({3}, {9.0, 8.0, 7.0});
    Tensor out = mlp_apply(store, spec, in);
    CHECK(out[0] == 0.5);
    CHECK(out[1] == -1.0);
    CHECK(out[2] == 2.0);

    ParamStore id_store;
    id_store.create("net.w0", Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    id_store.create("net.b0", Tensor({3}));
    Tensor out2 = mlp_apply(id_store, spec, in);
    for (int i = 0; i < 3; ++i) CHECK(out2[i] == in[i]);
}

TEST_CASE("mlp_apply is deterministic and validates input") {
    ParamStore store;
    MlpSpec spec = two_layer_spec("f", 4, 8, 2);
    RngStream rng("init", 123);
    init_mlp(store, spec, rng);
    Tensor in({4}, {0.1, -0.2, 0.3, 0.4});
    Tensor a = mlp_apply(store, spec, in);
    Tensor b = mlp_apply(store, spec, in);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    Tensor wrong({3}, {1, 2, 3});
    CHECK_THROWS_AS(mlp_apply(store, spec, wrong), DimensionError);
    Tensor inf_in({4}, {1.0, INFINITY, 0.0, 0.0});
    CHECK_THROWS_AS(mlp_apply(store, spec, inf_in), DomainError);
}

TEST_CASE("graph forward matches direct forward bitwise") {
    ParamStore store;
    MlpSpec spec = two_layer_spec("g", 5, 7, 3);
    RngStream rng("init", 5);
    init_mlp(store, spec, rng);
    Tensor in({5}, {0.3, -0.4, 0.5, 0.1, -0.9});
    Tensor direct = mlp_apply(store, spec, in);
    Graph g;
    auto out = mlp_node(g, store, spec, g.input(in));
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(g.value(out)[i] == direct[i]);
}

TEST_CASE("backward: squared norm gives 2x, constants give zero") {
    ParamStore store;
    store.create("x", Tensor({3}, {1.0, -2.0, 3.0}));
    store.create("unused", Tensor({2}, {5.0, 5.0}));
    Graph g;
    auto x = g.param(store, "x");
    auto loss = g.squared_norm(x);
    GradMap grads = g.backward(loss, store);
    CHECK(grads.at("x")[0] == doctest::Approx(2.0));
    CHECK(grads.at("x")[1] == doctest::Approx(-4.0));
    CHECK(grads.at("x")[2] == doctest::Approx(6.0));
    CHECK(grads.at("unused")[0] == 0.0);
    CHECK(grads.at("unused")[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss and stale graphs") {
    ParamStore store;
    store.create("x", Tensor({2}, {1.0, 2.0}));
    Graph g;
    auto x = g.param(store, "x");
    CHECK_THROWS_AS(g.backward(x, store), ContractError);

    auto loss = g.squared_norm(x);
    store.update("x", {3.0, 4.0});
    CHECK_THROWS_AS(g.backward(loss, store), StalenessError);
}

TEST_CASE("two-layer net passes a finite-difference check") {
    ParamStore store;
    MlpSpec spec = two_layer_spec("n", 6, 10, 4);
    RngStream rng("init", 99);
    init_mlp(store, spec, rng);
    RngStream data("data", 2);
    Tensor in = Tensor::vec(data.normal_vec(6));
    Tensor target = Tensor::vec(data.normal_vec(4));

    auto loss_fn = [&]() {
        Graph g;
        auto out = mlp_node(g, store, spec, g.input(in));
        auto l = g.mse_mean(out, g.input(target));
        return g.value(l)[0];
    };
    Graph g;
    auto out = mlp_node(g, store, spec, g.input(in));
    auto l = g.mse_mean(out, g.input(target));
    GradMap analytic = g.backward(l, store);

    RngStream probe_rng("probe", 31);
    auto rep = finite_diff_check(store, analytic, loss_fn, probe_rng, 120, 1e-5);
    CHECK(rep.probes >= 100);
    CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("graph ops: concat, mean_tokens, smooth l1, bce") {
    ParamStore store;
    Graph g;
    auto a = g.input(Tensor({2}, {1.0, 2.0}));
    auto b = g.input(Tensor({3}, {3.0, 4.0, 5.0}));
    auto cat = g.concat({a, b});
    CHECK(g.value(cat).size() == 5);
    CHECK(g.value(cat)[4] == 5.0);

    auto t1 = g.input(Tensor({2}, {2.0, 4.0}));
    auto t2 = g.input(Tensor({2}, {4.0, 8.0}));
    auto m = g.mean_tokens({t1, t2});
    CHECK(g.value(m)[0] == 3.0);
    CHECK(g.value(m)[1] == 6.0);

    auto p = g.input(Tensor({1}, {0.05}));
    auto q = g.input(Tensor({1}, {0.0}));
    auto sl = g.smooth_l1_mean(p, q, 0.1);
    CHECK(g.value(sl)[0] == doctest::Approx(0.0125).epsilon(1e-12));

    auto s = g.input(Tensor({1}, {0.5}));
    auto y = g.input(Tensor({1}, {1.0}));
    auto bce = g.bce_mean(s, y);
    CHECK(g.value(bce)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("adam: zero grads keep parameters, one step matches hand computation") {
    ParamStore store;
    store.create("p", Tensor({1}, {0.25}));
    AdamState st;
    AdamHyper hy;
    GradMap zero;
    zero.emplace("p", Tensor({1}));
    adam_step(store, zero, st, hy);
    CHECK(store.get("p")[0] == 0.25);
    CHECK(store.step() == 1);

    ParamStore store2;
    store2.create("p", Tensor({1}, {0.0}));
    AdamState st2;
    GradMap g1;
    g1.emplace("p", Tensor({1}, {1.0}));
    adam_step(store2, g1, st2, hy);
    // bias-corrected first step: delta = lr * 1 / (sqrt(1) + eps)
    double expected = -1e-3 / (1.0 + 1e-8);
    CHECK(store2.get("p")[0] == doctest::Approx(expected).epsilon(1e-9));

    GradMap missing;
    CHECK_THROWS_AS(adam_step(store2, missing, st2, hy), ContractError);
}

TEST_CASE("adam trajectories are reproducible") {
    auto run = [](std::uint64_t seed) {
        ParamStore store;
        MlpSpec spec = two_layer_spec("m", 3, 5, 1);
        RngStream rng("init", seed);
        init_mlp(store, spec, rng);
        AdamState st;
        AdamHyper hy;
        RngStream data("data", seed);
        for (int i = 0; i < 20; ++i) {
            Tensor in = Tensor::vec(data.normal_vec(3));
            Graph g;
            auto out = mlp_node(g, store, spec, g.input(in));
            auto l = g.squared_norm(out);
            adam_step(store, g.backward(l, store), st, hy);
        }
        return store.get("m.w0").vec_data();
    };
    auto a = run(77), b = run(77);
    CHECK(a == b);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    namespace fs = std::filesystem;
    ParamStore store;
    RngStream rng("ckpt", 9);
    store.create("b.w", Tensor({2, 3}, rng.normal_vec(6)));
    store.create("a.v", Tensor({4}, rng.normal_vec(4)));

    fs::path p1 = fs::temp_directory_path() / "wam_test_a.ckpt";
    fs::path p2 = fs::temp_directory_path() / "wam_test_b.ckpt";
    save_checkpoint(store, p1);
    ParamStore loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(file_digest(p1) == file_digest(p2));

    CHECK(loaded.names() == store.names());
    CHECK(loaded.get("b.w").shape() == std::vector<std::size_t>{2, 3});
    // float32 rounding applies exactly once
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(loaded.get("b.w")[i] == static_cast<double>(static_cast<float>(store.get("b.w")[i])));
    }
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("checkpoint header is canonical (name-sorted)") {
    namespace fs = std::filesystem;
    ParamStore s1, s2;
    s1.create("zz", Tensor({1}, {1.0}));
    s1.create("aa", Tensor({1}, {2.0}));
    s2.create("aa", Tensor({1}, {2.0}));
    s2.create("zz", Tensor({1}, {1.0}));
    fs::path p1 = fs::temp_directory_path() / "wam_c1.ckpt";
    fs::path p2 = fs::temp_directory_path() / "wam_c2.ckpt";
    save_checkpoint(s1, p1);
    save_checkpoint(s2, p2);
    CHECK(file_digest(p1) == file_digest(p2));
    std::ifstream f(p1);
    std::string first;
    std::getline(f, first);
    CHECK(first.rfind("aa ", 0) == 0);
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("weighted mse: formula and finite-difference gradient") {
    ParamStore store;
    store.create("x", Tensor({3}, {1.0, 2.0, 3.0}));
    Graph g;
    auto x = g.param(store, "x");
    auto t = g.input(Tensor({3}, {0.0, 0.0, 0.0}));
    auto loss = g.weighted_mse_mean(x, t, Tensor({3}, {2.0, 1.0, 1.0}));
    // (2*1 + 4 + 9) / 4 = 3.75
    CHECK(g.value(loss)[0] == doctest::Approx(3.75).epsilon(1e-15));
    GradMap grads = g.backward(loss, store);
    // d/dx0 = 2*2*1/4 = 1, d/dx1 = 2*2/4 = 1, d/dx2 = 2*3/4 = 1.5
    CHECK(grads.at("x")[0] == doctest::Approx(1.0));
    CHECK(grads.at("x")[1] == doctest::Approx(1.0));
    CHECK(grads.at("x")[2] == doctest::Approx(1.5));

    auto loss_fn = [&]() {
        Graph g2;
        auto x2 = g2.param(store, "x");
        auto t2 = g2.input(Tensor({3}, {0.0, 0.0, 0.0}));
        return g2.value(g2.weighted_mse_mean(x2, t2, Tensor({3}, {2.0, 1.0, 1.0})))[0];
    };
    RngStream probe("wmse", 3);
    auto rep = finite_diff_check(store, grads, loss_fn, probe, 30, 1e-6);
    CHECK(rep.max_rel_err <= 1e-6);
}
