#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recoverl/checkpoint.hpp"
#include "recoverl/mlp.hpp"
#include "recoverl/rng.hpp"
#include "recoverl/sac.hpp"

using namespace recoverl;

namespace {

// weighted-sum loss over the outputs keeps the backward pass fully exercised
double loss_of(const Mlp& net, const Matrix& x, const Matrix& coef) {
    MlpCache cache;
    net.forward(x, cache);
    const Matrix& y = cache.out();
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i)
        s += coef.data[i] * y.data[i];
    return s;
}

std::vector<double*> param_ptrs(Mlp& net) {
    std::vector<double*> p;
    for (auto& l : net.layers()) {
        for (double& v : l.w.data)
            p.push_back(&v);
        for (double& v : l.bias)
            p.push_back(&v);
    }
    return p;
}

std::vector<double> grad_flat(const MlpGrads& g) {
    std::vector<double> out;
    for (const auto& l : g.layers) {
        out.insert(out.end(), l.dw.data.begin(), l.dw.data.end());
        out.insert(out.end(), l.dbias.begin(), l.dbias.end());
    }
    return out;
}

} // namespace

TEST_CASE("two-layer forward agrees with a hand computation") {
    Mlp net = Mlp::zeros({2, 2, 1});
    auto& l0 = net.layers()[0];
    l0.w.at(0, 0) = 1.0;
    l0.w.at(0, 1) = -1.0;
    l0.w.at(1, 0) = 2.0;
    l0.w.at(1, 1) = 0.5;
    l0.bias = {0.1, -0.2};
    auto& l1 = net.layers()[1];
    l1.w.at(0, 0) = 3.0;
    l1.w.at(1, 0) = -2.0;
    l1.bias = {1.0};
    net.refresh_transposes();

    // x = (1, -1): pre0 = (1-2+0.1, -1-0.5-0.2) = (-0.9, -1.7) -> relu -> (0,0) -> out 1.0
    auto y = net.forward_one(std::vector<double>{1.0, -1.0});
    CHECK(y[0] == doctest::Approx(1.0));

    // x = (1, 1): pre0 = (3.1, -0.7) -> relu (3.1, 0) -> 3*3.1 + 1 = 10.3
    y = net.forward_one(std::vector<double>{1.0, 1.0});
    CHECK(y[0] == doctest::Approx(10.3));
}

TEST_CASE("backward matches central differences") {
    Rng rng(11);
    Mlp net = Mlp::uniform_init({3, 8, 8, 2}, rng);
    Matrix x(5, 3);
    for (double& v : x.data)
        v = rng.uniform(-1.0, 1.0);
    Matrix coef(5, 2);
    for (double& v : coef.data)
        v = rng.uniform(-1.0, 1.0);

    MlpCache cache;
    net.forward(x, cache);
    MlpGrads grads = net.make_grads();
    Matrix d_input;
    net.backward(cache, coef, grads, &d_input);
    auto analytic = grad_flat(grads);
    auto ptrs = param_ptrs(net);
    REQUIRE(analytic.size() == ptrs.size());

    const double h = 1e-6;
    for (std::size_t i = 0; i < ptrs.size(); i += 7) {  // stride keeps this quick
        double saved = *ptrs[i];
        *ptrs[i] = saved + h;
        net.refresh_transposes();
        double up = loss_of(net, x, coef);
        *ptrs[i] = saved - h;
        net.refresh_transposes();
        double down = loss_of(net, x, coef);
        *ptrs[i] = saved;
        double fd = (up - down) / (2.0 * h);
        CHECK(analytic[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    net.refresh_transposes();

    // input gradient too
    for (int r = 0; r < x.rows; ++r)
        for (int c = 0; c < x.cols; ++c) {
            double saved = x.at(r, c);
            x.at(r, c) = saved + h;
            double up = loss_of(net, x, coef);
            x.at(r, c) = saved - h;
            double down = loss_of(net, x, coef);
            x.at(r, c) = saved;
            CHECK(d_input.at(r, c) == doctest::Approx((up - down) / (2.0 * h)).epsilon(1e-5));
        }
}

TEST_CASE("backward_input equals the input gradient from full backward") {
    Rng rng(12);
    Mlp net = Mlp::uniform_init({4, 6, 3}, rng);
    Matrix x(7, 4);
    for (double& v : x.data)
        v = rng.uniform(-1.0, 1.0);
    Matrix d_out(7, 3);
    for (double& v : d_out.data)
        v = rng.uniform(-1.0, 1.0);

    MlpCache cache;
    net.forward(x, cache);
    MlpGrads grads = net.make_grads();
    Matrix d_full, d_only;
    net.backward(cache, d_out, grads, &d_full);
    net.backward_input(cache, d_out, d_only);
    REQUIRE(d_full.data.size() == d_only.data.size());
    for (std::size_t i = 0; i < d_full.data.size(); ++i)
        CHECK(d_full.data[i] == d_only.data[i]);
}

TEST_CASE("uniform_init respects fan-in scale and is reproducible") {
    Rng a(55), b(55);
    Mlp m1 = Mlp::uniform_init({10, 20, 4}, a);
    Mlp m2 = Mlp::uniform_init({10, 20, 4}, b);
    for (std::size_t l = 0; l < m1.layers().size(); ++l) {
        CHECK(m1.layers()[l].w.data == m2.layers()[l].w.data);
        CHECK(m1.layers()[l].bias == m2.layers()[l].bias);
    }
    double bound0 = 1.0 / std::sqrt(10.0);
    for (double v : m1.layers()[0].w.data) {
        CHECK(v >= -bound0);
        CHECK(v <= bound0);
    }
}

TEST_CASE("adam first step matches the closed form") {
    // After one step from fresh moments, m_hat = g and v_hat = g^2, so the
    // update is -lr * g / (|g| + eps) regardless of the betas.
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.eps = 1e-8;
    Mlp net = Mlp::zeros({1, 1});
    net.layers()[0].w.at(0, 0) = 0.5;
    net.layers()[0].bias[0] = -0.25;
    net.refresh_transposes();
    Adam opt(net, cfg);
    MlpGrads g = net.make_grads();
    g.layers[0].dw.at(0, 0) = 2.0;
    g.layers[0].dbias[0] = -3.0;
    opt.step(net, g);
    CHECK(net.layers()[0].w.at(0, 0) == doctest::Approx(0.5 - 0.1 * 2.0 / (2.0 + 1e-8)));
    CHECK(net.layers()[0].bias[0] == doctest::Approx(-0.25 + 0.1 * 3.0 / (3.0 + 1e-8)));
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("adam second step follows the moment recursion") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.99;
    double p = 1.0;
    std::vector<double> m(1, 0.0), v(1, 0.0);
    double g1 = 0.4, g2 = -0.7;

    std::vector<double> pv{p}, gv{g1};
    adam_update(pv, gv, m, v, 1, cfg);
    double m1 = 0.1 * g1, v1 = 0.01 * g1 * g1;
    double expect1 = 1.0 - cfg.lr * (m1 / (1 - 0.9)) / (std::sqrt(v1 / (1 - 0.99)) + cfg.eps);
    CHECK(pv[0] == doctest::Approx(expect1).epsilon(1e-12));

    gv[0] = g2;
    adam_update(pv, gv, m, v, 2, cfg);
    double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.99 * v1 + 0.01 * g2 * g2;
    double mh = m2 / (1 - 0.9 * 0.9), vh = v2 / (1 - 0.99 * 0.99);
    CHECK(pv[0] == doctest::Approx(expect1 - cfg.lr * mh / (std::sqrt(vh) + cfg.eps)).epsilon(1e-12));
}

TEST_CASE("zero gradient on fresh moments leaves parameters untouched") {
    Rng rng(3);
    Mlp net = Mlp::uniform_init({3, 4, 2}, rng);
    Mlp before = net;
    Adam opt(net, AdamConfig{});
    MlpGrads g = net.make_grads();  // zero-filled
    opt.step(net, g);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        CHECK(net.layers()[l].w.data == before.layers()[l].w.data);
        CHECK(net.layers()[l].bias == before.layers()[l].bias);
    }
}

TEST_CASE("non-finite gradients halt training") {
    Rng rng(4);
    Mlp net = Mlp::uniform_init({2, 3, 1}, rng);
    Adam opt(net, AdamConfig{});
    MlpGrads g = net.make_grads();
    g.layers[0].dw.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(g.all_finite());
    CHECK_THROWS_AS(opt.step(net, g), TrainingHalt);
    g.layers[0].dw.at(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(opt.step(net, g), TrainingHalt);
}

TEST_CASE("checkpoint round-trips byte for byte") {
    namespace fs = std::filesystem;
    Rng rng(77);
    SacConfig cfg;
    cfg.hidden = {8, 8};
    SacState s = make_sac(4, 1, cfg, rng);
    s.log_alpha = -0.31;

    fs::path dir = fs::temp_directory_path() / "recoverl-test-ckpt";
    fs::create_directories(dir);
    fs::path p1 = dir / "a.ckpt", p2 = dir / "b.ckpt";
    save_checkpoint(p1, s, "cartpole");

    CheckpointMeta meta;
    SacState loaded = load_checkpoint(p1, cfg, &meta);
    CHECK(meta.env_name == "cartpole");
    CHECK(meta.obs_dim == 4);
    CHECK(meta.act_dim == 1);
    CHECK(meta.hidden == std::vector<int>{8, 8});
    CHECK(loaded.log_alpha == s.log_alpha);
    CHECK(loaded.target_entropy == s.target_entropy);
    CHECK(loaded.policy.net.layers()[0].w.data == s.policy.net.layers()[0].w.data);
    CHECK(loaded.tq2.layers().back().bias == s.tq2.layers().back().bias);

    save_checkpoint(p2, loaded, meta.env_name);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream b1, b2;
    b1 << f1.rdbuf();
    b2 << f2.rdbuf();
    CHECK(b1.str() == b2.str());
    CHECK(b1.str().rfind("recoverl-checkpoint 1", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint load rejects a config with different hidden sizes") {
    namespace fs = std::filesystem;
    Rng rng(78);
    SacConfig cfg;
    cfg.hidden = {8, 8};
    SacState s = make_sac(4, 1, cfg, rng);
    fs::path p = fs::temp_directory_path() / "recoverl-test-mismatch.ckpt";
    save_checkpoint(p, s, "cartpole");
    SacConfig other = cfg;
    other.hidden = {16, 16};
    CHECK_THROWS(load_checkpoint(p, other));
    fs::remove(p);
}

TEST_CASE("checkpoint load reports missing files") {
    CHECK_THROWS(load_checkpoint("/nonexistent/nowhere.ckpt", SacConfig{}));
}
