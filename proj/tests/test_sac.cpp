#include <doctest.h>

#include <cmath>
#include <cstring>

#include "recoverl/sac.hpp"

using namespace recoverl;

namespace {

Batch random_batch(int n, int obs, int act, Rng& rng, double term_frac = 0.25) {
    Batch b;
    b.s.resize(n, obs);
    b.a.resize(n, act);
    b.s2.resize(n, obs);
    for (double& v : b.s.data)
        v = rng.uniform(-1.0, 1.0);
    for (double& v : b.a.data)
        v = rng.uniform(-0.99, 0.99);
    for (double& v : b.s2.data)
        v = rng.uniform(-1.0, 1.0);
    b.r.resize(std::size_t(n));
    b.flag.resize(std::size_t(n));
    b.term.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        b.r[std::size_t(i)] = rng.uniform(-2.0, 2.0);
        b.flag[std::size_t(i)] = rng.below(2) ? 1 : 0;
        b.term[std::size_t(i)] = rng.uniform01() < term_frac ? 1 : 0;
    }
    return b;
}

bool nets_identical(const Mlp& a, const Mlp& b) {
    if (a.layers().size() != b.layers().size())
        return false;
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        if (std::memcmp(a.layers()[l].w.data.data(), b.layers()[l].w.data.data(),
                        a.layers()[l].w.data.size() * sizeof(double)) != 0)
            return false;
        if (std::memcmp(a.layers()[l].bias.data(), b.layers()[l].bias.data(),
                        a.layers()[l].bias.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

SacState tiny_sac(Rng& rng, int obs = 3, int act = 2) {
    SacConfig cfg;
    cfg.hidden = {16, 16};
    cfg.batch_size = 8;
    return make_sac(obs, act, cfg, rng);
}

} // namespace

TEST_CASE("target values rebuild from the public pieces") {
    Rng init(100);
    SacState s = tiny_sac(init);
    Rng brng(101);
    Batch b = random_batch(8, 3, 2, brng);

    Rng r1(7), r2(7);
    auto y = compute_target_y(s, b, r1);

    // oracle: same draws routed through the head and target critics by hand
    MlpCache cache;
    PolicyHead head;
    policy_head_batch(s.policy, b.s2, cache, head);
    PolicySampleBatch smp;
    policy_sample_batch(head, r2, smp);
    for (int i = 0; i < 8; ++i) {
        std::vector<double> z(5);
        for (int j = 0; j < 3; ++j)
            z[std::size_t(j)] = b.s2.at(i, j);
        for (int j = 0; j < 2; ++j)
            z[std::size_t(3 + j)] = smp.a.at(i, j);
        double q = std::min(s.tq1.forward_one(z)[0], s.tq2.forward_one(z)[0]);
        double soft = q - s.alpha() * smp.log_prob[std::size_t(i)];
        double expect = b.r[std::size_t(i)] + (b.term[std::size_t(i)] ? 0.0 : s.cfg.gamma * soft);
        CHECK(y[std::size_t(i)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("terminal rows bootstrap nothing") {
    Rng init(110);
    SacState s = tiny_sac(init);
    Rng brng(111);
    Batch b = random_batch(6, 3, 2, brng, 1.0);  // everything terminal
    Rng r(5);
    auto y = compute_target_y(s, b, r);
    for (int i = 0; i < 6; ++i)
        CHECK(y[std::size_t(i)] == b.r[std::size_t(i)]);
}

TEST_CASE("critic update reports the pre-step bellman loss") {
    Rng init(120);
    SacState s = tiny_sac(init);
    Rng brng(121);
    Batch b = random_batch(8, 3, 2, brng);

    SacState copy = s;
    Rng r1(9), r2(9);
    auto y = compute_target_y(copy, b, r2);
    double expect = 0.0;
    for (int i = 0; i < 8; ++i) {
        std::vector<double> z(5);
        for (int j = 0; j < 3; ++j)
            z[std::size_t(j)] = b.s.at(i, j);
        for (int j = 0; j < 2; ++j)
            z[std::size_t(3 + j)] = b.a.at(i, j);
        double d1 = copy.q1.forward_one(z)[0] - y[std::size_t(i)];
        double d2 = copy.q2.forward_one(z)[0] - y[std::size_t(i)];
        expect += 0.5 * d1 * d1 + 0.5 * d2 * d2;
    }
    expect /= 16.0;

    double loss = update_q(s, b, r1);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
    // the step touched the critics but not their targets
    CHECK_FALSE(nets_identical(s.q1, copy.q1));
    CHECK(nets_identical(s.tq1, copy.tq1));
    CHECK(nets_identical(s.tq2, copy.tq2));
}

TEST_CASE("repeated critic updates shrink the bellman loss") {
    Rng init(130);
    SacConfig cfg;
    cfg.hidden = {16, 16};
    cfg.batch_size = 16;
    cfg.adam.lr = 1e-2;  // tiny nets, so crank the rate to see real movement
    SacState s = make_sac(3, 2, cfg, init);
    Rng brng(131);
    Batch b = random_batch(16, 3, 2, brng);
    Rng r(3);
    double first = update_q(s, b, r);
    double last = first;
    for (int k = 0; k < 200; ++k)
        last = update_q(s, b, r);
    CHECK(last < first * 0.5);
}

TEST_CASE("zero or absent consolidation weights leave the policy update bit-identical") {
    Rng init(140);
    SacState base = tiny_sac(init);
    Rng other(141);
    GaussianPolicy pi_org = make_policy(3, 2, {16, 16}, other);
    Rng brng(142);
    Batch b = random_batch(8, 3, 2, brng);

    SacState s1 = base, s2 = base, s3 = base;
    std::vector<double> zeros(8, 0.0);
    Rng r1(55), r2(55), r3(55);
    double l1 = update_pi(s1, b, r1);
    double l2 = update_pi(s2, b, r2, &pi_org, zeros);
    double l3 = update_pi(s3, b, r3, nullptr, {});
    CHECK(l1 == l2);
    CHECK(l1 == l3);
    CHECK(nets_identical(s1.policy.net, s2.policy.net));
    CHECK(nets_identical(s1.policy.net, s3.policy.net));

    // nonzero weights must change the step
    std::vector<double> ones(8, 1.0);
    SacState s4 = base;
    Rng r4(55);
    update_pi(s4, b, r4, &pi_org, ones);
    CHECK_FALSE(nets_identical(s1.policy.net, s4.policy.net));
}

TEST_CASE("consolidation pulls the policy toward the reference") {
    Rng init(150);
    SacState s = tiny_sac(init);
    Rng other(151);
    GaussianPolicy pi_org = make_policy(3, 2, {16, 16}, other);
    Rng brng(152);
    Batch b = random_batch(16, 3, 2, brng);

    auto mean_kl = [&](const SacState& st) {
        double acc = 0.0;
        for (int i = 0; i < 16; ++i) {
            std::vector<double> row(3);
            for (int j = 0; j < 3; ++j)
                row[std::size_t(j)] = b.s.at(i, j);
            acc += policy_kl(st.policy, pi_org, row);
        }
        return acc / 16.0;
    };

    double before = mean_kl(s);
    std::vector<double> heavy(16, 50.0);  // dominate the critic term
    Rng r(31);
    for (int k = 0; k < 200; ++k)
        update_pi(s, b, r, &pi_org, heavy);
    CHECK(mean_kl(s) < before * 0.5);
}

TEST_CASE("policy update ignores reward, flag, and terminal columns") {
    Rng init(160);
    SacState base = tiny_sac(init);
    Rng brng(161);
    Batch b = random_batch(8, 3, 2, brng);
    Batch b2 = b;
    for (auto& v : b2.r)
        v += 100.0;
    for (auto& f : b2.flag)
        f = 0;
    for (auto& t : b2.term)
        t = 1;

    SacState s1 = base, s2 = base;
    Rng r1(77), r2(77);
    update_pi(s1, b, r1);
    update_pi(s2, b2, r2);
    CHECK(nets_identical(s1.policy.net, s2.policy.net));
}

TEST_CASE("temperature rises for a peaked policy and falls for a wide one") {
    Rng brng(170);
    Batch b = random_batch(8, 3, 1, brng);

    // bias-only head: mu 0, raw log-std forced far below the clamp floor
    auto make_with_ls = [&](double ls_bias) {
        Rng init(171);
        SacState s = tiny_sac(init, 3, 1);
        s.policy.net = Mlp::zeros({3, 2});
        s.policy.net.layers()[0].bias = {0.0, ls_bias};
        s.policy.net.refresh_transposes();
        return s;
    };

    SacState peaked = make_with_ls(-19.0);  // near-deterministic, log pi huge
    Rng r1(1);
    update_alpha(peaked, b, r1);
    CHECK(peaked.log_alpha > 0.0);

    // unit sigma is the high-entropy regime for a squashed head; pushing the
    // raw log-std higher just saturates tanh and peaks the action density
    SacState wide = make_with_ls(0.0);
    Rng r2(1);
    update_alpha(wide, b, r2);
    CHECK(wide.log_alpha < 0.0);
}

TEST_CASE("soft update applies the polyak formula exactly") {
    Rng init(180);
    SacState s = tiny_sac(init);
    s.cfg.tau = 0.25;
    SacState before = s;
    soft_update_targets(s);
    for (std::size_t l = 0; l < s.tq1.layers().size(); ++l) {
        const auto& tb = before.tq1.layers()[l];
        const auto& qb = before.q1.layers()[l];
        const auto& ta = s.tq1.layers()[l];
        for (std::size_t j = 0; j < ta.w.data.size(); ++j)
            CHECK(ta.w.data[j] == 0.75 * tb.w.data[j] + 0.25 * qb.w.data[j]);
        for (std::size_t j = 0; j < ta.bias.size(); ++j)
            CHECK(ta.bias[j] == 0.75 * tb.bias[j] + 0.25 * qb.bias[j]);
    }
    // online nets untouched
    CHECK(nets_identical(s.q1, before.q1));
    CHECK(nets_identical(s.q2, before.q2));
}

TEST_CASE("make_sac starts targets as exact copies with fresh optimizers") {
    Rng init(190);
    SacState s = tiny_sac(init);
    CHECK(nets_identical(s.q1, s.tq1));
    CHECK(nets_identical(s.q2, s.tq2));
    CHECK_FALSE(nets_identical(s.q1, s.q2));
    CHECK(s.target_entropy == -2.0);
    CHECK(s.opt_pi.steps_taken() == 0);
    CHECK(s.alpha() == doctest::Approx(1.0));
}
