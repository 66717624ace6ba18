#include "recoverl/sac.hpp"

#include <cassert>
#include <cstring>

namespace recoverl {

namespace {

// [S | A] rows for the critics
void concat_cols(Matrix& out, const Matrix& a, const Matrix& b) {
    assert(a.rows == b.rows);
    out.resize(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        std::memcpy(out.row(i), a.row(i), sizeof(double) * a.cols);
        std::memcpy(out.row(i) + a.cols, b.row(i), sizeof(double) * b.cols);
    }
}

} // namespace

SacState make_sac(int obs_dim, int act_dim, const SacConfig& cfg, Rng& rng) {
    SacState s;
    s.cfg = cfg;
    s.obs_dim = obs_dim;
    s.act_dim = act_dim;
    s.policy = make_policy(obs_dim, act_dim, cfg.hidden, rng);

    std::vector<int> qdims;
    qdims.push_back(obs_dim + act_dim);
    qdims.insert(qdims.end(), cfg.hidden.begin(), cfg.hidden.end());
    qdims.push_back(1);
    s.q1 = Mlp::uniform_init(qdims, rng);
    s.q2 = Mlp::uniform_init(qdims, rng);
    s.tq1 = s.q1;
    s.tq2 = s.q2;

    s.log_alpha = cfg.init_log_alpha;
    s.target_entropy = -double(act_dim);
    s.opt_pi = Adam(s.policy.net, cfg.adam);
    s.opt_q1 = Adam(s.q1, cfg.adam);
    s.opt_q2 = Adam(s.q2, cfg.adam);
    s.opt_alpha = AdamScalar(cfg.adam);
    return s;
}

std::vector<double> compute_target_y(const SacState& s, const Batch& b, Rng& rng) {
    const int n = b.size();
    MlpCache cache;
    PolicyHead head;
    policy_head_batch(s.policy, b.s2, cache, head);
    PolicySampleBatch smp;
    policy_sample_batch(head, rng, smp);

    Matrix z2;
    concat_cols(z2, b.s2, smp.a);
    MlpCache c1, c2;
    s.tq1.forward(z2, c1);
    s.tq2.forward(z2, c2);

    const double alpha = s.alpha();
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double q = std::min(c1.out().at(i, 0), c2.out().at(i, 0));
        const double soft = q - alpha * smp.log_prob[std::size_t(i)];
        y[std::size_t(i)] = b.r[std::size_t(i)] + s.cfg.gamma * (b.term[std::size_t(i)] ? 0.0 : soft);
    }
    return y;
}

double update_q(SacState& s, const Batch& b, Rng& rng) {
    const int n = b.size();
    std::vector<double> y = compute_target_y(s, b, rng);

    Matrix z;
    concat_cols(z, b.s, b.a);

    double loss_acc = 0.0;
    Mlp* critics[2] = {&s.q1, &s.q2};
    Adam* opts[2] = {&s.opt_q1, &s.opt_q2};
    for (int c = 0; c < 2; ++c) {
        MlpCache cache;
        critics[c]->forward(z, cache);
        Matrix d_out(n, 1);
        for (int i = 0; i < n; ++i) {
            const double diff = cache.out().at(i, 0) - y[std::size_t(i)];
            loss_acc += 0.5 * diff * diff;
            d_out.at(i, 0) = diff / double(n);
        }
        MlpGrads grads = critics[c]->make_grads();
        critics[c]->backward(cache, d_out, grads);
        opts[c]->step(*critics[c], grads);
    }
    return loss_acc / double(2 * n);
}

double update_pi(SacState& s, const Batch& b, Rng& rng, const GaussianPolicy* pi_org,
                 std::span<const double> lpc_weights) {
    const int n = b.size();
    const int m = s.act_dim;
    const double alpha = s.alpha();
    const double inv_n = 1.0 / double(n);

    MlpCache cache;
    PolicyHead head;
    policy_head_batch(s.policy, b.s, cache, head);
    PolicySampleBatch smp;
    policy_sample_batch(head, rng, smp);

    Matrix z;
    concat_cols(z, b.s, smp.a);
    MlpCache c1, c2;
    s.q1.forward(z, c1);
    s.q2.forward(z, c2);

    bool use_lpc = false;
    if (pi_org && !lpc_weights.empty()) {
        assert(int(lpc_weights.size()) == n);
        for (double w : lpc_weights)
            if (w != 0.0) {
                use_lpc = true;
                break;
            }
    }
    MlpCache org_cache;
    PolicyHead org_head;
    if (use_lpc)
        policy_head_batch(*pi_org, b.s, org_cache, org_head);

    // upstream gradients routed through the active (minimum) critic only
    Matrix up1(n, 1), up2(n, 1);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double q1v = c1.out().at(i, 0);
        const double q2v = c2.out().at(i, 0);
        const bool first = q1v <= q2v;
        up1.at(i, 0) = first ? -inv_n : 0.0;
        up2.at(i, 0) = first ? 0.0 : -inv_n;
        loss += alpha * smp.log_prob[std::size_t(i)] - std::min(q1v, q2v);
    }
    Matrix dz1, dz2;
    s.q1.backward_input(c1, up1, dz1);
    s.q2.backward_input(c2, up2, dz2);

    Matrix dmu(n, m), dls(n, m);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < m; ++d) {
            const double t = smp.a.at(i, d);
            const double sigma = std::exp(head.log_std.at(i, d));
            const double eps = smp.eps.at(i, d);
            const double dtanh = 1.0 - t * t;
            // entropy term through log pi
            double gmu = alpha * inv_n * 2.0 * t;
            double gls = alpha * inv_n * (-1.0 + 2.0 * t * sigma * eps);
            // critic term through the action
            const double da = dz1.at(i, s.obs_dim + d) + dz2.at(i, s.obs_dim + d);
            gmu += da * dtanh;
            gls += da * dtanh * sigma * eps;
            dmu.at(i, d) = gmu;
            dls.at(i, d) = gls;
        }
    }

    if (use_lpc) {
        for (int i = 0; i < n; ++i) {
            const double w = lpc_weights[std::size_t(i)];
            if (w == 0.0)
                continue;
            double kl = 0.0;
            for (int d = 0; d < m; ++d) {
                const double mu1 = head.mu.at(i, d), ls1 = head.log_std.at(i, d);
                const double mu2 = org_head.mu.at(i, d), ls2 = org_head.log_std.at(i, d);
                const double v1 = std::exp(2.0 * ls1);
                const double inv_v2 = std::exp(-2.0 * ls2);
                const double dm = mu1 - mu2;
                kl += ls2 - ls1 + 0.5 * (v1 + dm * dm) * inv_v2 - 0.5;
                dmu.at(i, d) += w * inv_n * dm * inv_v2;
                dls.at(i, d) += w * inv_n * (v1 * inv_v2 - 1.0);
            }
            loss += w * kl;
        }
    }

    Matrix d_raw;
    policy_head_backward(head, dmu, dls, d_raw);
    MlpGrads grads = s.policy.net.make_grads();
    s.policy.net.backward(cache, d_raw, grads);
    s.opt_pi.step(s.policy.net, grads);
    return loss * inv_n;
}

double update_alpha(SacState& s, const Batch& b, Rng& rng) {
    const int n = b.size();
    MlpCache cache;
    PolicyHead head;
    policy_head_batch(s.policy, b.s, cache, head);
    PolicySampleBatch smp;
    policy_sample_batch(head, rng, smp);

    double mean_term = 0.0;
    for (int i = 0; i < n; ++i)
        mean_term += smp.log_prob[std::size_t(i)] + s.target_entropy;
    mean_term /= double(n);

    const double alpha = s.alpha();
    const double loss = -alpha * mean_term;
    const double grad = -alpha * mean_term;  // d/dlog_alpha of -exp(log_alpha)*mean_term
    s.opt_alpha.step(s.log_alpha, grad);
    return loss;
}

void soft_update_targets(SacState& s) {
    const double tau = s.cfg.tau;
    Mlp* pairs[2][2] = {{&s.tq1, &s.q1}, {&s.tq2, &s.q2}};
    for (auto& [t, q] : pairs) {
        for (std::size_t l = 0; l < t->layers().size(); ++l) {
            Linear& tl = t->layers()[l];
            const Linear& ql = q->layers()[l];
            for (std::size_t j = 0; j < tl.w.data.size(); ++j)
                tl.w.data[j] = (1.0 - tau) * tl.w.data[j] + tau * ql.w.data[j];
            for (std::size_t j = 0; j < tl.bias.size(); ++j)
                tl.bias[j] = (1.0 - tau) * tl.bias[j] + tau * ql.bias[j];
            tl.refresh_transpose();
        }
    }
}

} // namespace recoverl
