#include "recoverl/policy.hpp"

#include <algorithm>
#include <cmath>

namespace recoverl {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)
constexpr double kLog2 = 0.69314718055994530942;

double softplus(double x) {
    // log(1 + e^x) without overflow
    if (x > 30.0)
        return x;
    if (x < -30.0)
        return std::exp(x);
    return std::log1p(std::exp(x));
}

double clip_action(double a) { return std::clamp(a, -kActionClip, kActionClip); }

} // namespace

GaussianPolicy make_policy(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> dims;
    dims.push_back(obs_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(2 * act_dim);
    return GaussianPolicy{Mlp::uniform_init(dims, rng), act_dim};
}

void policy_head_batch(const GaussianPolicy& p, const Matrix& states, MlpCache& cache, PolicyHead& head) {
    p.net.forward(states, cache);
    const Matrix& raw = cache.out();
    const int n = raw.rows, m = p.act_dim;
    head.mu.resize(n, m);
    head.log_std.resize(n, m);
    head.clamp_pass.resize(n, m);
    for (int i = 0; i < n; ++i) {
        const double* r = raw.row(i);
        for (int d = 0; d < m; ++d) {
            head.mu.at(i, d) = r[d];
            double ls = r[m + d];
            head.clamp_pass.at(i, d) = (ls > kLogStdMin && ls < kLogStdMax) ? 1.0 : 0.0;
            head.log_std.at(i, d) = std::clamp(ls, kLogStdMin, kLogStdMax);
        }
    }
}

void policy_head_one(const GaussianPolicy& p, std::span<const double> state, std::vector<double>& mu,
                     std::vector<double>& log_std) {
    std::vector<double> raw = p.net.forward_one(state);
    const int m = p.act_dim;
    mu.assign(raw.begin(), raw.begin() + m);
    log_std.assign(raw.begin() + m, raw.begin() + 2 * m);
    for (double& ls : log_std)
        ls = std::clamp(ls, kLogStdMin, kLogStdMax);
}

void policy_sample_batch(const PolicyHead& head, Rng& rng, PolicySampleBatch& out) {
    const int n = head.mu.rows, m = head.mu.cols;
    out.eps.resize(n, m);
    out.u.resize(n, m);
    out.a.resize(n, m);
    out.log_prob.assign(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < m; ++d)
            out.eps.at(i, d) = rng.normal();
    for (int i = 0; i < n; ++i) {
        double lp = 0.0;
        for (int d = 0; d < m; ++d) {
            const double ls = head.log_std.at(i, d);
            const double eps = out.eps.at(i, d);
            const double u = head.mu.at(i, d) + std::exp(ls) * eps;
            out.u.at(i, d) = u;
            out.a.at(i, d) = clip_action(std::tanh(u));
            lp += -ls - 0.5 * eps * eps - kHalfLog2Pi - 2.0 * (kLog2 - u - softplus(-2.0 * u));
        }
        out.log_prob[std::size_t(i)] = lp;
    }
}

double squashed_log_prob(std::span<const double> mu, std::span<const double> log_std, std::span<const double> u) {
    double lp = 0.0;
    for (std::size_t d = 0; d < mu.size(); ++d) {
        const double ls = log_std[d];
        const double eps = (u[d] - mu[d]) * std::exp(-ls);
        lp += -ls - 0.5 * eps * eps - kHalfLog2Pi - 2.0 * (kLog2 - u[d] - softplus(-2.0 * u[d]));
    }
    return lp;
}

void policy_head_backward(const PolicyHead& head, const Matrix& dmu, const Matrix& dls, Matrix& d_raw) {
    const int n = head.mu.rows, m = head.mu.cols;
    d_raw.resize(n, 2 * m);
    for (int i = 0; i < n; ++i) {
        double* r = d_raw.row(i);
        for (int d = 0; d < m; ++d) {
            r[d] = dmu.at(i, d);
            r[m + d] = dls.at(i, d) * head.clamp_pass.at(i, d);
        }
    }
}

std::pair<std::vector<double>, double> policy_sample_one(const GaussianPolicy& p, std::span<const double> state,
                                                         Rng& rng) {
    std::vector<double> mu, ls;
    policy_head_one(p, state, mu, ls);
    const int m = p.act_dim;
    std::vector<double> a(static_cast<std::size_t>(m));
    double lp = 0.0;
    for (int d = 0; d < m; ++d) {
        const double eps = rng.normal();
        const double u = mu[std::size_t(d)] + std::exp(ls[std::size_t(d)]) * eps;
        a[std::size_t(d)] = clip_action(std::tanh(u));
        lp += -ls[std::size_t(d)] - 0.5 * eps * eps - kHalfLog2Pi - 2.0 * (kLog2 - u - softplus(-2.0 * u));
    }
    return {std::move(a), lp};
}

std::vector<double> policy_mean_action(const GaussianPolicy& p, std::span<const double> state) {
    std::vector<double> mu, ls;
    policy_head_one(p, state, mu, ls);
    for (double& v : mu)
        v = clip_action(std::tanh(v));
    return mu;
}

double diag_gaussian_kl(std::span<const double> mu1, std::span<const double> ls1, std::span<const double> mu2,
                        std::span<const double> ls2) {
    double kl = 0.0;
    for (std::size_t d = 0; d < mu1.size(); ++d) {
        // variance ratio via the log-std difference, so identical inputs give
        // an exact zero instead of exp(x)*exp(-x) rounding noise
        const double ratio = std::exp(2.0 * (ls1[d] - ls2[d]));
        const double inv_v2 = std::exp(-2.0 * ls2[d]);
        const double dm = mu1[d] - mu2[d];
        kl += ls2[d] - ls1[d] + 0.5 * (ratio + dm * dm * inv_v2) - 0.5;
    }
    return kl;
}

std::vector<double> diag_gaussian_kl_batch(const PolicyHead& p1, const PolicyHead& p2) {
    const int n = p1.mu.rows, m = p1.mu.cols;
    std::vector<double> kl(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        kl[std::size_t(i)] =
            diag_gaussian_kl(std::span<const double>(p1.mu.row(i), std::size_t(m)),
                             std::span<const double>(p1.log_std.row(i), std::size_t(m)),
                             std::span<const double>(p2.mu.row(i), std::size_t(m)),
                             std::span<const double>(p2.log_std.row(i), std::size_t(m)));
    return kl;
}

double policy_kl(const GaussianPolicy& p1, const GaussianPolicy& p2, std::span<const double> state) {
    std::vector<double> mu1, ls1, mu2, ls2;
    policy_head_one(p1, state, mu1, ls1);
    policy_head_one(p2, state, mu2, ls2);
    return diag_gaussian_kl(mu1, ls1, mu2, ls2);
}

} // namespace recoverl
