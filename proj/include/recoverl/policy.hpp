#pragma once
#include <span>
#include <utility>
#include <vector>

#include "recoverl/mlp.hpp"
#include "recoverl/rng.hpp"
#include "recoverl/schema.hpp"

namespace recoverl {

// Squashed diagonal Gaussian: the net emits [mu | log_std] per action dim,
// log_std is clamped, actions are tanh of the reparameterized draw.
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
// tanh rounds to exactly 1.0 for large inputs; keep actions strictly inside
// the open interval so downstream logs stay finite.
inline constexpr double kActionClip = 1.0 - 1e-12;

struct GaussianPolicy {
    Mlp net;
    int act_dim = 0;
};

GaussianPolicy make_policy(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& rng);

struct PolicyHead {
    Matrix mu;          // n x m
    Matrix log_std;     // n x m, post-clamp
    Matrix clamp_pass;  // 1 where the raw log-std was strictly inside the clamp range, else 0
};

// Net forward plus head split/clamp; cache holds the trunk activations for a
// later backward pass.
void policy_head_batch(const GaussianPolicy& p, const Matrix& states, MlpCache& cache, PolicyHead& head);
void policy_head_one(const GaussianPolicy& p, std::span<const double> state, std::vector<double>& mu,
                     std::vector<double>& log_std);

struct PolicySampleBatch {
    Matrix eps;  // noise draws
    Matrix u;    // mu + sigma * eps
    Matrix a;    // tanh(u), clipped to the open interval
    std::vector<double> log_prob;
};

// Noise is drawn row-major (sample, then dim); the draw order is pinned.
void policy_sample_batch(const PolicyHead& head, Rng& rng, PolicySampleBatch& out);

// log pi(a|s) for a = tanh(u) under (mu, log_std), using the softplus form of
// the tanh correction so saturated actions stay finite.
double squashed_log_prob(std::span<const double> mu, std::span<const double> log_std, std::span<const double> u);

// Pack per-dim loss gradients wrt mu and log_std into the gradient of the raw
// head output; the clamp zeroes log-std gradients outside its range.
void policy_head_backward(const PolicyHead& head, const Matrix& dmu, const Matrix& dls, Matrix& d_raw);

std::pair<std::vector<double>, double> policy_sample_one(const GaussianPolicy& p, std::span<const double> state,
                                                         Rng& rng);
std::vector<double> policy_mean_action(const GaussianPolicy& p, std::span<const double> state);

// KL(p1 || p2) between the two diagonal Gaussians, dim-summed. The tanh squash
// is a shared bijection, so this is also the KL between the squashed policies.
double diag_gaussian_kl(std::span<const double> mu1, std::span<const double> ls1, std::span<const double> mu2,
                        std::span<const double> ls2);
std::vector<double> diag_gaussian_kl_batch(const PolicyHead& p1, const PolicyHead& p2);
double policy_kl(const GaussianPolicy& p1, const GaussianPolicy& p2, std::span<const double> state);

} // namespace recoverl
