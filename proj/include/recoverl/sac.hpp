#pragma once
#include <cmath>
#include <span>
#include <vector>

#include "recoverl/mlp.hpp"
#include "recoverl/policy.hpp"
#include "recoverl/replay.hpp"
#include "recoverl/rng.hpp"

namespace recoverl {

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    AdamConfig adam;  // shared by policy, critics, and the temperature
    int batch_size = 256;
    std::vector<int> hidden = {256, 256};
    double init_log_alpha = 0.0;
};

// Twin critics with polyak targets, tanh-Gaussian actor, learned temperature.
struct SacState {
    SacConfig cfg;
    int obs_dim = 0;
    int act_dim = 0;
    GaussianPolicy policy;
    Mlp q1, q2;    // critics on [state | action]
    Mlp tq1, tq2;  // polyak copies
    double log_alpha = 0.0;
    double target_entropy = 0.0;  // -act_dim
    Adam opt_pi, opt_q1, opt_q2;
    AdamScalar opt_alpha;

    double alpha() const { return std::exp(log_alpha); }
};

// Init draw order is policy, q1, q2 (targets start as copies); pinned.
SacState make_sac(int obs_dim, int act_dim, const SacConfig& cfg, Rng& rng);

// y_i = r_i + gamma * (1 - terminal_i) * (min_target_q(s', a') - alpha * log pi(a'|s'))
// with a' freshly sampled from the current policy; consumes batch-size * act_dim
// normal draws.
std::vector<double> compute_target_y(const SacState& s, const Batch& b, Rng& rng);

// One Adam step per critic on its own squared Bellman residual. Returns the
// residual loss 0.5*(q - y)^2 averaged over batch and both critics.
double update_q(SacState& s, const Batch& b, Rng& rng);

// One Adam step on the reparameterized policy objective
//   mean_i [ alpha * log pi(a_i|s_i) - min_c Q_c(s_i, a_i) + w_i * KL(pi || pi_org)(s_i) ]
// where w_i comes from lpc_weights (all-zero or empty means plain SAC; the KL
// term is skipped entirely then, leaving gradients bit-identical to plain SAC).
// Returns the loss value.
double update_pi(SacState& s, const Batch& b, Rng& rng, const GaussianPolicy* pi_org = nullptr,
                 std::span<const double> lpc_weights = {});

// One Adam step on log_alpha minimizing mean_i [ -alpha * (log pi(a_i|s_i) + target_entropy) ],
// with a_i freshly sampled. Returns the loss value.
double update_alpha(SacState& s, const Batch& b, Rng& rng);

// tq <- (1 - tau) * tq + tau * q
void soft_update_targets(SacState& s);

} // namespace recoverl
