#pragma once
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "recoverl/dsl.hpp"
#include "recoverl/env.hpp"
#include "recoverl/replay.hpp"
#include "recoverl/sac.hpp"

namespace recoverl {

struct RetrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RetrainConfig {
    double lambda = 0.05;  // scale on the generated reward while the state is invalid; 0 is the zero-reward baseline
    long total_steps = 1'000'000;
    int eval_interval = 5000;
    int eval_episodes = 5;
    int grad_steps_per_env_step = 1;
    long checkpoint_interval = 50'000;
    std::size_t replay_capacity = 1'000'000;
    std::uint64_t seed = 0;
    SacConfig sac;
};

// r_task while the state is valid, scaled generated reward otherwise. The
// generated reward is evaluated on (next state, action) by the caller.
double select_reward(int eval_flag, double r_task, double c_reward_value, double lambda);

// Consolidation is gated off in invalid states so the recovery behavior can
// move freely away from the original policy there.
double lpc_term(int eval_flag, double kl);

struct EpisodeRecord {
    double task_return = 0.0;    // plain sum of task rewards
    double zeroed_return = 0.0;  // task rewards counted only at steps whose state passed the validity check
    bool recovered = false;      // validity flag hit 1 at some visited state
    bool success = false;        // ground-truth valid for >= 50 consecutive steps
    int steps = 0;
};

struct EvalReport {
    std::vector<EpisodeRecord> episodes;
    double mean_return() const;
    double std_return() const;
    double mean_zeroed_return() const;
    double std_zeroed_return() const;
    double recovery_fraction() const;
    double success_rate() const;
};

// Greedy mean-action rollouts. Episode e draws from derive_seed(seed,
// "eval-episode", e). Termination applies only in original mode. The validity
// check is the compiled eval program when given, ground truth otherwise.
EvalReport evaluate_policy(const Env& env, const GaussianPolicy& policy, int n_episodes, ResetMode mode,
                           std::uint64_t seed, const dsl::CompiledProgram* eval = nullptr);

// Returns follow the zeroed convention: reward at a step counts only when the
// validity check passed in that step's state.
struct CurvePoint {
    long step = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double recovery_fraction = 0.0;
    std::vector<double> episode_returns;
};

struct TrainHooks {
    // After each curve point; return true to stop the run there.
    std::function<bool(const CurvePoint&, const EvalReport&)> on_eval;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    long steps_run = 0;
    std::unique_ptr<ReplayBuffer> buffer;  // handed back so stored rewards and flags stay inspectable
};

// Plain SAC on original-mode resets with termination enforced. Evaluates at
// every multiple of eval_interval (step 0 included), checkpoints every
// checkpoint_interval steps when a directory is given.
TrainResult train_original(const Env& env, SacState& sac, const RetrainConfig& cfg,
                           const std::filesystem::path* checkpoint_dir = nullptr, const TrainHooks& hooks = {});

// Recovery retraining: ood resets with termination off; each transition stores
// the switched reward and the eval flag of its start state, and policy updates
// apply the KL pull toward pi_org weighted by those stored flags. One gradient
// pass per environment step once the buffer covers a batch.
TrainResult retrain_loop(const Env& env, SacState& sac, const GaussianPolicy& pi_org,
                         const dsl::CompiledProgram& reward, const dsl::CompiledProgram& eval,
                         const RetrainConfig& cfg, const std::filesystem::path* checkpoint_dir = nullptr,
                         const TrainHooks& hooks = {});

// step,mean_return,std_return,recovery_fraction with a header row; reals keep
// 17 significant digits.
std::string curve_csv_string(const std::vector<CurvePoint>& curve);
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);
void write_curve_json(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> load_curve_json(const std::filesystem::path& path);

} // namespace recoverl
