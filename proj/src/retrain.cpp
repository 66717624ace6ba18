#include "recoverl/retrain.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "recoverl/checkpoint.hpp"

namespace recoverl {

double select_reward(int eval_flag, double r_task, double c_reward_value, double lambda) {
    return eval_flag ? r_task : lambda * c_reward_value;
}

double lpc_term(int eval_flag, double kl) {
    return eval_flag ? kl : 0.0;
}

// ------------------------------------------------------------ evaluation

namespace {

double mean_of(const std::vector<EpisodeRecord>& eps, double EpisodeRecord::* member) {
    if (eps.empty())
        return 0.0;
    double s = 0.0;
    for (const EpisodeRecord& e : eps)
        s += e.*member;
    return s / double(eps.size());
}

double std_of(const std::vector<EpisodeRecord>& eps, double EpisodeRecord::* member) {
    if (eps.empty())
        return 0.0;
    double m = mean_of(eps, member);
    double s = 0.0;
    for (const EpisodeRecord& e : eps) {
        double d = e.*member - m;
        s += d * d;
    }
    return std::sqrt(s / double(eps.size()));
}

double frac_of(const std::vector<EpisodeRecord>& eps, bool EpisodeRecord::* member) {
    if (eps.empty())
        return 0.0;
    int n = 0;
    for (const EpisodeRecord& e : eps)
        n += e.*member ? 1 : 0;
    return double(n) / double(eps.size());
}

} // namespace

double EvalReport::mean_return() const { return mean_of(episodes, &EpisodeRecord::task_return); }
double EvalReport::std_return() const { return std_of(episodes, &EpisodeRecord::task_return); }
double EvalReport::mean_zeroed_return() const { return mean_of(episodes, &EpisodeRecord::zeroed_return); }
double EvalReport::std_zeroed_return() const { return std_of(episodes, &EpisodeRecord::zeroed_return); }
double EvalReport::recovery_fraction() const { return frac_of(episodes, &EpisodeRecord::recovered); }
double EvalReport::success_rate() const { return frac_of(episodes, &EpisodeRecord::success); }

constexpr int kSuccessHold = 50;  // consecutive ground-truth-valid steps

EvalReport evaluate_policy(const Env& env, const GaussianPolicy& policy, int n_episodes, ResetMode mode,
                           std::uint64_t seed, const dsl::CompiledProgram* eval) {
    std::unique_ptr<Env> e = env.clone();
    e->set_termination_enabled(mode == ResetMode::original);
    const EnvSpec& spec = e->spec();

    auto flag_of = [&](const StateVector& st) -> int {
        if (eval)
            return eval->eval_flag(e->reward_view(st));
        return e->truth_valid(st) ? 1 : 0;
    };

    EvalReport rep;
    rep.episodes.reserve(std::size_t(std::max(n_episodes, 0)));
    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng(derive_seed(seed, "eval-episode", std::uint64_t(ep)));
        StateVector s = e->reset(mode, rng);
        EpisodeRecord rec;
        int flag = flag_of(s);
        rec.recovered = flag != 0;
        int hold = e->truth_valid(s) ? 1 : 0;
        for (int t = 0; t < spec.max_episode_steps; ++t) {
            ActionVector action(policy_mean_action(policy, s.span()), spec.action_schema);
            StepResult sr = e->step(s, action);
            rec.task_return += sr.task_reward;
            if (flag)
                rec.zeroed_return += sr.task_reward;
            ++rec.steps;
            s = std::move(sr.next);
            flag = flag_of(s);
            rec.recovered = rec.recovered || flag != 0;
            if (e->truth_valid(s)) {
                if (++hold >= kSuccessHold)
                    rec.success = true;
            } else {
                hold = 0;
            }
            if (sr.terminated)
                break;
        }
        rep.episodes.push_back(std::move(rec));
    }
    return rep;
}

// ------------------------------------------------------------ training loops

namespace {

struct LoopSpec {
    ResetMode reset_mode = ResetMode::original;
    bool termination = true;
    const dsl::CompiledProgram* reward = nullptr;
    const dsl::CompiledProgram* eval = nullptr;
    const GaussianPolicy* pi_org = nullptr;
    double lambda = 0.0;
};

void check_config(const RetrainConfig& cfg, const SacState& sac) {
    if (cfg.total_steps < 0)
        throw RetrainError("total_steps must be >= 0");
    if (cfg.eval_interval <= 0)
        throw RetrainError("eval_interval must be positive");
    if (cfg.grad_steps_per_env_step < 0)
        throw RetrainError("grad_steps_per_env_step must be >= 0");
    if (cfg.lambda < 0.0)
        throw RetrainError("lambda must be >= 0");
    if (cfg.replay_capacity < std::size_t(sac.cfg.batch_size))
        throw RetrainError("replay capacity smaller than the batch size");
}

[[noreturn]] void rethrow_dsl(const char* which, long step, const dsl::EvalError& err) {
    throw RetrainError("step " + std::to_string(step) + ": " + which + " program failed: " + err.what());
}

TrainResult run_loop(const Env& proto, SacState& sac, const RetrainConfig& cfg, const LoopSpec& loop,
                     const std::filesystem::path* checkpoint_dir, const TrainHooks& hooks) {
    check_config(cfg, sac);
    std::unique_ptr<Env> env = proto.clone();
    env->set_termination_enabled(loop.termination);
    const EnvSpec& spec = env->spec();

    Rng env_rng(derive_seed(cfg.seed, "env"));
    Rng policy_rng(derive_seed(cfg.seed, "policy"));
    Rng buffer_rng(derive_seed(cfg.seed, "buffer"));

    TrainResult result;
    result.buffer = std::make_unique<ReplayBuffer>(cfg.replay_capacity, spec.state_schema, spec.action_schema);

    StateVector state = env->reset(loop.reset_mode, env_rng);
    int episode_steps = 0;
    Batch batch;
    std::vector<double> lpc_weights;

    for (long step = 0;; ++step) {
        if (step % cfg.eval_interval == 0) {
            EvalReport rep;
            try {
                rep = evaluate_policy(*env, sac.policy, cfg.eval_episodes, loop.reset_mode,
                                      derive_seed(cfg.seed, "curve-eval", std::uint64_t(step / cfg.eval_interval)),
                                      loop.eval);
            } catch (const dsl::EvalError& err) {
                rethrow_dsl("eval", step, err);
            }
            CurvePoint pt;
            pt.step = step;
            pt.mean_return = rep.mean_zeroed_return();
            pt.std_return = rep.std_zeroed_return();
            pt.recovery_fraction = rep.recovery_fraction();
            for (const EpisodeRecord& e : rep.episodes)
                pt.episode_returns.push_back(e.zeroed_return);
            result.curve.push_back(pt);
            if (hooks.on_eval && hooks.on_eval(result.curve.back(), rep)) {
                result.steps_run = step;
                return result;
            }
        }
        if (step == cfg.total_steps) {
            result.steps_run = step;
            return result;
        }
        if (checkpoint_dir && cfg.checkpoint_interval > 0 && step > 0 && step % cfg.checkpoint_interval == 0)
            save_checkpoint(*checkpoint_dir / ("step-" + std::to_string(step) + ".ckpt"), sac, spec.name);

        auto [act_values, log_prob] = policy_sample_one(sac.policy, state.span(), policy_rng);
        (void)log_prob;
        ActionVector action(std::move(act_values), spec.action_schema);
        StepResult sr = env->step(state, action);

        int flag = 1;
        double r = sr.task_reward;
        if (loop.eval) {
            try {
                flag = loop.eval->eval_flag(env->reward_view(state));
            } catch (const dsl::EvalError& err) {
                rethrow_dsl("eval", step, err);
            }
            double c = 0.0;
            try {
                c = loop.reward->eval_reward(env->reward_view(sr.next), action.span());
            } catch (const dsl::EvalError& err) {
                rethrow_dsl("reward", step, err);
            }
            r = select_reward(flag, sr.task_reward, c, loop.lambda);
        }
        result.buffer->push(Transition{state, action, r, sr.next, flag, sr.terminated});

        if (result.buffer->size() >= std::size_t(sac.cfg.batch_size)) {
            for (int g = 0; g < cfg.grad_steps_per_env_step; ++g) {
                result.buffer->sample_into(batch, std::size_t(sac.cfg.batch_size), buffer_rng);
                update_q(sac, batch, policy_rng);
                if (loop.pi_org) {
                    lpc_weights.resize(std::size_t(batch.size()));
                    for (int i = 0; i < batch.size(); ++i)
                        lpc_weights[std::size_t(i)] = double(batch.flag[std::size_t(i)]);
                    update_pi(sac, batch, policy_rng, loop.pi_org, lpc_weights);
                } else {
                    update_pi(sac, batch, policy_rng);
                }
                update_alpha(sac, batch, policy_rng);
                soft_update_targets(sac);
            }
        }

        ++episode_steps;
        if (sr.terminated || episode_steps >= spec.max_episode_steps) {
            state = env->reset(loop.reset_mode, env_rng);
            episode_steps = 0;
        } else {
            state = std::move(sr.next);
        }
    }
}

} // namespace

TrainResult train_original(const Env& env, SacState& sac, const RetrainConfig& cfg,
                           const std::filesystem::path* checkpoint_dir, const TrainHooks& hooks) {
    LoopSpec loop;
    loop.reset_mode = ResetMode::original;
    loop.termination = true;
    return run_loop(env, sac, cfg, loop, checkpoint_dir, hooks);
}

TrainResult retrain_loop(const Env& env, SacState& sac, const GaussianPolicy& pi_org,
                         const dsl::CompiledProgram& reward, const dsl::CompiledProgram& eval,
                         const RetrainConfig& cfg, const std::filesystem::path* checkpoint_dir,
                         const TrainHooks& hooks) {
    LoopSpec loop;
    loop.reset_mode = ResetMode::ood;
    loop.termination = false;
    loop.reward = &reward;
    loop.eval = &eval;
    loop.pi_org = &pi_org;
    loop.lambda = cfg.lambda;
    return run_loop(env, sac, cfg, loop, checkpoint_dir, hooks);
}

// ------------------------------------------------------------ curve files

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string curve_csv_string(const std::vector<CurvePoint>& curve) {
    std::string out = "step,mean_return,std_return,recovery_fraction\n";
    for (const CurvePoint& p : curve)
        out += std::to_string(p.step) + ',' + g17(p.mean_return) + ',' + g17(p.std_return) + ',' +
               g17(p.recovery_fraction) + '\n';
    return out;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw RetrainError("cannot write '" + path.string() + "'");
    out << curve_csv_string(curve);
}

void write_curve_json(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
    nlohmann::json arr = nlohmann::json::array();
    for (const CurvePoint& p : curve) {
        nlohmann::json j;
        j["step"] = p.step;
        j["mean_return"] = p.mean_return;
        j["std_return"] = p.std_return;
        j["recovery_fraction"] = p.recovery_fraction;
        j["episode_returns"] = p.episode_returns;
        arr.push_back(std::move(j));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw RetrainError("cannot write '" + path.string() + "'");
    out << arr.dump(2) << '\n';
}

std::vector<CurvePoint> load_curve_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw RetrainError("cannot read '" + path.string() + "'");
    nlohmann::json arr = nlohmann::json::parse(in);
    std::vector<CurvePoint> curve;
    for (const nlohmann::json& j : arr) {
        CurvePoint p;
        p.step = j.at("step").get<long>();
        p.mean_return = j.at("mean_return").get<double>();
        p.std_return = j.at("std_return").get<double>();
        p.recovery_fraction = j.at("recovery_fraction").get<double>();
        if (j.contains("episode_returns"))
            p.episode_returns = j.at("episode_returns").get<std::vector<double>>();
        curve.push_back(std::move(p));
    }
    return curve;
}

} // namespace recoverl
