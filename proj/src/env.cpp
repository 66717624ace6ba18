#include "recoverl/env.hpp"

#include <cmath>

#include "recoverl/cartpole.hpp"
#include "recoverl/flipbot.hpp"

namespace recoverl {

double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * M_PI);  // [-pi, pi]
    if (w <= -M_PI)
        w = M_PI;
    return w;
}

StateVector Env::reset(ResetMode mode, Rng& rng) const {
    return validate_state(reset_values(mode, rng), spec_.state_schema);
}

StepResult Env::step(const StateVector& state, const ActionVector& action) const {
    StepResult r;
    double reward = 0.0;
    r.next = validate_state(step_values(state, action, reward), spec_.state_schema);
    r.task_reward = reward;
    r.terminated = termination_enabled_ && termination_predicate(r.next);
    return r;
}

std::vector<double> Env::reward_view(const StateVector& state) const {
    std::vector<double> v = view_values(state);
    if (int(v.size()) != spec_.reward_view_schema->size())
        throw ValidationError("env '" + spec_.name + "': reward view size mismatch");
    return v;
}

std::unique_ptr<Env> make_env(std::string_view name) {
    if (name == "cartpole")
        return std::make_unique<CartpoleEnv>();
    if (name == "flipbot")
        return std::make_unique<FlipbotEnv>();
    std::string known;
    for (const std::string& n : env_names())
        known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown environment '" + std::string(name) + "'; available: " + known);
}

std::vector<std::string> env_names() { return {"cartpole", "flipbot"}; }

} // namespace recoverl
