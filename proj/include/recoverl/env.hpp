#pragma once
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "recoverl/rng.hpp"
#include "recoverl/schema.hpp"

namespace recoverl {

enum class ResetMode { original, ood };

struct StepResult {
    StateVector next;
    double task_reward = 0.0;
    bool terminated = false;
};

// Deterministic rendering of one state for the description phase: a prose
// snapshot plus a small SVG of the same scene.
struct SceneDocument {
    std::string text;
    std::string svg;
};

struct EnvSpec {
    std::string name;
    std::string task_name;  // original-task description handed to the reasoning prompt
    SchemaPtr state_schema;
    SchemaPtr action_schema;
    SchemaPtr reward_view_schema;  // state fields first, derived features after
    double dt = 0.02;
    int max_episode_steps = 1000;
    std::string termination_text;
    double ood_reset_noise = 0.05;
};

// Environments are functional: step and reset take and return explicit state,
// episode bookkeeping (step counts, truncation) lives with the caller.
class Env {
public:
    virtual ~Env() = default;

    const EnvSpec& spec() const { return spec_; }

    // Retraining and OOD evaluation run with termination off; the original
    // task keeps it on.
    bool termination_enabled() const { return termination_enabled_; }
    void set_termination_enabled(bool on) { termination_enabled_ = on; }

    StateVector reset(ResetMode mode, Rng& rng) const;
    StepResult step(const StateVector& state, const ActionVector& action) const;
    std::vector<double> reward_view(const StateVector& state) const;

    virtual bool termination_predicate(const StateVector& state) const = 0;
    // Ground-truth recovery check, independent of any generated program.
    virtual bool truth_valid(const StateVector& state) const = 0;
    virtual SceneDocument render_snapshot(const StateVector& state) const = 0;
    virtual std::unique_ptr<Env> clone() const = 0;

protected:
    virtual std::vector<double> reset_values(ResetMode mode, Rng& rng) const = 0;
    virtual std::vector<double> step_values(const StateVector& state, const ActionVector& action,
                                            double& task_reward) const = 0;
    virtual std::vector<double> view_values(const StateVector& state) const = 0;

    EnvSpec spec_;
    bool termination_enabled_ = true;
};

std::unique_ptr<Env> make_env(std::string_view name);
std::vector<std::string> env_names();

// to (-pi, pi]
double wrap_angle(double a);

} // namespace recoverl
