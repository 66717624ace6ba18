#pragma once
#include "recoverl/env.hpp"

namespace recoverl {

struct FlipbotParams {
    double dt = 0.02;
    double drive_accel = 5.0;     // forward acceleration per unit drive, wheels down only
    double roll_accel = 8.0;      // roll acceleration per unit roll torque
    double gravity_gain = 2.0;    // restoring strength of the sin(2*phi) chassis potential
    double lin_damping = 0.5;
    double ang_damping = 0.5;
    double upright_band = 0.3;    // |phi| below this counts as wheels-down
};

// Low-slung two-wheeled rover with a roll actuator. phi is body roll, wrapped
// to (-pi, pi]. The chassis potential has stable rest poses at phi = 0
// (wheels down) and phi = pi (flipped on its back); driving only grips when
// wheels are down. Task reward is forward speed while upright minus action
// cost. The OOD reset starts the rover flipped.
class FlipbotEnv : public Env {
public:
    explicit FlipbotEnv(FlipbotParams params = {});

    const FlipbotParams& params() const { return params_; }

    bool termination_predicate(const StateVector& state) const override;
    bool truth_valid(const StateVector& state) const override;
    SceneDocument render_snapshot(const StateVector& state) const override;
    std::unique_ptr<Env> clone() const override;

protected:
    std::vector<double> reset_values(ResetMode mode, Rng& rng) const override;
    std::vector<double> step_values(const StateVector& state, const ActionVector& action,
                                    double& task_reward) const override;
    std::vector<double> view_values(const StateVector& state) const override;

private:
    FlipbotParams params_;
};

} // namespace recoverl
