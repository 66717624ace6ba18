#pragma once
#include "recoverl/env.hpp"

namespace recoverl {

struct CartpoleParams {
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double half_length = 0.5;
    double gravity = 9.8;
    double dt = 0.02;
    double force_scale = 10.0;  // newtons per unit action
};

// Cart on a track with a hinged pole. theta is measured from upright and
// wrapped to (-pi, pi], so the hanging pose is theta = pi, not an ever-growing
// angle. Task reward pays cos(theta) at the next state minus a small action
// cost; the original task terminates once the pole leaves the near-upright
// band. The OOD reset drops the pole to hanging.
class CartpoleEnv : public Env {
public:
    explicit CartpoleEnv(CartpoleParams params = {});

    const CartpoleParams& params() const { return params_; }

    bool termination_predicate(const StateVector& state) const override;
    bool truth_valid(const StateVector& state) const override;
    SceneDocument render_snapshot(const StateVector& state) const override;
    std::unique_ptr<Env> clone() const override;

    // Energy of the pole alone under a clamped cart (huge cart_mass); used by
    // the integrator conservation test.
    double pole_energy(const StateVector& state) const;

protected:
    std::vector<double> reset_values(ResetMode mode, Rng& rng) const override;
    std::vector<double> step_values(const StateVector& state, const ActionVector& action,
                                    double& task_reward) const override;
    std::vector<double> view_values(const StateVector& state) const override;

private:
    CartpoleParams params_;
};

} // namespace recoverl
