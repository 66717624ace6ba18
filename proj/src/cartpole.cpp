#include "recoverl/cartpole.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>

namespace recoverl {

namespace {

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

SchemaPtr cartpole_state_schema() {
    static SchemaPtr s = make_schema(
        "cartpole.state", {
                              {"x", "m, cart position along the track, 0 at center", FieldBounds{-5.0, 5.0}},
                              {"x_dot", "m/s, cart velocity", std::nullopt},
                              {"theta", "rad from upright, wrapped to (-pi, pi]; 0 is balanced, pi is hanging",
                               FieldBounds{-M_PI, M_PI + 1e-9}},
                              {"theta_dot", "rad/s, pole angular velocity", std::nullopt},
                          });
    return s;
}

SchemaPtr cartpole_action_schema() {
    static SchemaPtr s = make_schema(
        "cartpole.action",
        {{"force", "horizontal push on the cart, scaled to +-10 N", FieldBounds{-1.0, 1.0}}});
    return s;
}

SchemaPtr cartpole_view_schema() {
    static SchemaPtr s = make_schema(
        "cartpole.view",
        {
            {"x", "m, cart position", std::nullopt},
            {"x_dot", "m/s, cart velocity", std::nullopt},
            {"theta", "rad from upright in (-pi, pi]", std::nullopt},
            {"theta_dot", "rad/s", std::nullopt},
            {"cos_theta", "1 when upright, -1 when hanging", FieldBounds{-1.0, 1.0}},
            {"sin_theta", "side lean component", FieldBounds{-1.0, 1.0}},
            {"abs_theta", "rad, distance from upright", FieldBounds{0.0, M_PI + 1e-9}},
            {"abs_theta_dot", "rad/s, spin magnitude", std::nullopt},
            {"upright_err", "(1 - cos_theta)/2, 0 upright to 1 hanging", FieldBounds{0.0, 1.0}},
        });
    return s;
}

} // namespace

CartpoleEnv::CartpoleEnv(CartpoleParams params) : params_(params) {
    spec_.name = "cartpole";
    spec_.task_name = "keep the pole balanced upright above the cart while staying near the track center";
    spec_.state_schema = cartpole_state_schema();
    spec_.action_schema = cartpole_action_schema();
    spec_.reward_view_schema = cartpole_view_schema();
    spec_.dt = params_.dt;
    spec_.max_episode_steps = 1000;
    spec_.termination_text = "episode ends when |theta| exceeds 0.5 rad";
    spec_.ood_reset_noise = 0.05;
}

std::vector<double> CartpoleEnv::reset_values(ResetMode mode, Rng& rng) const {
    double x = rng.uniform(-0.05, 0.05);
    double x_dot = rng.uniform(-0.05, 0.05);
    double theta = rng.uniform(-0.05, 0.05);
    double theta_dot = rng.uniform(-0.05, 0.05);
    if (mode == ResetMode::ood)
        theta = wrap_angle(M_PI + spec_.ood_reset_noise * rng.uniform(-1.0, 1.0));
    return {x, x_dot, theta, theta_dot};
}

std::vector<double> CartpoleEnv::step_values(const StateVector& state, const ActionVector& action,
                                             double& task_reward) const {
    const CartpoleParams& p = params_;
    double x = state[0], x_dot = state[1], theta = state[2], theta_dot = state[3];
    const double a = action[0];
    const double force = p.force_scale * a;

    const double total_mass = p.cart_mass + p.pole_mass;
    const double sin_t = std::sin(theta), cos_t = std::cos(theta);
    const double temp = (force + p.pole_mass * p.half_length * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc = (p.gravity * sin_t - cos_t * temp) /
                             (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - p.pole_mass * p.half_length * theta_acc * cos_t / total_mass;

    // velocities first, then positions with the updated velocities
    x_dot += x_acc * p.dt;
    theta_dot += theta_acc * p.dt;
    x += x_dot * p.dt;
    theta = wrap_angle(theta + theta_dot * p.dt);

    task_reward = std::cos(theta) - 0.01 * a * a;
    return {x, x_dot, theta, theta_dot};
}

bool CartpoleEnv::termination_predicate(const StateVector& state) const { return std::fabs(state[2]) > 0.5; }

bool CartpoleEnv::truth_valid(const StateVector& state) const {
    return std::fabs(state[2]) <= 0.5 && std::fabs(state[3]) <= 2.0;
}

std::vector<double> CartpoleEnv::view_values(const StateVector& state) const {
    const double theta = state[2];
    const double cos_t = std::cos(theta);
    return {state[0],           state[1], theta, state[3], cos_t, std::sin(theta), std::fabs(theta),
            std::fabs(state[3]), (1.0 - cos_t) / 2.0};
}

double CartpoleEnv::pole_energy(const StateVector& state) const {
    const CartpoleParams& p = params_;
    const double inertia = (4.0 / 3.0) * p.pole_mass * p.half_length * p.half_length;
    return 0.5 * inertia * state[3] * state[3] + p.pole_mass * p.gravity * p.half_length * std::cos(state[2]);
}

SceneDocument CartpoleEnv::render_snapshot(const StateVector& state) const {
    const double x = state[0], x_dot = state[1], theta = state[2], theta_dot = state[3];
    const double deg = theta * 180.0 / M_PI;
    const double abs_t = std::fabs(theta);

    const char* pose;
    if (abs_t < 0.15)
        pose = "the pole is standing upright above the cart, balanced";
    else if (abs_t < M_PI / 4.0)
        pose = "the pole is tilted off vertical but still above the cart";
    else if (abs_t < 3.0 * M_PI / 4.0)
        pose = "the pole has swung far to the side, roughly level with the track";
    else
        pose = "the pole is hanging downward below the cart, tip pointing at the ground";

    SceneDocument doc;
    doc.text = fmt(
        "Scene snapshot: cartpole\n"
        "Side view of a wheeled cart on a horizontal track. A rigid pole is attached to the cart top by a "
        "free hinge.\n"
        "Cart position: %.2f m from track center, velocity %.2f m/s.\n"
        "Pole angle: %.2f rad (%.0f deg) from vertical-up; %s.\n"
        "Pole angular velocity: %.2f rad/s.\n"
        "Nominal operating pose: pole balanced straight up above the cart.\n",
        x, x_dot, theta, deg, pose, theta_dot);

    const double cx = 200.0 + 30.0 * x;
    const double cy = 140.0;
    const double tip_x = cx + 80.0 * std::sin(theta);
    const double tip_y = cy - 80.0 * std::cos(theta);
    doc.svg = fmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 400 240\">\n"
        "<rect width=\"400\" height=\"240\" fill=\"white\"/>\n"
        "<line x1=\"20\" y1=\"160\" x2=\"380\" y2=\"160\" stroke=\"black\" stroke-width=\"2\"/>\n"
        "<rect x=\"%.1f\" y=\"130\" width=\"50\" height=\"20\" fill=\"#555\"/>\n"
        "<circle cx=\"%.1f\" cy=\"152\" r=\"6\" fill=\"#222\"/>\n"
        "<circle cx=\"%.1f\" cy=\"152\" r=\"6\" fill=\"#222\"/>\n"
        "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#a52\" stroke-width=\"6\" "
        "stroke-linecap=\"round\"/>\n"
        "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"#a52\"/>\n"
        "</svg>\n",
        cx - 25.0, cx - 14.0, cx + 14.0, cx, cy, tip_x, tip_y, tip_x, tip_y);
    return doc;
}

std::unique_ptr<Env> CartpoleEnv::clone() const { return std::make_unique<CartpoleEnv>(*this); }

} // namespace recoverl
