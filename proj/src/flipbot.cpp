#include "recoverl/flipbot.hpp"

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

SchemaPtr flipbot_state_schema() {
    static SchemaPtr s = make_schema(
        "flipbot.state", {
                             {"x", "m, position along the course", std::nullopt},
                             {"x_dot", "m/s, forward velocity", std::nullopt},
                             {"phi", "rad body roll, wrapped to (-pi, pi]; 0 wheels down, pi flipped over",
                              FieldBounds{-M_PI, M_PI + 1e-9}},
                             {"phi_dot", "rad/s, roll rate", std::nullopt},
                         });
    return s;
}

SchemaPtr flipbot_action_schema() {
    static SchemaPtr s = make_schema("flipbot.action",
                                     {
                                         {"drive", "wheel drive, grips only while wheels are down",
                                          FieldBounds{-1.0, 1.0}},
                                         {"roll", "body roll torque", FieldBounds{-1.0, 1.0}},
                                     });
    return s;
}

SchemaPtr flipbot_view_schema() {
    static SchemaPtr s = make_schema(
        "flipbot.view", {
                            {"x", "m, position along the course", std::nullopt},
                            {"x_dot", "m/s, forward velocity", std::nullopt},
                            {"phi", "rad body roll in (-pi, pi]", std::nullopt},
                            {"phi_dot", "rad/s, roll rate", std::nullopt},
                            {"cos_phi", "1 wheels down, -1 flipped", FieldBounds{-1.0, 1.0}},
                            {"sin_phi", "side roll component", FieldBounds{-1.0, 1.0}},
                            {"abs_phi", "rad, distance from wheels-down", FieldBounds{0.0, M_PI + 1e-9}},
                            {"abs_phi_dot", "rad/s, roll speed", std::nullopt},
                            {"upright_err", "(1 - cos_phi)/2, 0 wheels down to 1 flipped", FieldBounds{0.0, 1.0}},
                        });
    return s;
}

} // namespace

FlipbotEnv::FlipbotEnv(FlipbotParams params) : params_(params) {
    spec_.name = "flipbot";
    spec_.task_name = "drive forward along the course with the wheels on the ground";
    spec_.state_schema = flipbot_state_schema();
    spec_.action_schema = flipbot_action_schema();
    spec_.reward_view_schema = flipbot_view_schema();
    spec_.dt = params_.dt;
    spec_.max_episode_steps = 1000;
    spec_.termination_text = "episode ends when |phi| exceeds 0.3 rad";
    spec_.ood_reset_noise = 0.05;
}

std::vector<double> FlipbotEnv::reset_values(ResetMode mode, Rng& rng) const {
    double x = rng.uniform(-0.05, 0.05);
    double x_dot = rng.uniform(-0.05, 0.05);
    double phi = rng.uniform(-0.05, 0.05);
    double phi_dot = rng.uniform(-0.05, 0.05);
    if (mode == ResetMode::ood)
        phi = wrap_angle(M_PI + spec_.ood_reset_noise * rng.uniform(-1.0, 1.0));
    return {x, x_dot, phi, phi_dot};
}

std::vector<double> FlipbotEnv::step_values(const StateVector& state, const ActionVector& action,
                                            double& task_reward) const {
    const FlipbotParams& p = params_;
    double x = state[0], x_dot = state[1], phi = state[2], phi_dot = state[3];
    const double drive = action[0], roll = action[1];

    const bool grip = std::fabs(phi) < p.upright_band;
    const double x_acc = (grip ? p.drive_accel * drive : 0.0) - p.lin_damping * x_dot;
    // chassis potential: stable at phi = 0 and phi = pi, barrier at +-pi/2
    const double phi_acc = p.roll_accel * roll - p.gravity_gain * std::sin(2.0 * phi) - p.ang_damping * phi_dot;

    x_dot += x_acc * p.dt;
    phi_dot += phi_acc * p.dt;
    x += x_dot * p.dt;
    phi = wrap_angle(phi + phi_dot * p.dt);

    const bool grip_next = std::fabs(phi) < p.upright_band;
    task_reward = (grip_next ? x_dot : 0.0) - 0.01 * (drive * drive + roll * roll);
    return {x, x_dot, phi, phi_dot};
}

bool FlipbotEnv::termination_predicate(const StateVector& state) const {
    return std::fabs(state[2]) > params_.upright_band;
}

bool FlipbotEnv::truth_valid(const StateVector& state) const { return std::fabs(state[2]) <= params_.upright_band; }

std::vector<double> FlipbotEnv::view_values(const StateVector& state) const {
    const double phi = state[2];
    const double cos_p = std::cos(phi);
    return {state[0],            state[1], phi, state[3], cos_p, std::sin(phi), std::fabs(phi),
            std::fabs(state[3]), (1.0 - cos_p) / 2.0};
}

SceneDocument FlipbotEnv::render_snapshot(const StateVector& state) const {
    const double x = state[0], x_dot = state[1], phi = state[2], phi_dot = state[3];
    const double deg = phi * 180.0 / M_PI;
    const double abs_p = std::fabs(phi);

    const char* pose;
    if (abs_p < params_.upright_band)
        pose = "the rover sits wheels-down on the ground, ready to drive";
    else if (abs_p < M_PI / 2.0)
        pose = "the rover is rolled onto its side edge, wheels partly off the ground";
    else if (abs_p < 3.0 * M_PI / 4.0)
        pose = "the rover is rolled past its side, wheels pointing sideways-up";
    else
        pose = "the rover is flipped onto its back, wheels pointing at the sky";

    SceneDocument doc;
    doc.text = fmt(
        "Scene snapshot: flipbot\n"
        "Side view of a low two-wheeled rover on flat ground. The body can roll about its long axis.\n"
        "Position along course: %.2f m, forward velocity %.2f m/s.\n"
        "Body roll: %.2f rad (%.0f deg) from wheels-down; %s.\n"
        "Roll rate: %.2f rad/s.\n"
        "Nominal operating pose: wheels flat on the ground, body level.\n",
        x, x_dot, phi, deg, pose, phi_dot);

    const double cx = 200.0;
    const double cy = 150.0;
    doc.svg = fmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 400 240\">\n"
        "<rect width=\"400\" height=\"240\" fill=\"white\"/>\n"
        "<line x1=\"20\" y1=\"170\" x2=\"380\" y2=\"170\" stroke=\"black\" stroke-width=\"2\"/>\n"
        "<g transform=\"rotate(%.1f %.1f %.1f)\">\n"
        "<rect x=\"%.1f\" y=\"%.1f\" width=\"90\" height=\"26\" rx=\"6\" fill=\"#357\"/>\n"
        "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"12\" fill=\"#222\"/>\n"
        "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"12\" fill=\"#222\"/>\n"
        "<rect x=\"%.1f\" y=\"%.1f\" width=\"16\" height=\"10\" fill=\"#c93\"/>\n"
        "</g>\n"
        "</svg>\n",
        deg, cx, cy, cx - 45.0, cy - 13.0, cx - 28.0, cy + 13.0, cx + 28.0, cy + 13.0, cx - 8.0, cy - 23.0);
    return doc;
}

std::unique_ptr<Env> FlipbotEnv::clone() const { return std::make_unique<FlipbotEnv>(*this); }

} // namespace recoverl
