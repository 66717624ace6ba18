// Regenerates the recorded-backend fixtures under fixtures/: for each
// environment, a scripted three-phase exchange is run through the real
// pipeline against the seed-42 snapshot, leaving transcript.jsonl plus the
// program artifacts. The transcripts replay through the recorded client in
// tests and in `generate --backend recorded`.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "recoverl/chat.hpp"
#include "recoverl/env.hpp"
#include "recoverl/pipeline.hpp"
#include "recoverl/rng.hpp"

namespace fs = std::filesystem;
using namespace recoverl;

namespace {

std::vector<std::string> cartpole_responses() {
    std::string d_ood =
        "The cart is sitting near the middle of the track, but the pole is hanging below the cart, "
        "pointing almost straight down at the ground. In the nominal operating pose the pole stands "
        "upright above the cart; here it has fallen through a half turn and is dangling under the "
        "pivot, swinging only slightly. The cart itself is stationary and undamaged.";
    std::string d_recovery =
        "1. Valid state: the original task is balancing, so the robot must return to a pose where "
        "the pole stands upright above the cart, close to vertical and rotating slowly, with the "
        "cart near the center of the track. From there the balance controller can take over.\n"
        "\n"
        "2. Transition: from the hanging pose the pole cannot be lifted directly, because the cart "
        "can only push sideways. The cart has to oscillate left and right to pump energy into the "
        "pendulum, letting the swings grow until the pole rises over the top, and then decelerate "
        "the rotation so the pole arrives upright with little speed.\n"
        "\n"
        "Recovery behavior: swing the pole up by rhythmically accelerating the cart back and forth, "
        "feed in just enough energy for the tip to pass the vertical, then brake the swing and "
        "catch the pole balanced above the cart while keeping the cart near the center of the "
        "track.";
    std::string code =
        "The pole cannot be lifted directly, so the reward pays first for pumping: the pole's "
        "mechanical energy should climb until it matches the energy of the upright pose. The pole's "
        "kinetic term is about 0.0167 * theta_dot^2 and raising the tip from hanging to upright "
        "takes 0.98, so the shortfall is 0.0167 * sq(theta_dot) - 0.98 * upright_err. Once the "
        "energy is there, height itself pays, with a bonus for arriving calm, and a light charge "
        "for effort.\n"
        "\n"
        "```reward\n"
        "# pump the swing until its energy matches the upright pose, then cash it in\n"
        "let energy_gap = 0.0167 * sq(theta_dot) - 0.98 * upright_err;\n"
        "let pumped = exp(-2.0 * sq(energy_gap));\n"
        "let upness = 0.5 * (1 + cos_theta);\n"
        "let calm = exp(-0.5 * sq(theta_dot));\n"
        "return pumped + 2.0 * upness + upness * calm - 0.01 * sq(force);\n"
        "```\n"
        "\n"
        "The valid-state check mirrors the operating region of the balance task: pole close to "
        "upright and not spinning fast.\n"
        "\n"
        "```eval\n"
        "return if(abs_theta < 0.5 and abs_theta_dot < 2.0, 1, 0);\n"
        "```\n";
    return {d_ood, d_recovery, code};
}

std::vector<std::string> flipbot_responses() {
    std::string d_ood =
        "The robot has flipped onto its back: the chassis is upside down with the wheels pointing "
        "at the sky, rocking gently in place. Normally the robot drives with its wheels on the "
        "ground and the body level; here the body has rolled a half turn, so the wheels cannot "
        "reach the ground and the robot cannot drive anywhere.";
    std::string d_recovery =
        "1. Valid state: the driving task needs the wheels back on the ground, so the robot must "
        "reach a pose where the body roll is near zero and the roll rate is small, letting the "
        "wheels grip again.\n"
        "\n"
        "2. Transition: from the upside-down pose the robot should use its body roll torque to "
        "rotate about its long axis, rocking over the sideways hump in one committed motion, then "
        "damp the rotation as the wheels come down so it settles flat instead of rolling past.\n"
        "\n"
        "Recovery behavior: roll the body over from wheels-up to wheels-down with the roll "
        "actuator, braking the rotation near the end so the robot lands level and still, ready to "
        "drive again.";
    std::string code =
        "Progress is how far the body has rolled back toward wheels-down, with a bonus for "
        "arriving with the rotation damped, and a light charge for actuator effort.\n"
        "\n"
        "```reward\n"
        "# progress toward wheels-down, settle the roll before driving resumes\n"
        "let upness = 0.5 * (1 + cos_phi);\n"
        "let calm = exp(-0.5 * sq(phi_dot));\n"
        "return upness + 0.5 * upness * calm - 0.01 * (sq(drive) + sq(roll));\n"
        "```\n"
        "\n"
        "Valid means the wheels are down and the body is not still tumbling.\n"
        "\n"
        "```eval\n"
        "return if(abs_phi < 0.3 and abs_phi_dot < 2.0, 1, 0);\n"
        "```\n";
    return {d_ood, d_recovery, code};
}

void make_fixture(const std::string& env_name, std::vector<std::string> responses, const fs::path& out_root) {
    auto env = make_env(env_name);
    Rng rng(derive_seed(42, "capture"));
    StateVector state = env->reset(ResetMode::ood, rng);
    SceneDocument doc = env->render_snapshot(state);

    ScriptedClient client(std::move(responses));
    PipelineConfig cfg;  // defaults match `generate`: gpt-4o, image attached, no few-shot
    fs::path dir = out_root / env_name;
    PipelineArtifacts art = run_pipeline(client, *env, doc, PromptTemplates::defaults(), cfg, dir);

    std::printf("%s: %d exchanges, programs %s\n", env_name.c_str(), int(client.calls()),
                (dir / "reward.dsl").string().c_str());
    (void)art;
}

} // namespace

int main(int argc, char** argv) {
    fs::path out_root = argc > 1 ? argv[1] : "fixtures";
    try {
        make_fixture("cartpole", cartpole_responses(), out_root);
        make_fixture("flipbot", flipbot_responses(), out_root);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fixture generation failed: %s\n", e.what());
        return 1;
    }
    return 0;
}
