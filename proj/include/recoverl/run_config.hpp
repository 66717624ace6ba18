#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "recoverl/retrain.hpp"
#include "recoverl/sac.hpp"

namespace recoverl {

// Everything a command needs, resolved as flags over config file over the
// defaults below. Defaults follow the pinned hyperparameter set.
struct RunConfig {
    std::string env = "cartpole";
    std::uint64_t seed = 0;

    double discount_factor = 0.99;
    double tau = 0.005;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double policy_lr = 3e-4;
    double q_lr = 3e-4;
    int batch_size = 256;
    std::size_t replay_buffer_size = 1'000'000;
    std::vector<int> hidden = {256, 256};

    double lambda = 0.05;
    long total_steps = 1'000'000;
    int eval_interval = 5000;
    int eval_episodes = 5;
    int grad_steps_per_env_step = 1;
    long checkpoint_interval = 50'000;

    std::string backend = "recorded";  // "recorded" or "live"
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string transcript;  // recorded-backend transcript file
    bool attach_image = true;
    std::string fewshot_file;

    std::string out_dir = "run";
};

// Chat calls always go out with this temperature; it is an invariant, not a
// config knob, and is listed here only so the defaults audit can show it.
inline constexpr double kLlmTemperature = 0.0;

// JSON object whose keys are the RunConfig field names. Unknown keys and
// wrong value shapes are errors naming the key.
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

std::string config_to_json(const RunConfig& c);

SacConfig sac_config(const RunConfig& c);
RetrainConfig retrain_config(const RunConfig& c);

// The ten audited defaults, one `name value` line each, fixed order.
std::string show_defaults_text();

} // namespace recoverl
