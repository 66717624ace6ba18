#include "recoverl/run_config.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "recoverl/schema.hpp"

namespace recoverl {

using nlohmann::json;

namespace {

struct KeyReader {
    const json& obj;
    std::vector<std::string> seen;

    template <typename T>
    void read(const char* key, T& into) {
        seen.push_back(key);
        auto it = obj.find(key);
        if (it == obj.end())
            return;
        try {
            into = it->get<T>();
        } catch (const json::exception&) {
            throw ValidationError(std::string("config key '") + key + "': wrong value type");
        }
    }

    void check_unknown() const {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool known = false;
            for (const std::string& k : seen)
                if (k == it.key()) {
                    known = true;
                    break;
                }
            if (!known)
                throw ValidationError("config key '" + it.key() + "' is not recognized");
        }
    }
};

} // namespace

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot read config file '" + path.string() + "'");
    json obj;
    try {
        obj = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("config file '" + path.string() + "': " + e.what());
    }
    if (!obj.is_object())
        throw ValidationError("config file '" + path.string() + "': top level must be an object");

    KeyReader r{obj, {}};
    r.read("env", base.env);
    r.read("seed", base.seed);
    r.read("discount_factor", base.discount_factor);
    r.read("tau", base.tau);
    r.read("adam_beta1", base.adam_beta1);
    r.read("adam_beta2", base.adam_beta2);
    r.read("policy_lr", base.policy_lr);
    r.read("q_lr", base.q_lr);
    r.read("batch_size", base.batch_size);
    r.read("replay_buffer_size", base.replay_buffer_size);
    r.read("hidden", base.hidden);
    r.read("lambda", base.lambda);
    r.read("total_steps", base.total_steps);
    r.read("eval_interval", base.eval_interval);
    r.read("eval_episodes", base.eval_episodes);
    r.read("grad_steps_per_env_step", base.grad_steps_per_env_step);
    r.read("checkpoint_interval", base.checkpoint_interval);
    r.read("backend", base.backend);
    r.read("endpoint", base.endpoint);
    r.read("model", base.model);
    r.read("transcript", base.transcript);
    r.read("attach_image", base.attach_image);
    r.read("fewshot_file", base.fewshot_file);
    r.read("out_dir", base.out_dir);
    r.check_unknown();
    return base;
}

std::string config_to_json(const RunConfig& c) {
    json obj;
    obj["env"] = c.env;
    obj["seed"] = c.seed;
    obj["discount_factor"] = c.discount_factor;
    obj["tau"] = c.tau;
    obj["adam_beta1"] = c.adam_beta1;
    obj["adam_beta2"] = c.adam_beta2;
    obj["policy_lr"] = c.policy_lr;
    obj["q_lr"] = c.q_lr;
    obj["batch_size"] = c.batch_size;
    obj["replay_buffer_size"] = c.replay_buffer_size;
    obj["hidden"] = c.hidden;
    obj["lambda"] = c.lambda;
    obj["total_steps"] = c.total_steps;
    obj["eval_interval"] = c.eval_interval;
    obj["eval_episodes"] = c.eval_episodes;
    obj["grad_steps_per_env_step"] = c.grad_steps_per_env_step;
    obj["checkpoint_interval"] = c.checkpoint_interval;
    obj["backend"] = c.backend;
    obj["endpoint"] = c.endpoint;
    obj["model"] = c.model;
    obj["transcript"] = c.transcript;
    obj["attach_image"] = c.attach_image;
    obj["fewshot_file"] = c.fewshot_file;
    obj["out_dir"] = c.out_dir;
    return obj.dump(2);
}

SacConfig sac_config(const RunConfig& c) {
    SacConfig s;
    s.gamma = c.discount_factor;
    s.tau = c.tau;
    s.adam.lr = c.q_lr;  // policy optimizer is rebuilt separately when policy_lr differs
    s.adam.beta1 = c.adam_beta1;
    s.adam.beta2 = c.adam_beta2;
    s.batch_size = c.batch_size;
    s.hidden = c.hidden;
    return s;
}

RetrainConfig retrain_config(const RunConfig& c) {
    RetrainConfig r;
    r.lambda = c.lambda;
    r.total_steps = c.total_steps;
    r.eval_interval = c.eval_interval;
    r.eval_episodes = c.eval_episodes;
    r.grad_steps_per_env_step = c.grad_steps_per_env_step;
    r.checkpoint_interval = c.checkpoint_interval;
    r.replay_capacity = c.replay_buffer_size;
    r.seed = c.seed;
    r.sac = sac_config(c);
    return r;
}

std::string show_defaults_text() {
    const RunConfig d;
    char buf[64];
    std::string out;
    auto line = [&](const char* name, const char* fmt, auto value) {
        std::snprintf(buf, sizeof buf, fmt, value);
        out += std::string(name) + " " + buf + "\n";
    };
    line("discount_factor", "%g", d.discount_factor);
    line("adam_beta1", "%g", d.adam_beta1);
    line("adam_beta2", "%g", d.adam_beta2);
    line("policy_lr", "%g", d.policy_lr);
    line("q_lr", "%g", d.q_lr);
    line("batch_size", "%d", d.batch_size);
    line("replay_buffer_size", "%zu", d.replay_buffer_size);
    line("eval_episodes", "%d", d.eval_episodes);
    line("eval_interval", "%d", d.eval_interval);
    line("llm_temperature", "%.1f", kLlmTemperature);
    return out;
}

} // namespace recoverl
