#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "recoverl/chat.hpp"
#include "recoverl/checkpoint.hpp"
#include "recoverl/dsl.hpp"
#include "recoverl/env.hpp"
#include "recoverl/pipeline.hpp"
#include "recoverl/retrain.hpp"
#include "recoverl/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace recoverl;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ValidationError("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write '" + p.string() + "'");
    out << text;
}

std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

std::string api_key_from_env() {
    const char* k = std::getenv("RECOVERL_API_KEY");
    if (!k)
        k = std::getenv("OPENAI_API_KEY");
    return k ? k : "";
}

std::unique_ptr<ChatClient> make_client(const RunConfig& cfg) {
    if (cfg.backend == "recorded") {
        if (cfg.transcript.empty())
            throw ValidationError("the recorded backend needs a transcript file (--transcript or config)");
        return std::make_unique<RecordedClient>(cfg.transcript);
    }
    if (cfg.backend == "live")
        return std::make_unique<LiveClient>(cfg.endpoint, api_key_from_env());
    throw ValidationError("backend must be 'recorded' or 'live', got '" + cfg.backend + "'");
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, long steps_run,
                    const std::vector<fs::path>& artifacts, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["config"] = json::parse(config_to_json(cfg));
    m["steps_run"] = steps_run;
    json files = json::object();
    for (const fs::path& p : artifacts)
        if (fs::exists(p))
            files[p.filename().string()] = file_digest(p);
    m["artifacts"] = files;
    for (auto it = extra.begin(); it != extra.end(); ++it)
        m[it.key()] = it.value();
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

// Policy and critics share one optimizer config by default; a differing
// policy learning rate swaps in a fresh policy optimizer.
void apply_policy_lr(SacState& s, const RunConfig& cfg) {
    if (cfg.policy_lr != cfg.q_lr) {
        AdamConfig a = s.cfg.adam;
        a.lr = cfg.policy_lr;
        s.opt_pi = Adam(s.policy.net, a);
    }
}

SacState build_fresh_sac(const Env& env, const RunConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "init"));
    SacState s =
        make_sac(env.spec().state_schema->size(), env.spec().action_schema->size(), sac_config(cfg), rng);
    apply_policy_lr(s, cfg);
    return s;
}

void check_checkpoint_dims(const CheckpointMeta& meta, const Env& env, const fs::path& ckpt) {
    const EnvSpec& spec = env.spec();
    if (meta.obs_dim != spec.state_schema->size() || meta.act_dim != spec.action_schema->size())
        throw ValidationError("checkpoint '" + ckpt.string() + "' has dims " + std::to_string(meta.obs_dim) +
                              "x" + std::to_string(meta.act_dim) + " but environment '" + spec.name +
                              "' needs " + std::to_string(spec.state_schema->size()) + "x" +
                              std::to_string(spec.action_schema->size()));
}

TrainHooks progress_hooks(const char* label) {
    TrainHooks hooks;
    std::string tag(label);
    hooks.on_eval = [tag](const CurvePoint& p, const EvalReport& rep) {
        std::printf("%s step %ld  return %.2f +- %.2f  recovery %.2f  success %.2f\n", tag.c_str(), p.step,
                    p.mean_return, p.std_return, p.recovery_fraction, rep.success_rate());
        std::fflush(stdout);
        return false;
    };
    return hooks;
}

// ------------------------------------------------------------ commands

int cmd_train_original(const RunConfig& cfg, int n_seeds) {
    auto env = make_env(cfg.env);
    fs::path out(cfg.out_dir);
    fs::create_directories(out);

    struct RunSummary {
        std::uint64_t seed;
        fs::path dir;
        double final_mean;
    };
    std::vector<RunSummary> runs;

    for (int i = 0; i < n_seeds; ++i) {
        RunConfig rc = cfg;
        rc.seed = cfg.seed + std::uint64_t(i);
        fs::path dir = n_seeds == 1 ? out : out / ("seed-" + std::to_string(rc.seed));
        fs::create_directories(dir);

        SacState sac = build_fresh_sac(*env, rc);
        std::string label = "[seed " + std::to_string(rc.seed) + "]";
        TrainResult res = train_original(*env, sac, retrain_config(rc), &dir, progress_hooks(label.c_str()));

        save_checkpoint(dir / "final.ckpt", sac, rc.env);
        write_curve_csv(dir / "curve.csv", res.curve);
        write_curve_json(dir / "curve.json", res.curve);
        write_manifest(dir, "train-original", rc, res.steps_run,
                       {dir / "final.ckpt", dir / "curve.csv", dir / "curve.json"});
        double final_mean = res.curve.empty() ? 0.0 : res.curve.back().mean_return;
        runs.push_back({rc.seed, dir, final_mean});
        std::printf("%s done  final return %.2f  checkpoint %s\n", label.c_str(), final_mean,
                    (dir / "final.ckpt").string().c_str());
    }

    if (n_seeds > 1) {
        const RunSummary* best = &runs.front();
        for (const RunSummary& r : runs)
            if (r.final_mean > best->final_mean)
                best = &r;
        json b;
        b["seed"] = best->seed;
        b["dir"] = best->dir.filename().string();
        b["final_mean_return"] = best->final_mean;
        write_file(out / "best.json", b.dump(2) + "\n");
        std::printf("best seed %llu  final return %.2f\n", (unsigned long long)best->seed, best->final_mean);
    }
    return 0;
}

int cmd_capture_ood(const RunConfig& cfg) {
    auto env = make_env(cfg.env);
    Rng rng(derive_seed(cfg.seed, "capture"));
    StateVector state = env->reset(ResetMode::ood, rng);
    SceneDocument doc = env->render_snapshot(state);

    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_file(out / "scene.txt", doc.text);
    write_file(out / "scene.svg", doc.svg);
    json st;
    st["env"] = cfg.env;
    st["values"] = state.values();
    write_file(out / "state.json", st.dump(2) + "\n");
    std::printf("snapshot written to %s (scene.txt, scene.svg, state.json)\n", out.string().c_str());
    return 0;
}

int cmd_generate(const RunConfig& cfg, const fs::path& snapshot_dir) {
    auto env = make_env(cfg.env);
    SceneDocument doc;
    doc.text = read_file(snapshot_dir / "scene.txt");
    doc.svg = read_file(snapshot_dir / "scene.svg");

    PipelineConfig pc;
    pc.model = cfg.model;
    pc.attach_image = cfg.attach_image;
    if (!cfg.fewshot_file.empty())
        pc.fewshot = read_file(cfg.fewshot_file);

    auto client = make_client(cfg);
    fs::path out(cfg.out_dir);
    run_pipeline(*client, *env, doc, PromptTemplates::defaults(), pc, out);

    write_manifest(out, "generate", cfg, 0,
                   {out / "d_ood.txt", out / "d_recovery.txt", out / "d_env.txt", out / "reward.dsl",
                    out / "eval.dsl", out / "transcript.jsonl"});
    std::printf("reward %s\n", file_digest(out / "reward.dsl").c_str());
    std::printf("eval %s\n", file_digest(out / "eval.dsl").c_str());
    return 0;
}

int cmd_retrain(const RunConfig& cfg, const fs::path& ckpt, const fs::path& artifacts) {
    auto env = make_env(cfg.env);
    CheckpointMeta meta;
    SacState loaded = load_checkpoint(ckpt, sac_config(cfg), &meta);
    check_checkpoint_dims(meta, *env, ckpt);

    // fresh critics, fresh temperature, warm-started policy
    SacState sac = build_fresh_sac(*env, cfg);
    sac.policy = loaded.policy;
    GaussianPolicy pi_org = loaded.policy;

    dsl::Program rp = dsl::load_program_file(artifacts / "reward.dsl");
    dsl::Program ep = dsl::load_program_file(artifacts / "eval.dsl");
    const EnvSpec& spec = env->spec();
    dsl::CompiledProgram c_reward = dsl::compile(rp, *spec.reward_view_schema, spec.action_schema.get());
    dsl::CompiledProgram c_eval = dsl::compile(ep, *spec.reward_view_schema, spec.action_schema.get());

    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    TrainResult res =
        retrain_loop(*env, sac, pi_org, c_reward, c_eval, retrain_config(cfg), &out, progress_hooks("[retrain]"));

    save_checkpoint(out / "final.ckpt", sac, cfg.env);
    write_curve_csv(out / "curve.csv", res.curve);
    write_curve_json(out / "curve.json", res.curve);
    json extra;
    extra["programs"] = {{"reward", file_digest(artifacts / "reward.dsl")},
                         {"eval", file_digest(artifacts / "eval.dsl")},
                         {"original_checkpoint", file_digest(ckpt)}};
    write_manifest(out, "retrain", cfg, res.steps_run,
                   {out / "final.ckpt", out / "curve.csv", out / "curve.json"}, extra);
    if (!res.curve.empty())
        std::printf("final recovery %.2f  return %.2f\n", res.curve.back().recovery_fraction,
                    res.curve.back().mean_return);
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& ckpt, const std::string& mode_str, int n,
                 const std::string& eval_program_path) {
    auto env = make_env(cfg.env);
    CheckpointMeta meta;
    SacState sac = load_checkpoint(ckpt, sac_config(cfg), &meta);
    check_checkpoint_dims(meta, *env, ckpt);
    ResetMode mode = mode_str == "ood" ? ResetMode::ood : ResetMode::original;

    std::optional<dsl::CompiledProgram> prog;
    if (!eval_program_path.empty()) {
        dsl::Program p = dsl::load_program_file(eval_program_path);
        const EnvSpec& spec = env->spec();
        prog = dsl::compile(p, *spec.reward_view_schema, spec.action_schema.get());
    }

    EvalReport rep = evaluate_policy(*env, sac.policy, n, mode, derive_seed(cfg.seed, "evaluate"),
                                     prog ? &*prog : nullptr);

    json r;
    r["env"] = cfg.env;
    r["mode"] = mode_str;
    r["episodes"] = json::array();
    for (const EpisodeRecord& e : rep.episodes)
        r["episodes"].push_back({{"task_return", e.task_return},
                                 {"zeroed_return", e.zeroed_return},
                                 {"recovered", e.recovered},
                                 {"success", e.success},
                                 {"steps", e.steps}});
    r["mean_return"] = rep.mean_return();
    r["std_return"] = rep.std_return();
    r["recovery_fraction"] = rep.recovery_fraction();
    r["success_rate"] = rep.success_rate();

    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_file(out / "report.json", r.dump(2) + "\n");
    std::printf("episodes %d  return %.2f +- %.2f  recovery %.2f  success %.2f\n", int(rep.episodes.size()),
                rep.mean_return(), rep.std_return(), rep.recovery_fraction(), rep.success_rate());
    return 0;
}

int cmd_export_curve(const fs::path& in, const std::string& out) {
    std::vector<CurvePoint> curve = load_curve_json(in);
    if (out.empty())
        std::fputs(curve_csv_string(curve).c_str(), stdout);
    else
        write_curve_csv(out, curve);
    return 0;
}

// flags beat the file, the file beats defaults; the file is applied before
// CLI11 binds the flag values on top
RunConfig prescan_config(int argc, char** argv) {
    RunConfig base;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            base = load_config_file(argv[i + 1], base);
        else if (a.rfind("--config=", 0) == 0)
            base = load_config_file(a.substr(9), base);
    }
    return base;
}

void add_common_options(CLI::App* c, RunConfig& cfg, std::string& config_path) {
    c->add_option("--config", config_path, "JSON config file; flags override it");
    c->add_option("--env", cfg.env, "environment name");
    c->add_option("--seed", cfg.seed, "root seed");
    c->add_option("--out", cfg.out_dir, "output directory");
}

void add_training_options(CLI::App* c, RunConfig& cfg) {
    c->add_option("--total-steps", cfg.total_steps, "environment steps to run");
    c->add_option("--eval-interval", cfg.eval_interval, "steps between curve evaluations");
    c->add_option("--eval-episodes", cfg.eval_episodes, "episodes per curve evaluation");
    c->add_option("--batch-size", cfg.batch_size);
    c->add_option("--buffer-size", cfg.replay_buffer_size);
    c->add_option("--checkpoint-interval", cfg.checkpoint_interval);
    c->add_option("--gamma", cfg.discount_factor);
    c->add_option("--policy-lr", cfg.policy_lr);
    c->add_option("--q-lr", cfg.q_lr);
    c->add_option("--grad-steps", cfg.grad_steps_per_env_step, "gradient passes per environment step");
}

void add_client_options(CLI::App* c, RunConfig& cfg) {
    c->add_option("--backend", cfg.backend)->check(CLI::IsMember({"recorded", "live"}));
    c->add_option("--transcript", cfg.transcript, "recorded-backend transcript file");
    c->add_option("--endpoint", cfg.endpoint, "chat-completions endpoint base URL");
    c->add_option("--model", cfg.model);
    c->add_flag("--no-image", [&cfg](std::int64_t) { cfg.attach_image = false; },
                "send text-only prompts, no scene drawing");
    c->add_option("--fewshot", cfg.fewshot_file, "worked-example file for the code prompt");
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    try {
        cfg = prescan_config(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    CLI::App app{"LLM-guided recovery training for desk-scale control tasks"};
    app.require_subcommand(1);
    std::string config_path;

    int n_seeds = 1;
    auto* train = app.add_subcommand("train-original", "train the original task policy with plain SAC");
    add_common_options(train, cfg, config_path);
    add_training_options(train, cfg);
    train->add_option("--seeds", n_seeds, "train this many seeds and mark the best")->check(CLI::PositiveNumber);

    auto* capture = app.add_subcommand("capture-ood", "reset into an out-of-distribution state and snapshot it");
    add_common_options(capture, cfg, config_path);

    fs::path snapshot_dir;
    auto* generate = app.add_subcommand("generate", "run the three-phase reward generation on a snapshot");
    add_common_options(generate, cfg, config_path);
    add_client_options(generate, cfg);
    generate->add_option("--snapshot", snapshot_dir, "directory from capture-ood")->required();

    fs::path ckpt_path, artifacts_dir;
    auto* retrain = app.add_subcommand("retrain", "retrain recovery from generated programs");
    add_common_options(retrain, cfg, config_path);
    add_training_options(retrain, cfg);
    retrain->add_option("--checkpoint", ckpt_path, "original policy checkpoint")->required();
    retrain->add_option("--artifacts", artifacts_dir, "directory holding reward.dsl and eval.dsl")->required();
    retrain->add_option("--lambda", cfg.lambda, "scale on the generated reward in invalid states");

    std::string mode_str = "original";
    std::string eval_program_path;
    int n_episodes = 5;
    auto* evaluate = app.add_subcommand("evaluate", "roll out a checkpoint greedily and report returns");
    add_common_options(evaluate, cfg, config_path);
    evaluate->add_option("--checkpoint", ckpt_path)->required();
    evaluate->add_option("--mode", mode_str, "reset mode")->check(CLI::IsMember({"original", "ood"}));
    evaluate->add_option("-n,--episodes", n_episodes)->check(CLI::NonNegativeNumber);
    evaluate->add_option("--eval-program", eval_program_path, "generated validity program for recovery flags");

    fs::path curve_in;
    std::string curve_out;
    auto* export_curve = app.add_subcommand("export-curve", "render a run's curve.json as CSV");
    export_curve->add_option("--in", curve_in, "curve.json from a training run")->required();
    export_curve->add_option("--out", curve_out, "CSV destination; stdout when omitted");

    auto* config_cmd = app.add_subcommand("config", "configuration helpers");
    config_cmd->require_subcommand(1);
    auto* show_defaults = config_cmd->add_subcommand("show-defaults", "print the audited default values");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(train))
            return cmd_train_original(cfg, n_seeds);
        if (app.got_subcommand(capture))
            return cmd_capture_ood(cfg);
        if (app.got_subcommand(generate))
            return cmd_generate(cfg, snapshot_dir);
        if (app.got_subcommand(retrain))
            return cmd_retrain(cfg, ckpt_path, artifacts_dir);
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(cfg, ckpt_path, mode_str, n_episodes, eval_program_path);
        if (app.got_subcommand(export_curve))
            return cmd_export_curve(curve_in, curve_out);
        if (config_cmd->got_subcommand(show_defaults)) {
            std::fputs(show_defaults_text().c_str(), stdout);
            return 0;
        }
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const PipelineError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
