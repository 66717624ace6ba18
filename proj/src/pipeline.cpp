#include "recoverl/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace recoverl {

using nlohmann::json;

PipelineError::PipelineError(std::string phase_name, const std::string& msg)
    : std::runtime_error("[" + phase_name + "] " + msg), phase(std::move(phase_name)) {}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.p_ood =
        "You are looking at a captured snapshot of a robot that appears to be outside its normal "
        "operating condition.\n"
        "\n"
        "Scene capture:\n"
        "{snapshot}\n"
        "\n"
        "In a few sentences, describe the robot's current physical configuration and how it differs "
        "from the nominal operating pose. Stick to what the scene shows; do not guess at causes and "
        "do not propose fixes yet.\n";
    t.p_br =
        "A robot is stuck in the abnormal situation described below and has to get back to normal "
        "operation on its own.\n"
        "\n"
        "Current situation:\n"
        "{d_ood}\n"
        "\n"
        "Original task of the robot: {d_task}\n"
        "\n"
        "Reason step by step:\n"
        "1. First, identify the valid state: describe the pose the robot must reach so that the "
        "original task can be performed again.\n"
        "2. Then, derive the recovery behavior: the motion that carries the robot from the current "
        "situation to that valid state.\n"
        "\n"
        "Finish with a paragraph starting with \"Recovery behavior:\" that summarizes the motion the "
        "robot should learn.\n";
    t.p_cg =
        "Write two small programs for a reinforcement-learning agent that must learn the recovery "
        "behavior described below.\n"
        "\n"
        "Recovery behavior:\n"
        "{d_recovery}\n"
        "\n"
        "Environment interface:\n"
        "{d_env}\n"
        "\n"
        "Programs are written in this expression language:\n"
        "{grammar}\n"
        "{fewshot}"
        "Respond with exactly two fenced code blocks.\n"
        "The first block, tagged `reward`, computes a dense scalar reward measuring progress toward "
        "the recovery behavior; make it smooth and informative everywhere, not a sparse 0/1 signal. "
        "It may read state and action identifiers.\n"
        "The second block, tagged `eval`, returns 1 if the current state is valid for the original "
        "task and 0 otherwise. It may read state identifiers only.\n";
    return t;
}

std::string fill_template(const std::string& tmpl, const std::vector<std::pair<std::string, std::string>>& slots,
                          const std::string& phase) {
    std::string out;
    out.reserve(tmpl.size());
    std::vector<bool> used(slots.size(), false);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        bool matched = false;
        if (tmpl[i] == '{') {
            for (std::size_t s = 0; s < slots.size(); ++s) {
                const std::string& name = slots[s].first;
                if (tmpl.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < tmpl.size() &&
                    tmpl[i + 1 + name.size()] == '}') {
                    out += slots[s].second;
                    used[s] = true;
                    i += name.size() + 2;
                    matched = true;
                    break;
                }
            }
        }
        if (!matched)
            out += tmpl[i++];
    }
    for (std::size_t s = 0; s < slots.size(); ++s)
        if (!used[s] && !slots[s].second.empty())
            throw PipelineError(phase, "prompt template is missing the {" + slots[s].first + "} slot");
    return out;
}

std::string dsl_grammar_reference() {
    return "program := (let NAME = expr ;)* return expr ;\n"
           "# starts a comment. Whitespace is free.\n"
           "Operators, loosest binding first: or | and | < <= > >= == | + - | * / | unary - and not.\n"
           "Comparisons and and/or/not yield 1 or 0; any nonzero value counts as true.\n"
           "if(cond, a, b) picks a when cond is nonzero, else b; only the taken branch is evaluated.\n"
           "Functions: abs(x), min(a,b), max(a,b), exp(x), log(x), sqrt(x), tanh(x), sin(x), cos(x), "
           "clip(x, lo, hi), sq(x).\n"
           "log of a non-positive value, division by zero, and sqrt of a negative value are runtime "
           "errors: guard them.\n"
           "A reward program returns one scalar. An eval program must return exactly 0 or 1, so its "
           "return expression has to be a comparison, a logical expression, or if(..., 1, 0) with 0/1 "
           "branches.\n";
}

namespace {

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void describe_fields(std::string& out, const FieldSchema& schema) {
    for (const Field& f : schema.fields()) {
        out += "  - " + f.name;
        if (!f.unit.empty())
            out += ": " + f.unit;
        if (f.bounds)
            out += " (range " + fmt_num(f.bounds->lo) + " to " + fmt_num(f.bounds->hi) + ")";
        out += "\n";
    }
}

} // namespace

std::string build_env_description(const EnvSpec& spec) {
    std::string out;
    out += "Environment: " + spec.name + "\n";
    out += "Original task: " + spec.task_name + "\n";
    out += "Control step: " + fmt_num(spec.dt) + " s per action; episodes run " +
           std::to_string(spec.max_episode_steps) + " steps.\n";
    out += "Original-task termination: " + spec.termination_text + " (not enforced while learning recovery).\n";
    out += "\nState identifiers readable by reward and eval programs:\n";
    describe_fields(out, *spec.reward_view_schema);
    out += "\nAction identifiers readable by reward programs only:\n";
    describe_fields(out, *spec.action_schema);
    return out;
}

// ------------------------------------------------------------ transcript

TranscriptLog::TranscriptLog(std::filesystem::path file) : file_(std::move(file)) {
    std::ofstream out(*file_, std::ios::binary | std::ios::trunc);  // start clean
}

void TranscriptLog::append(Exchange e) {
    if (file_) {
        json j;
        j["digest"] = request_digest(e.request);
        j["request"] = json::parse(canonical_request_json(e.request));
        if (e.error)
            j["error"] = *e.error;
        else
            j["response"] = e.response;
        std::ofstream out(*file_, std::ios::binary | std::ios::app);
        out << j.dump() << '\n';
    }
    entries_.push_back(std::move(e));
}

// ------------------------------------------------------------ phases

namespace {

ChatRequest make_request(const PipelineConfig& cfg, std::vector<ChatMessage> messages) {
    ChatRequest req;
    req.model = cfg.model;
    req.temperature = 0.0;  // pinned for the whole pipeline
    req.messages = std::move(messages);
    return req;
}

// One client call with logging; transport failures are logged and rethrown as
// PipelineError by the caller after its retry budget runs out.
std::optional<std::string> try_call(ChatClient& client, const ChatRequest& req, TranscriptLog& log,
                                    std::string& last_error) {
    try {
        std::string response = client.complete(req);
        log.append(Exchange{req, response, std::nullopt});
        if (response.empty()) {
            last_error = "empty response";
            return std::nullopt;
        }
        return response;
    } catch (const ClientError& e) {
        log.append(Exchange{req, "", e.what()});
        last_error = e.what();
        return std::nullopt;
    }
}

} // namespace

std::string describe_ood(ChatClient& client, const SceneDocument& snapshot, const PromptTemplates& templates,
                         const PipelineConfig& cfg, TranscriptLog& log) {
    const std::string phase = "ood-description";
    std::string prompt = fill_template(templates.p_ood, {{"snapshot", snapshot.text}}, phase);
    ChatMessage msg{"user", prompt, std::nullopt};
    if (cfg.attach_image && !snapshot.svg.empty())
        msg.image = ImageAttachment{"image/svg+xml", base64_encode(snapshot.svg)};
    ChatRequest req = make_request(cfg, {msg});

    std::string last_error;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt)
        if (auto response = try_call(client, req, log, last_error))
            return *response;
    throw PipelineError(phase, "no usable response after " + std::to_string(cfg.max_attempts) +
                                   " attempts; last error: " + last_error);
}

std::string reason_behavior(ChatClient& client, const std::string& d_ood, const std::string& d_task,
                            const PromptTemplates& templates, const PipelineConfig& cfg, TranscriptLog& log) {
    const std::string phase = "behavior-reasoning";
    if (d_ood.empty())
        throw PipelineError(phase, "d_ood is empty");
    if (d_task.empty())
        throw PipelineError(phase, "d_task is empty");
    std::string prompt = fill_template(templates.p_br, {{"d_ood", d_ood}, {"d_task", d_task}}, phase);
    ChatRequest req = make_request(cfg, {{"user", prompt, std::nullopt}});

    std::string last_error;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt)
        if (auto response = try_call(client, req, log, last_error))
            return *response;
    throw PipelineError(phase, "no usable response after " + std::to_string(cfg.max_attempts) +
                                   " attempts; last error: " + last_error);
}

namespace {

// ```tag\n ... \n``` anywhere in the text
std::optional<std::string> extract_block(const std::string& text, const std::string& tag) {
    const std::string opener = "```" + tag;
    std::size_t at = 0;
    while ((at = text.find(opener, at)) != std::string::npos) {
        std::size_t body = at + opener.size();
        // the tag must end the fence line
        while (body < text.size() && (text[body] == ' ' || text[body] == '\r'))
            ++body;
        if (body >= text.size() || text[body] != '\n') {
            at += opener.size();
            continue;
        }
        ++body;
        std::size_t close = text.find("```", body);
        if (close == std::string::npos)
            return std::nullopt;
        return text.substr(body, close - body);
    }
    return std::nullopt;
}

} // namespace

std::pair<dsl::Program, dsl::Program> generate_code(ChatClient& client, const std::string& d_recovery,
                                                    const std::string& d_env, const EnvSpec& env_spec,
                                                    const PromptTemplates& templates, const PipelineConfig& cfg,
                                                    TranscriptLog& log, std::string* raw_response) {
    const std::string phase = "code-generation";
    if (d_recovery.empty())
        throw PipelineError(phase, "d_recovery is empty");
    if (d_env.empty())
        throw PipelineError(phase, "d_env is empty");

    std::string fewshot_text;
    if (cfg.fewshot && !cfg.fewshot->empty())
        fewshot_text = "Worked example for a different robot:\n" + *cfg.fewshot + "\n";
    std::string prompt = fill_template(templates.p_cg,
                                       {{"d_recovery", d_recovery},
                                        {"d_env", d_env},
                                        {"grammar", dsl_grammar_reference()},
                                        {"fewshot", fewshot_text}},
                                       phase);

    std::vector<ChatMessage> messages = {{"user", prompt, std::nullopt}};
    std::vector<std::string> failures;

    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        ChatRequest req = make_request(cfg, messages);
        std::string last_error;
        auto response = try_call(client, req, log, last_error);
        if (!response) {
            failures.push_back(last_error);
            continue;  // transport or empty: same request again
        }

        std::string problem;
        std::optional<std::string> reward_src = extract_block(*response, "reward");
        std::optional<std::string> eval_src = extract_block(*response, "eval");
        if (!reward_src || !eval_src) {
            problem = !reward_src ? "no fenced code block tagged `reward` found"
                                  : "no fenced code block tagged `eval` found";
        } else {
            try {
                dsl::Program reward = dsl::parse(*reward_src, dsl::ProgramKind::reward);
                dsl::Program eval = dsl::parse(*eval_src, dsl::ProgramKind::eval);
                auto issues = dsl::validate(reward, *env_spec.reward_view_schema, env_spec.action_schema.get());
                auto eval_issues = dsl::validate(eval, *env_spec.reward_view_schema, env_spec.action_schema.get());
                issues.insert(issues.end(), eval_issues.begin(), eval_issues.end());
                if (issues.empty()) {
                    if (raw_response)
                        *raw_response = *response;
                    return {std::move(reward), std::move(eval)};
                }
                problem = "validation failed:";
                for (const dsl::ValidationIssue& is : issues)
                    problem += "\n  line " + std::to_string(is.pos.line) + " col " + std::to_string(is.pos.col) +
                               ": " + is.message;
            } catch (const dsl::ParseError& e) {
                problem = std::string("parse failed: ") + e.what();
            }
        }

        failures.push_back(problem);
        messages.push_back({"assistant", *response, std::nullopt});
        messages.push_back({"user",
                            "Those programs were rejected: " + problem +
                                "\nRespond again with exactly two corrected fenced code blocks tagged "
                                "`reward` and `eval`.",
                            std::nullopt});
    }

    std::string detail;
    for (std::size_t i = 0; i < failures.size(); ++i)
        detail += "\n  attempt " + std::to_string(i + 1) + ": " + failures[i];
    throw PipelineError(phase, "no valid programs after " + std::to_string(cfg.max_attempts) + " attempts:" + detail);
}

// ------------------------------------------------------------ end to end

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw PipelineError("persist", "cannot write '" + path.string() + "'");
    out << text;
}

} // namespace

PipelineArtifacts run_pipeline(ChatClient& client, const Env& env, const SceneDocument& snapshot,
                               const PromptTemplates& templates, const PipelineConfig& cfg,
                               const std::filesystem::path& run_dir) {
    std::filesystem::create_directories(run_dir);
    TranscriptLog log(run_dir / "transcript.jsonl");

    PipelineArtifacts art;
    try {
        art.d_ood = describe_ood(client, snapshot, templates, cfg, log);
        write_text_file(run_dir / "d_ood.txt", art.d_ood);

        art.d_recovery = reason_behavior(client, art.d_ood, env.spec().task_name, templates, cfg, log);
        write_text_file(run_dir / "d_recovery.txt", art.d_recovery);

        art.d_env = build_env_description(env.spec());
        write_text_file(run_dir / "d_env.txt", art.d_env);

        auto [reward, eval] =
            generate_code(client, art.d_recovery, art.d_env, env.spec(), templates, cfg, log, &art.raw_code_response);
        art.reward_program = std::move(reward);
        art.eval_program = std::move(eval);
        dsl::save_program_file(run_dir / "reward.dsl", art.reward_program);
        dsl::save_program_file(run_dir / "eval.dsl", art.eval_program);
    } catch (...) {
        art.transcript = log.entries();
        throw;
    }
    art.transcript = log.entries();
    return art;
}

} // namespace recoverl
