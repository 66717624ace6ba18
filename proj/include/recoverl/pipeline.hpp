#pragma once
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "recoverl/chat.hpp"
#include "recoverl/dsl.hpp"
#include "recoverl/env.hpp"

namespace recoverl {

// Three-phase recovery-reward generation: describe the out-of-distribution
// scene, reason out the recovery behavior, then generate reward/eval programs,
// each phase one or more chat calls against a pluggable backend.

struct PipelineError : std::runtime_error {
    PipelineError(std::string phase_name, const std::string& msg);
    std::string phase;
};

struct PromptTemplates {
    std::string p_ood;  // slot: {snapshot}
    std::string p_br;   // slots: {d_ood}, {d_task}
    std::string p_cg;   // slots: {d_recovery}, {d_env}, {grammar}, {fewshot}
    static PromptTemplates defaults();
};

struct PipelineConfig {
    std::string model = "gpt-4o";
    bool attach_image = true;  // attach the scene drawing alongside the text
    std::optional<std::string> fewshot;
    int max_attempts = 3;  // per phase, covering transport retries and code-repair rounds
};

struct Exchange {
    ChatRequest request;
    std::string response;
    std::optional<std::string> error;  // set when the call failed instead
};

// Collects every exchange (retries included) and, when a file is attached,
// appends each one as a JSON line immediately, so an aborted run leaves a
// usable partial transcript. The file doubles as a recorded-backend fixture.
class TranscriptLog {
public:
    TranscriptLog() = default;
    explicit TranscriptLog(std::filesystem::path file);
    void append(Exchange e);
    const std::vector<Exchange>& entries() const { return entries_; }

private:
    std::vector<Exchange> entries_;
    std::optional<std::filesystem::path> file_;
};

struct PipelineArtifacts {
    std::string d_ood;
    std::string d_recovery;
    std::string d_env;
    std::string raw_code_response;
    dsl::Program reward_program;
    dsl::Program eval_program;
    std::vector<Exchange> transcript;
};

// Template slot filling; throws PipelineError when a required slot is absent
// from the template. Slot values are never rescanned for further slots.
std::string fill_template(const std::string& tmpl, const std::vector<std::pair<std::string, std::string>>& slots,
                          const std::string& phase);

std::string dsl_grammar_reference();
std::string build_env_description(const EnvSpec& spec);

std::string describe_ood(ChatClient& client, const SceneDocument& snapshot, const PromptTemplates& templates,
                         const PipelineConfig& cfg, TranscriptLog& log);
std::string reason_behavior(ChatClient& client, const std::string& d_ood, const std::string& d_task,
                            const PromptTemplates& templates, const PipelineConfig& cfg, TranscriptLog& log);
std::pair<dsl::Program, dsl::Program> generate_code(ChatClient& client, const std::string& d_recovery,
                                                    const std::string& d_env, const EnvSpec& env_spec,
                                                    const PromptTemplates& templates, const PipelineConfig& cfg,
                                                    TranscriptLog& log, std::string* raw_response = nullptr);

// Runs the three phases in order, persisting each artifact into run_dir as it
// lands: d_ood.txt, d_recovery.txt, d_env.txt, reward.dsl, eval.dsl,
// transcript.jsonl. A failure in phase N leaves the artifacts of phases < N
// on disk.
PipelineArtifacts run_pipeline(ChatClient& client, const Env& env, const SceneDocument& snapshot,
                               const PromptTemplates& templates, const PipelineConfig& cfg,
                               const std::filesystem::path& run_dir);

} // namespace recoverl
