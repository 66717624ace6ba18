#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recoverl/chat.hpp"
#include "recoverl/env.hpp"
#include "recoverl/pipeline.hpp"
#include "recoverl/rng.hpp"

using namespace recoverl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef RECOVERL_FIXTURES
#error "RECOVERL_FIXTURES must point at the repo fixtures directory"
#endif
const fs::path kFixtures = RECOVERL_FIXTURES;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const char* name) {
    fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

struct FailingClient : ChatClient {
    int calls = 0;
    std::string complete(const ChatRequest&) override {
        ++calls;
        throw ClientError("socket burned down");
    }
    std::string backend_name() const override { return "failing"; }
};

// the seed-42 snapshot that capture-ood and the fixture generator both use
SceneDocument fixture_snapshot(const Env& env) {
    Rng rng(derive_seed(42, "capture"));
    StateVector s = env.reset(ResetMode::ood, rng);
    return env.render_snapshot(s);
}

const std::string kGoodCode =
    "```reward\nreturn 1 - upright_err - 0.01 * sq(force);\n```\n"
    "```eval\nreturn abs_theta < 0.5;\n```\n";

} // namespace

TEST_CASE("template slots fill once and are not rescanned") {
    std::string out = fill_template("A {x} B {y} C {x}", {{"x", "1"}, {"y", "2"}}, "t");
    CHECK(out == "A 1 B 2 C 1");

    // a slot value containing another slot's marker stays literal
    out = fill_template("{a} and {b}", {{"a", "see {b} here"}, {"b", "two"}}, "t");
    CHECK(out == "see {b} here and two");

    // unknown braces pass through untouched
    out = fill_template("keep {this} as is {x}", {{"x", "v"}}, "t");
    CHECK(out == "keep {this} as is v");
}

TEST_CASE("missing slots only matter when their value is nonempty") {
    CHECK_THROWS_AS(fill_template("no slot here", {{"x", "value"}}, "phase-name"), PipelineError);
    try {
        fill_template("no slot here", {{"x", "value"}}, "phase-name");
    } catch (const PipelineError& e) {
        CHECK(e.phase == "phase-name");
        CHECK(std::string(e.what()) == "[phase-name] prompt template is missing the {x} slot");
    }
    // an empty value is allowed to have nowhere to go (optional few-shot)
    CHECK(fill_template("no slot here", {{"x", ""}}, "t") == "no slot here");
}

TEST_CASE("environment description renders schemas with units and ranges") {
    EnvSpec spec;
    spec.name = "rig";
    spec.task_name = "hold the arm level";
    spec.dt = 0.05;
    spec.max_episode_steps = 200;
    spec.termination_text = "episode ends when tilt exceeds 1 rad";
    spec.reward_view_schema = make_schema("rig.view", {{"tilt", "rad", FieldBounds{-2.0, 2.0}},
                                                       {"tilt_rate", "rad/s", std::nullopt},
                                                       {"aux", "", std::nullopt}});
    spec.state_schema = spec.reward_view_schema;
    spec.action_schema = make_schema("rig.act", {{"torque", "scaled torque", FieldBounds{-1.0, 1.0}}});

    CHECK(build_env_description(spec) ==
          "Environment: rig\n"
          "Original task: hold the arm level\n"
          "Control step: 0.05 s per action; episodes run 200 steps.\n"
          "Original-task termination: episode ends when tilt exceeds 1 rad (not enforced while learning "
          "recovery).\n"
          "\n"
          "State identifiers readable by reward and eval programs:\n"
          "  - tilt: rad (range -2 to 2)\n"
          "  - tilt_rate: rad/s\n"
          "  - aux\n"
          "\n"
          "Action identifiers readable by reward programs only:\n"
          "  - torque: scaled torque (range -1 to 1)\n");
}

TEST_CASE("grammar reference names every builtin") {
    std::string g = dsl_grammar_reference();
    for (const auto& n : dsl::builtin_names())
        CHECK(g.find(n + "(") != std::string::npos);
    CHECK(g.find("return expr ;") != std::string::npos);
}

TEST_CASE("hash and encoding against known vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    CHECK(base64_encode("hello") == "aGVsbG8=");
}

TEST_CASE("canonical request bytes are sorted, part-structured, and digest-stable") {
    ChatRequest req;
    req.model = "m";
    req.temperature = 0.0;
    req.messages = {{"user", "hi", std::nullopt}};
    std::string body = canonical_request_json(req);
    CHECK(body ==
          R"({"messages":[{"content":[{"text":"hi","type":"text"}],"role":"user"}],"model":"m","temperature":0.0})");
    CHECK(request_digest(req) == sha256_hex(body));

    ChatRequest with_image = req;
    with_image.messages[0].image = ImageAttachment{"image/svg+xml", "QUJD"};
    std::string body2 = canonical_request_json(with_image);
    CHECK(body2.find(R"("image_url":{"url":"data:image/svg+xml;base64,QUJD"})") != std::string::npos);
    CHECK(request_digest(with_image) != request_digest(req));

    // digest tracks every request field
    ChatRequest other = req;
    other.temperature = 1.0;
    CHECK(request_digest(other) != request_digest(req));
}

TEST_CASE("transcript log writes one json line per exchange as it happens") {
    fs::path dir = fresh_dir("recoverl-test-transcript");
    fs::path file = dir / "t.jsonl";
    TranscriptLog log(file);

    ChatRequest req;
    req.model = "m";
    req.messages = {{"user", "q1", std::nullopt}};
    log.append(Exchange{req, "a1", std::nullopt});
    CHECK(log.entries().size() == 1);

    ChatRequest req2 = req;
    req2.messages[0].text = "q2";
    log.append(Exchange{req2, "", std::string("boom")});

    std::istringstream lines(slurp(file));
    std::string line;
    REQUIRE(std::getline(lines, line));
    json j1 = json::parse(line);
    CHECK(j1["digest"] == request_digest(req));
    CHECK(j1["response"] == "a1");
    CHECK(j1["request"] == json::parse(canonical_request_json(req)));
    CHECK_FALSE(j1.contains("error"));

    REQUIRE(std::getline(lines, line));
    json j2 = json::parse(line);
    CHECK(j2["digest"] == request_digest(req2));
    CHECK(j2["error"] == "boom");
    CHECK_FALSE(j2.contains("response"));
    CHECK_FALSE(std::getline(lines, line));

    // a fresh log on the same path truncates it
    TranscriptLog fresh(file);
    CHECK(slurp(file).empty());
    fs::remove_all(dir);
}

TEST_CASE("a transcript written by the log replays through the recorded client") {
    fs::path dir = fresh_dir("recoverl-test-replay");
    fs::path file = dir / "t.jsonl";
    {
        TranscriptLog log(file);
        ChatRequest ok;
        ok.model = "m";
        ok.messages = {{"user", "works", std::nullopt}};
        log.append(Exchange{ok, "the answer", std::nullopt});
        ChatRequest bad;
        bad.model = "m";
        bad.messages = {{"user", "fails", std::nullopt}};
        log.append(Exchange{bad, "", std::string("status 500")});
    }

    RecordedClient client(file);
    ChatRequest ok;
    ok.model = "m";
    ok.messages = {{"user", "works", std::nullopt}};
    CHECK(client.complete(ok) == "the answer");

    ChatRequest bad;
    bad.model = "m";
    bad.messages = {{"user", "fails", std::nullopt}};
    CHECK_THROWS_WITH_AS(client.complete(bad), "status 500", ClientError);

    ChatRequest unknown;
    unknown.model = "m";
    unknown.messages = {{"user", "never seen", std::nullopt}};
    try {
        client.complete(unknown);
        FAIL("expected ClientError");
    } catch (const ClientError& e) {
        std::string msg = e.what();
        CHECK(msg == "no recorded response for request digest " + request_digest(unknown));
    }
    fs::remove_all(dir);
}

TEST_CASE("recorded client rejects missing and malformed transcripts") {
    CHECK_THROWS_AS(RecordedClient("/nonexistent/t.jsonl"), ClientError);
    fs::path dir = fresh_dir("recoverl-test-badlog");
    fs::path file = dir / "t.jsonl";
    {
        std::ofstream out(file);
        out << "{\"no_digest\": true}\n";
    }
    try {
        RecordedClient client(file);
        FAIL("expected ClientError");
    } catch (const ClientError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("scene description retries transport failures, then aborts with the phase") {
    FailingClient client;
    TranscriptLog log;
    PipelineConfig cfg;
    SceneDocument doc{"a scene", ""};
    try {
        describe_ood(client, doc, PromptTemplates::defaults(), cfg, log);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.phase == "ood-description");
        std::string msg = e.what();
        CHECK(msg.find("[ood-description]") == 0);
        CHECK(msg.find("after 3 attempts") != std::string::npos);
        CHECK(msg.find("socket burned down") != std::string::npos);
    }
    CHECK(client.calls == 3);
    REQUIRE(log.entries().size() == 3);
    for (const Exchange& e : log.entries()) {
        REQUIRE(e.error.has_value());
        CHECK(*e.error == "socket burned down");
    }
    // identical request each retry
    CHECK(request_digest(log.entries()[0].request) == request_digest(log.entries()[2].request));
}

TEST_CASE("empty responses are retried with the same request") {
    ScriptedClient client({"", "a real description"});
    TranscriptLog log;
    PipelineConfig cfg;
    SceneDocument doc{"a scene", ""};
    std::string d = describe_ood(client, doc, PromptTemplates::defaults(), cfg, log);
    CHECK(d == "a real description");
    CHECK(client.calls() == 2);
    REQUIRE(log.entries().size() == 2);
    CHECK(request_digest(log.entries()[0].request) == request_digest(log.entries()[1].request));
}

TEST_CASE("scene image attaches only when configured and present") {
    SceneDocument doc{"text part", "<svg>pic</svg>"};
    PromptTemplates t = PromptTemplates::defaults();

    ScriptedClient c1({"r"});
    TranscriptLog l1;
    PipelineConfig with_image;
    describe_ood(c1, doc, t, with_image, l1);
    REQUIRE(l1.entries()[0].request.messages.size() == 1);
    REQUIRE(l1.entries()[0].request.messages[0].image.has_value());
    CHECK(l1.entries()[0].request.messages[0].image->media_type == "image/svg+xml");
    CHECK(l1.entries()[0].request.messages[0].image->data_base64 == base64_encode(doc.svg));
    CHECK(l1.entries()[0].request.messages[0].text.find("text part") != std::string::npos);

    ScriptedClient c2({"r"});
    TranscriptLog l2;
    PipelineConfig no_image;
    no_image.attach_image = false;
    describe_ood(c2, doc, t, no_image, l2);
    CHECK_FALSE(l2.entries()[0].request.messages[0].image.has_value());
}

TEST_CASE("behavior reasoning requires both inputs before calling out") {
    ScriptedClient client({"never used"});
    TranscriptLog log;
    PipelineConfig cfg;
    CHECK_THROWS_AS(reason_behavior(client, "", "task", PromptTemplates::defaults(), cfg, log), PipelineError);
    CHECK_THROWS_AS(reason_behavior(client, "ood", "", PromptTemplates::defaults(), cfg, log), PipelineError);
    CHECK(client.calls() == 0);
    CHECK(log.entries().empty());

    std::string d = reason_behavior(client, "the ood text", "the task", PromptTemplates::defaults(), cfg, log);
    CHECK(d == "never used");
    const std::string& prompt = log.entries()[0].request.messages[0].text;
    CHECK(prompt.find("the ood text") != std::string::npos);
    CHECK(prompt.find("the task") != std::string::npos);
    CHECK(prompt.find("Recovery behavior:") != std::string::npos);
}

TEST_CASE("code generation accepts valid programs on the first try") {
    auto env = make_env("cartpole");
    ScriptedClient client({kGoodCode});
    TranscriptLog log;
    PipelineConfig cfg;
    std::string raw;
    auto [reward, eval] = generate_code(client, "swing up", "env text", env->spec(), PromptTemplates::defaults(),
                                        cfg, log, &raw);
    CHECK(reward.kind == dsl::ProgramKind::reward);
    CHECK(eval.kind == dsl::ProgramKind::eval);
    CHECK(raw == kGoodCode);
    CHECK(client.calls() == 1);
    const std::string& prompt = log.entries()[0].request.messages[0].text;
    CHECK(prompt.find("swing up") != std::string::npos);
    CHECK(prompt.find("env text") != std::string::npos);
    CHECK(prompt.find("clip(x, lo, hi)") != std::string::npos);  // grammar made it in
}

TEST_CASE("rejected code is fed back with the errors and retried in-context") {
    auto env = make_env("cartpole");
    // first answer reads an unknown identifier and an action from eval
    std::string bad =
        "```reward\nreturn pole_height;\n```\n"
        "```eval\nreturn force < 1;\n```\n";
    ScriptedClient client({bad, kGoodCode});
    TranscriptLog log;
    PipelineConfig cfg;
    auto [reward, eval] = generate_code(client, "swing up", "env text", env->spec(), PromptTemplates::defaults(),
                                        cfg, log, nullptr);
    CHECK(client.calls() == 2);
    REQUIRE(log.entries().size() == 2);

    const auto& retry = log.entries()[1].request.messages;
    REQUIRE(retry.size() == 3);
    CHECK(retry[0].text == log.entries()[0].request.messages[0].text);
    CHECK(retry[1].role == "assistant");
    CHECK(retry[1].text == bad);
    CHECK(retry[2].role == "user");
    CHECK(retry[2].text.find("Those programs were rejected") != std::string::npos);
    CHECK(retry[2].text.find("unknown identifier 'pole_height'") != std::string::npos);
    CHECK(retry[2].text.find("eval programs may not read action 'force'") != std::string::npos);
    // feedback changes the request, so the digests differ
    CHECK(request_digest(log.entries()[0].request) != request_digest(log.entries()[1].request));
    CHECK(dsl::validate(reward, *env->spec().reward_view_schema, env->spec().action_schema.get()).empty());
    CHECK(dsl::validate(eval, *env->spec().reward_view_schema, nullptr).empty());
}

TEST_CASE("code generation gives up after the attempt budget, listing every failure") {
    auto env = make_env("cartpole");
    std::string no_blocks = "I cannot write programs today.";
    std::string bad_parse = "```reward\nreturn 1 +;\n```\n```eval\nreturn 1;\n```\n";
    ScriptedClient client({no_blocks, bad_parse, no_blocks});
    TranscriptLog log;
    PipelineConfig cfg;
    try {
        generate_code(client, "r", "e", env->spec(), PromptTemplates::defaults(), cfg, log, nullptr);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.phase == "code-generation");
        std::string msg = e.what();
        CHECK(msg.find("no valid programs after 3 attempts") != std::string::npos);
        CHECK(msg.find("attempt 1: no fenced code block tagged `reward`") != std::string::npos);
        CHECK(msg.find("attempt 2: parse failed") != std::string::npos);
        CHECK(msg.find("attempt 3:") != std::string::npos);
    }
    CHECK(client.calls() == 3);
}

TEST_CASE("the full pipeline persists artifacts incrementally") {
    auto env = make_env("cartpole");
    SceneDocument doc = fixture_snapshot(*env);
    fs::path dir = fresh_dir("recoverl-test-pipe");

    // phase 3 never succeeds: phases 1 and 2 must still be on disk
    ScriptedClient client({"ood text", "recovery text", "no code", "still none", "nope"});
    PipelineConfig cfg;
    CHECK_THROWS_AS(run_pipeline(client, *env, doc, PromptTemplates::defaults(), cfg, dir), PipelineError);
    CHECK(slurp(dir / "d_ood.txt") == "ood text");
    CHECK(slurp(dir / "d_recovery.txt") == "recovery text");
    CHECK(slurp(dir / "d_env.txt") == build_env_description(env->spec()));
    CHECK_FALSE(fs::exists(dir / "reward.dsl"));
    CHECK_FALSE(fs::exists(dir / "eval.dsl"));
    // every exchange, including the failed ones, is in the transcript
    std::istringstream lines(slurp(dir / "transcript.jsonl"));
    int n = 0;
    std::string line;
    while (std::getline(lines, line))
        ++n;
    CHECK(n == 5);
    fs::remove_all(dir);
}

TEST_CASE("repo fixtures replay byte-identically through the recorded backend") {
    for (const std::string env_name : {"cartpole", "flipbot"}) {
        CAPTURE(env_name);
        fs::path fixture = kFixtures / env_name;
        REQUIRE(fs::exists(fixture / "transcript.jsonl"));

        auto env = make_env(env_name);
        SceneDocument doc = fixture_snapshot(*env);
        fs::path dir = fresh_dir("recoverl-test-fixture-replay");

        RecordedClient client(fixture / "transcript.jsonl");
        PipelineConfig cfg;
        PipelineArtifacts art = run_pipeline(client, *env, doc, PromptTemplates::defaults(), cfg, dir);

        for (const char* f : {"d_ood.txt", "d_recovery.txt", "d_env.txt", "reward.dsl", "eval.dsl",
                              "transcript.jsonl"})
            CHECK(slurp(dir / f) == slurp(fixture / f));
        CHECK(art.transcript.size() == 3);
        fs::remove_all(dir);
    }
}

TEST_CASE("fixture programs behave sensibly on their environments") {
    struct Case {
        const char* env_name;
        double hanging_angle;
    };
    for (Case c : {Case{"cartpole", M_PI}, Case{"flipbot", M_PI}}) {
        CAPTURE(c.env_name);
        auto env = make_env(c.env_name);
        dsl::Program rp = dsl::load_program_file(kFixtures / c.env_name / "reward.dsl");
        dsl::Program ep = dsl::load_program_file(kFixtures / c.env_name / "eval.dsl");
        auto reward = dsl::compile(rp, *env->spec().reward_view_schema, env->spec().action_schema.get());
        auto eval = dsl::compile(ep, *env->spec().reward_view_schema, env->spec().action_schema.get());

        auto flat = validate_state({0.0, 0.0, c.hanging_angle, 0.0}, env->spec().state_schema);
        auto up = validate_state({0.0, 0.0, 0.0, 0.0}, env->spec().state_schema);
        CHECK(eval.eval_flag(env->reward_view(flat)) == 0);
        CHECK(eval.eval_flag(env->reward_view(up)) == 1);
        // truth and program agree on the boundary cases used by retraining
        CHECK(env->truth_valid(up));
        CHECK_FALSE(env->truth_valid(flat));

        std::vector<double> idle(std::size_t(env->spec().action_schema->size()), 0.0);
        double r_flat = reward.eval_reward(env->reward_view(flat), idle);
        double r_up = reward.eval_reward(env->reward_view(up), idle);
        CHECK(std::isfinite(r_flat));
        CHECK(r_up > r_flat);  // dense shaping must prefer the recovered pose
    }
}
