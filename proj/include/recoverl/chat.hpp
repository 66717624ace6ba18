#pragma once
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace recoverl {

struct ClientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ImageAttachment {
    std::string media_type;  // e.g. "image/svg+xml"
    std::string data_base64;
};

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string text;
    std::optional<ImageAttachment> image;
};

struct ChatRequest {
    std::string model;
    double temperature = 0.0;
    std::vector<ChatMessage> messages;
};

// The canonical body doubles as the wire body: object keys sorted, message
// content always in array-of-parts form, no whitespace. Request digests are
// sha256 over these bytes, so any format change invalidates recorded
// transcripts.
std::string canonical_request_json(const ChatRequest& req);
std::string request_digest(const ChatRequest& req);

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Returns the assistant text; throws ClientError on transport or protocol
    // failure. Does not retry; retry policy belongs to the caller.
    virtual std::string complete(const ChatRequest& req) = 0;
    virtual std::string backend_name() const = 0;
};

// Replays a transcript written by a previous run, keyed by request digest.
// An unknown request is a hard, deterministic error.
class RecordedClient : public ChatClient {
public:
    explicit RecordedClient(const std::filesystem::path& transcript);
    std::string complete(const ChatRequest& req) override;
    std::string backend_name() const override { return "recorded"; }

private:
    struct Entry {
        std::string response;
        std::optional<std::string> error;
    };
    std::unordered_map<std::string, Entry> by_digest_;
};

// Canned responses in call order; for tests and fixture authoring.
class ScriptedClient : public ChatClient {
public:
    explicit ScriptedClient(std::vector<std::string> responses) : responses_(std::move(responses)) {}
    std::string complete(const ChatRequest& req) override;
    std::string backend_name() const override { return "scripted"; }
    std::size_t calls() const { return next_; }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

// OpenAI-style chat completions endpoint. The key travels only in the
// Authorization header, never in a body, so logged bodies are safe to keep.
class LiveClient : public ChatClient {
public:
    LiveClient(std::string endpoint, std::string api_key);
    std::string complete(const ChatRequest& req) override;
    std::string backend_name() const override { return "live"; }

private:
    std::string endpoint_;
    std::string api_key_;
};

} // namespace recoverl
