#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "recoverl/chat.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <fstream>

#include <nlohmann/json.hpp>

namespace recoverl {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.resize(4 * ((bytes.size() + 2) / 3) + 1);
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(bytes.data()), int(bytes.size()));
    out.resize(std::size_t(n));
    return out;
}

static json message_json(const ChatMessage& m) {
    json parts = json::array();
    parts.push_back({{"type", "text"}, {"text", m.text}});
    if (m.image) {
        std::string url = "data:" + m.image->media_type + ";base64," + m.image->data_base64;
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
    return {{"role", m.role}, {"content", parts}};
}

std::string canonical_request_json(const ChatRequest& req) {
    json body;
    body["model"] = req.model;
    body["temperature"] = req.temperature;
    json msgs = json::array();
    for (const ChatMessage& m : req.messages)
        msgs.push_back(message_json(m));
    body["messages"] = msgs;
    return body.dump();
}

std::string request_digest(const ChatRequest& req) { return sha256_hex(canonical_request_json(req)); }

// ------------------------------------------------------------ recorded

RecordedClient::RecordedClient(const std::filesystem::path& transcript) {
    std::ifstream in(transcript);
    if (!in)
        throw ClientError("cannot open transcript '" + transcript.string() + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("digest"))
            throw ClientError("transcript '" + transcript.string() + "' line " + std::to_string(line_no) +
                              " is not a valid entry");
        Entry e;
        e.response = j.value("response", "");
        if (j.contains("error"))
            e.error = j["error"].get<std::string>();
        by_digest_[j["digest"].get<std::string>()] = std::move(e);
    }
}

std::string RecordedClient::complete(const ChatRequest& req) {
    std::string d = request_digest(req);
    auto it = by_digest_.find(d);
    if (it == by_digest_.end())
        throw ClientError("no recorded response for request digest " + d);
    if (it->second.error)
        throw ClientError(*it->second.error);
    return it->second.response;
}

// ------------------------------------------------------------ scripted

std::string ScriptedClient::complete(const ChatRequest&) {
    if (next_ >= responses_.size())
        throw ClientError("scripted client exhausted after " + std::to_string(responses_.size()) + " responses");
    return responses_[next_++];
}

// ------------------------------------------------------------ live

namespace {

struct ParsedEndpoint {
    bool https = false;
    std::string host;
    int port = 0;
    std::string base_path;  // "" or "/v1"
};

ParsedEndpoint parse_endpoint(const std::string& url) {
    ParsedEndpoint e;
    std::string rest;
    if (url.rfind("https://", 0) == 0) {
        e.https = true;
        rest = url.substr(8);
    } else if (url.rfind("http://", 0) == 0) {
        rest = url.substr(7);
    } else {
        throw ClientError("endpoint must start with http:// or https://");
    }
    std::string host_port;
    std::size_t slash = rest.find('/');
    if (slash == std::string::npos) {
        host_port = rest;
    } else {
        host_port = rest.substr(0, slash);
        e.base_path = rest.substr(slash);
        while (!e.base_path.empty() && e.base_path.back() == '/')
            e.base_path.pop_back();
    }
    std::size_t colon = host_port.rfind(':');
    if (colon == std::string::npos) {
        e.host = host_port;
        e.port = e.https ? 443 : 80;
    } else {
        e.host = host_port.substr(0, colon);
        try {
            e.port = std::stoi(host_port.substr(colon + 1));
        } catch (const std::exception&) {
            throw ClientError("endpoint has a malformed port");
        }
    }
    if (e.host.empty())
        throw ClientError("endpoint has no host");
    return e;
}

std::string extract_content(const json& resp) {
    if (!resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty())
        throw ClientError("response has no choices");
    const json& msg = resp["choices"][0].value("message", json::object());
    const json& content = msg.contains("content") ? msg["content"] : json();
    if (content.is_string())
        return content.get<std::string>();
    if (content.is_array()) {
        std::string out;
        for (const json& part : content)
            if (part.value("type", "") == "text")
                out += part.value("text", "");
        return out;
    }
    throw ClientError("response message has no text content");
}

} // namespace

LiveClient::LiveClient(std::string endpoint, std::string api_key)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {
    parse_endpoint(endpoint_);  // fail early on malformed urls
}

std::string LiveClient::complete(const ChatRequest& req) {
    ParsedEndpoint ep = parse_endpoint(endpoint_);
    std::string body = canonical_request_json(req);
    std::string path = ep.base_path + "/chat/completions";

    httplib::Headers headers;
    if (!api_key_.empty())
        headers.emplace("Authorization", "Bearer " + api_key_);

    httplib::Result res;
    if (ep.https) {
        httplib::SSLClient cli(ep.host, ep.port);
        cli.set_read_timeout(120, 0);
        cli.set_connection_timeout(10, 0);
        res = cli.Post(path, headers, body, "application/json");
    } else {
        httplib::Client cli(ep.host, ep.port);
        cli.set_read_timeout(120, 0);
        cli.set_connection_timeout(10, 0);
        res = cli.Post(path, headers, body, "application/json");
    }

    if (!res)
        throw ClientError("transport failure contacting " + endpoint_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200) {
        std::string excerpt = res->body.substr(0, 500);
        throw ClientError("endpoint returned status " + std::to_string(res->status) + ": " + excerpt);
    }
    json resp = json::parse(res->body, nullptr, false);
    if (resp.is_discarded())
        throw ClientError("endpoint returned invalid JSON");
    return extract_content(resp);
}

} // namespace recoverl
