#include "orch/backends.hpp"

#include "orch/errors.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace orch::backends {

const char* to_string(Speaker speaker) {
    switch (speaker) {
        case Speaker::System: return "system";
        case Speaker::User: return "user";
        case Speaker::Assistant: return "assistant";
    }
    return "user";
}

CompletionResult complete(const BackendHandle& handle, std::span<const ChatMessage> messages,
                          const SamplingParams& params) {
    if (messages.empty()) throw std::invalid_argument("completion needs at least one message");
    for (std::size_t i = 1; i < messages.size(); ++i) {
        if (messages[i].speaker == Speaker::System) {
            throw std::invalid_argument("system message must come first");
        }
    }
    return handle->complete(messages, params);
}

std::string fingerprint(std::span<const ChatMessage> messages) {
    // 64-bit FNV-1a over speaker tags and contents with field separators;
    // stable across runs and platforms, unlike std::hash.
    std::uint64_t h = 14695981039346656037ULL;
    const auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    for (const auto& m : messages) {
        mix(static_cast<unsigned char>(to_string(m.speaker)[0]));
        mix(0x1F);
        for (unsigned char c : m.content) mix(c);
        mix(0x1E);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string executor_system_prompt(const std::string& agent_role) {
    if (agent_role.empty()) throw std::invalid_argument("agent_role must be non-empty");
    return "You are " + agent_role +
           ". Please read the provided content (including previous conversations and the "
           "current task) and help the user complete the task or answer the question.";
}

// --- cassette ---------------------------------------------------------------

Cassette load_cassette(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open cassette: " + path.string());
    Cassette cassette;
    cassette.strict = strict;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw ConfigError("cassette " + path.string() + " line " + std::to_string(line_no) +
                              ": not a JSON object");
        }
        CassetteEntry entry;
        entry.fingerprint = doc.value("fingerprint", std::string{});
        if (!doc.contains("content") || !doc["content"].is_string()) {
            throw ConfigError("cassette " + path.string() + " line " + std::to_string(line_no) +
                              ": missing string field 'content'");
        }
        entry.content = doc["content"].get<std::string>();
        entry.prompt_tokens = doc.value("prompt_tokens", 0);
        entry.completion_tokens = doc.value("completion_tokens", 0);
        cassette.entries.push_back(std::move(entry));
    }
    return cassette;
}

void save_cassette(const Cassette& cassette, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write cassette: " + path.string());
    for (const auto& entry : cassette.entries) {
        nlohmann::ordered_json doc;
        doc["fingerprint"] = entry.fingerprint;
        doc["content"] = entry.content;
        doc["prompt_tokens"] = entry.prompt_tokens;
        doc["completion_tokens"] = entry.completion_tokens;
        out << doc.dump() << "\n";
    }
}

ScriptedBackend::ScriptedBackend(Cassette cassette) : cassette_(std::move(cassette)) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_contents(std::vector<std::string> contents) {
    Cassette cassette;
    for (auto& content : contents) {
        CassetteEntry entry;
        entry.content = std::move(content);
        cassette.entries.push_back(std::move(entry));
    }
    return std::make_shared<ScriptedBackend>(std::move(cassette));
}

CompletionResult ScriptedBackend::complete(std::span<const ChatMessage> messages,
                                           const SamplingParams& params) {
    (void)params;
    std::lock_guard<std::mutex> lock(mu_);
    if (next_ >= cassette_.entries.size()) {
        throw CassetteMismatchError("cassette exhausted after " + std::to_string(next_) +
                                    " entries");
    }
    const CassetteEntry& entry = cassette_.entries[next_];
    if (cassette_.strict) {
        const std::string fp = fingerprint(messages);
        if (fp != entry.fingerprint) {
            throw CassetteMismatchError("cassette entry " + std::to_string(next_) +
                                        ": fingerprint " + fp + " does not match recorded " +
                                        entry.fingerprint);
        }
    }
    ++next_;
    CompletionResult result;
    result.content = entry.content;
    result.prompt_tokens = entry.prompt_tokens;
    result.completion_tokens = entry.completion_tokens;
    result.token_logprobs = entry.token_logprobs;
    return result;
}

std::string ScriptedBackend::describe() const {
    return "cassette(" + std::to_string(cassette_.entries.size()) + " entries" +
           (cassette_.strict ? ", strict)" : ")");
}

std::size_t ScriptedBackend::entries_served() const {
    std::lock_guard<std::mutex> lock(mu_);
    return next_;
}

// --- live HTTP --------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("backend url must include a scheme: " + config_.url);
    }
    const auto path_start = config_.url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = config_.url;
        path_ = "/v1/chat/completions";
    } else {
        host_ = config_.url.substr(0, path_start);
        path_ = config_.url.substr(path_start);
    }
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
}

CompletionResult HttpBackend::complete(std::span<const ChatMessage> messages,
                                       const SamplingParams& params) {
    nlohmann::ordered_json body;
    body["model"] = params.model.empty() ? config_.model : params.model;
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", to_string(m.speaker)}, {"content", m.content}});
    }
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (params.logprobs) body["logprobs"] = true;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = config_.retry_backoff_ms * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(host_);
        client.set_read_timeout(120, 0);
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw TransportError("backend " + host_ + " returned status " +
                                 std::to_string(res->status) + ": " + res->body);
        }

        const auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) throw WireFormatError("backend response is not JSON");
        try {
            const auto& choice = doc.at("choices").at(0);
            CompletionResult result;
            result.content = choice.at("message").at("content").get<std::string>();
            if (doc.contains("usage")) {
                result.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
                result.completion_tokens = doc["usage"].value("completion_tokens", 0);
            }
            if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
                choice["logprobs"].contains("content")) {
                std::vector<std::pair<int, double>> lps;
                int index = 0;
                for (const auto& tok : choice["logprobs"]["content"]) {
                    lps.emplace_back(tok.value("id", index), tok.value("logprob", 0.0));
                    ++index;
                }
                result.token_logprobs = std::move(lps);
            }
            return result;
        } catch (const nlohmann::json::exception& e) {
            throw WireFormatError(std::string("unexpected chat-completions shape: ") + e.what());
        }
    }
    throw TransportError("backend " + host_ + " unreachable after " +
                         std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::string HttpBackend::describe() const { return "http(" + host_ + path_ + ")"; }

// --- record wrapper ---------------------------------------------------------

RecordBackend::RecordBackend(BackendHandle inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
    std::ofstream out(path_, std::ios::trunc);  // start a fresh recording
    if (!out) throw ConfigError("cannot open cassette for recording: " + path_.string());
}

CompletionResult RecordBackend::complete(std::span<const ChatMessage> messages,
                                         const SamplingParams& params) {
    const std::string fp = fingerprint(messages);
    const CompletionResult result = inner_->complete(messages, params);
    std::lock_guard<std::mutex> lock(mu_);
    nlohmann::ordered_json doc;
    doc["fingerprint"] = fp;
    doc["content"] = result.content;
    doc["prompt_tokens"] = result.prompt_tokens;
    doc["completion_tokens"] = result.completion_tokens;
    std::ofstream out(path_, std::ios::app);
    out << doc.dump() << "\n";
    return result;
}

std::string RecordBackend::describe() const {
    return "record(" + inner_->describe() + " -> " + path_.string() + ")";
}

}  // namespace orch::backends

