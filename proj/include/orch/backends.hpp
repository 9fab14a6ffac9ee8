#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace orch::backends {

enum class Speaker { System, User, Assistant };

const char* to_string(Speaker speaker);

struct ChatMessage {
    Speaker speaker = Speaker::User;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

inline ChatMessage system_message(std::string content) {
    return {Speaker::System, std::move(content)};
}
inline ChatMessage user_message(std::string content) {
    return {Speaker::User, std::move(content)};
}
inline ChatMessage assistant_message(std::string content) {
    return {Speaker::Assistant, std::move(content)};
}

struct CompletionResult {
    std::string content;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    /// (token id, log-probability) per completion token, when the backend
    /// reports them.
    std::optional<std::vector<std::pair<int, double>>> token_logprobs;
};

struct SamplingParams {
    double temperature = 0.0;  // evaluation runs are greedy by default
    int max_tokens = 1024;
    bool logprobs = false;
    std::string model;
};

/// Uniform completion provider: live HTTP endpoint, scripted cassette, or a
/// recording wrapper. Handles are shareable and must accept concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(std::span<const ChatMessage> messages,
                                      const SamplingParams& params) = 0;
    virtual std::string describe() const = 0;
};

using BackendHandle = std::shared_ptr<Backend>;

/// Validates the message-list preconditions (non-empty; a system message, if
/// any, comes first) and forwards to the handle.
CompletionResult complete(const BackendHandle& handle, std::span<const ChatMessage> messages,
                          const SamplingParams& params);

/// Stable 64-bit content hash of speakers and contents, identical across
/// runs and platforms. Returned as 16 lowercase hex digits.
std::string fingerprint(std::span<const ChatMessage> messages);

/// The executor's dynamic-role system prompt.
std::string executor_system_prompt(const std::string& agent_role);

struct CassetteEntry {
    std::string fingerprint;
    std::string content;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    /// In-memory only; the cassette file format does not carry logprobs.
    std::optional<std::vector<std::pair<int, double>>> token_logprobs;
};

/// Ordered record of canned completions. In strict mode every request must
/// match the next entry's fingerprint in order.
struct Cassette {
    std::vector<CassetteEntry> entries;
    bool strict = false;
};

Cassette load_cassette(const std::filesystem::path& path, bool strict);
void save_cassette(const Cassette& cassette, const std::filesystem::path& path);

/// Deterministic playback of a cassette. Entry order is serialized
/// internally, so one episode's concurrent calls cannot interleave entries.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(Cassette cassette);
    /// Convenience: canned contents in order, non-strict, zero token counts.
    static std::shared_ptr<ScriptedBackend> from_contents(std::vector<std::string> contents);

    CompletionResult complete(std::span<const ChatMessage> messages,
                              const SamplingParams& params) override;
    std::string describe() const override;

    std::size_t entries_served() const;

private:
    Cassette cassette_;
    std::size_t next_ = 0;
    mutable std::mutex mu_;
};

struct HttpBackendConfig {
    std::string url;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key_env;  // env var holding the bearer token, may be empty
    int max_retries = 3;      // retries after the first attempt
    int retry_backoff_ms = 250;
};

/// Chat-completions HTTP client with exponential backoff on transient
/// failures (connect errors, 429, 5xx).
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    CompletionResult complete(std::span<const ChatMessage> messages,
                              const SamplingParams& params) override;
    std::string describe() const override;

private:
    HttpBackendConfig config_;
    std::string host_;  // scheme://host[:port]
    std::string path_;
    std::string api_key_;
};

/// Pass-through wrapper that appends every completion to a cassette file as
/// it happens, so a run can later be replayed without the inner backend.
class RecordBackend : public Backend {
public:
    RecordBackend(BackendHandle inner, std::filesystem::path path);
    CompletionResult complete(std::span<const ChatMessage> messages,
                              const SamplingParams& params) override;
    std::string describe() const override;

private:
    BackendHandle inner_;
    std::filesystem::path path_;
    std::mutex mu_;
};

/// Counts completion calls; test instrumentation for turn-discipline checks.
class CountingBackend : public Backend {
public:
    explicit CountingBackend(BackendHandle inner) : inner_(std::move(inner)) {}
    CompletionResult complete(std::span<const ChatMessage> messages,
                              const SamplingParams& params) override {
        ++calls_;
        return inner_->complete(messages, params);
    }
    std::string describe() const override { return "counting(" + inner_->describe() + ")"; }
    int calls() const { return calls_; }

private:
    BackendHandle inner_;
    int calls_ = 0;
};

}  // namespace orch::backends
