#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sage {

/// Identifies one model call: which agent run is asking (a caller-chosen
/// role tag, e.g. "d7/r1/searcher2") and how many calls that run has made
/// before this one. The scripted backend routes on this alone.
struct RoutingKey {
    std::string role;
    std::size_t turn = 0;

    friend auto operator<=>(const RoutingKey&, const RoutingKey&) = default;
};

struct ChatRequest {
    std::string prompt;
    double temperature = 1.0;
    int max_output_tokens = 2048;
    std::vector<std::string> stop_sequences;
    RoutingKey key;
    std::optional<std::uint64_t> seed;

    /// Throws InvalidArgument.
    void validate() const;
};

struct ChatResponse {
    std::string text;
    bool truncated = false;

    friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

/// Every model call in the pipeline goes through complete(). Implementations
/// must accept concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;

    ChatResponse complete(const ChatRequest& request);

    /// Number of complete() invocations so far, including failed ones.
    std::size_t calls_made() const noexcept { return calls_.load(std::memory_order_relaxed); }

protected:
    virtual ChatResponse do_complete(const ChatRequest& request) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

struct ScriptEntry {
    std::string role;
    std::size_t turn = 0;
    std::string response;
    bool truncated = false;
};

/// Deterministic backend answering from a fixed table keyed by RoutingKey.
/// Never looks at prompt content. Immutable after construction.
class ScriptedBackend final : public Backend {
public:
    /// Throws MalformedScript on duplicate keys or an empty untruncated response.
    explicit ScriptedBackend(std::vector<ScriptEntry> entries);

    std::size_t size() const noexcept { return table_.size(); }
    bool has(const RoutingKey& key) const { return table_.contains(key); }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    std::map<RoutingKey, ChatResponse> table_;
};

/// Reads a JSONL script of `{"role", "turn", "response"}` objects (optional
/// boolean `truncated`). Throws MissingFile or MalformedScript.
std::shared_ptr<ScriptedBackend> load_script(const std::filesystem::path& path);

std::vector<ScriptEntry> parse_script(std::string_view jsonl);

/// Caps the number of calls forwarded to `inner`; the call after the cap
/// throws BudgetExceeded.
class BudgetedBackend final : public Backend {
public:
    BudgetedBackend(Backend& inner, std::size_t max_calls) : inner_(inner), max_calls_(max_calls) {}

    bool exhausted() const noexcept { return forwarded_.load() > max_calls_; }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    Backend& inner_;
    std::size_t max_calls_;
    std::atomic<std::size_t> forwarded_{0};
};

struct RetryPolicy {
    /// Retries after the first failed attempt; delays[i] precedes retry i+1.
    std::vector<std::chrono::milliseconds> delays{std::chrono::seconds(1), std::chrono::seconds(2),
                                                  std::chrono::seconds(4)};
};

struct HttpBackendConfig {
    std::string url;
    std::string model;
    std::string api_key;
    RetryPolicy retry;
    int timeout_seconds = 120;
    /// Merged verbatim into the request body (provider-specific switches).
    nlohmann::json extra_params = nlohmann::json::object();

    /// Reads SAGE_LLM_URL, SAGE_LLM_MODEL and SAGE_LLM_KEY. Throws InvalidConfig
    /// when the URL or model is unset.
    static HttpBackendConfig from_env();
};

/// OpenAI-compatible chat-completion client. The rendered prompt is sent as a
/// single user message. Network errors, HTTP 429 and 5xx are retried.
class HttpBackend final : public Backend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = {});

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    HttpBackendConfig config_;
    Sleeper sleep_;
    std::string origin_;
    std::string path_;
};

/// Request body for the chat-completion endpoint; exposed for tests.
nlohmann::json make_chat_body(const ChatRequest& request, const HttpBackendConfig& config);

/// Throws BackendUnavailable on a body without a first choice.
ChatResponse parse_chat_response(std::string_view body);

}  // namespace sage
