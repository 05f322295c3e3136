#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "sage/error.hpp"
#include "sage/llm_gateway.hpp"

namespace sage {

using nlohmann::json;

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

// Splits "https://host:port/prefix" into origin and path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig config;
    config.url = env_or_empty("SAGE_LLM_URL");
    config.model = env_or_empty("SAGE_LLM_MODEL");
    config.api_key = env_or_empty("SAGE_LLM_KEY");
    if (config.url.empty()) throw Error(ErrorCode::InvalidConfig, "SAGE_LLM_URL is not set", "SAGE_LLM_URL");
    if (config.model.empty())
        throw Error(ErrorCode::InvalidConfig, "SAGE_LLM_MODEL is not set", "SAGE_LLM_MODEL");
    return config;
}

json make_chat_body(const ChatRequest& request, const HttpBackendConfig& config) {
    json body = {
        {"model", config.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    if (request.seed) body["seed"] = *request.seed;
    if (config.extra_params.is_object()) {
        for (const auto& [k, v] : config.extra_params.items()) body[k] = v;
    }
    return body;
}

ChatResponse parse_chat_response(std::string_view body) {
    try {
        const auto parsed = json::parse(body);
        const auto& choice = parsed.at("choices").at(0);
        const auto& content = choice.at("message").at("content");
        ChatResponse out;
        out.text = content.is_null() ? std::string() : content.get<std::string>();
        const auto finish = choice.value("finish_reason", json()).is_string()
                                ? choice.at("finish_reason").get<std::string>()
                                : std::string();
        out.truncated = finish == "length" || out.text.empty();
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendUnavailable,
                    fmt::format("malformed chat-completion response: {}", e.what()));
    }
}

HttpBackend::HttpBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleep_(std::move(sleeper)) {
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    auto [origin, prefix] = split_url(config_.url);
    origin_ = std::move(origin);
    path_ = ends_with(prefix, "/chat/completions") ? prefix : prefix + "/v1/chat/completions";
}

ChatResponse HttpBackend::do_complete(const ChatRequest& request) {
    const std::string payload = make_chat_body(request, config_).dump();
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_failure;
    const std::size_t attempts = config_.retry.delays.size() + 1;
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) sleep_(config_.retry.delays[attempt - 1]);

        // httplib clients are not safe to share across threads; one per call.
        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        auto result = client.Post(path_, headers, payload, "application/json");

        if (!result) {
            last_failure = fmt::format("transport error: {}", httplib::to_string(result.error()));
            continue;
        }
        if (result->status == 429 || result->status >= 500) {
            last_failure = fmt::format("HTTP {}", result->status);
            continue;
        }
        if (result->status < 200 || result->status >= 300) {
            throw Error(ErrorCode::BackendUnavailable,
                        fmt::format("chat endpoint rejected request: HTTP {}", result->status));
        }
        return parse_chat_response(result->body);
    }
    throw Error(ErrorCode::BackendUnavailable,
                fmt::format("chat endpoint failed after {} attempts ({})", attempts, last_failure));
}

}  // namespace sage
