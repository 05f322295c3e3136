#include "sage/llm_gateway.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sage/error.hpp"

namespace sage {

using nlohmann::json;

void ChatRequest::validate() const {
    if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "prompt must be non-empty", "prompt");
    if (!(temperature >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0", "temperature");
    if (max_output_tokens <= 0)
        throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive",
                    "max_output_tokens");
}

ChatResponse Backend::complete(const ChatRequest& request) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    request.validate();
    return do_complete(request);
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) {
    for (auto& e : entries) {
        if (e.response.empty() && !e.truncated) {
            throw Error(ErrorCode::MalformedScript,
                        fmt::format("empty response for ({}, {}) must be marked truncated", e.role,
                                    e.turn),
                        e.role, e.turn);
        }
        RoutingKey key{std::move(e.role), e.turn};
        auto [it, inserted] =
            table_.try_emplace(key, ChatResponse{std::move(e.response), e.truncated});
        if (!inserted) {
            throw Error(ErrorCode::MalformedScript,
                        fmt::format("duplicate script entry ({}, {})", key.role, key.turn),
                        key.role, key.turn);
        }
    }
}

ChatResponse ScriptedBackend::do_complete(const ChatRequest& request) {
    auto it = table_.find(request.key);
    if (it == table_.end()) {
        throw Error(ErrorCode::ScriptExhausted,
                    fmt::format("no scripted response for ({}, {})", request.key.role,
                                request.key.turn),
                    request.key.role, request.key.turn);
    }
    return it->second;
}

std::vector<ScriptEntry> parse_script(std::string_view jsonl) {
    std::vector<ScriptEntry> entries;
    std::istringstream in{std::string(jsonl)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto obj = json::parse(raw);
            const auto turn = obj.at("turn").get<long long>();
            if (turn < 0) throw std::out_of_range("negative turn");
            entries.push_back({obj.at("role").get<std::string>(), static_cast<std::size_t>(turn),
                               obj.at("response").get<std::string>(),
                               obj.value("truncated", false)});
        } catch (const std::exception& e) {
            throw Error(ErrorCode::MalformedScript, fmt::format("script line {}: {}", line, e.what()),
                        {}, line);
        }
    }
    return entries;
}

std::shared_ptr<ScriptedBackend> load_script(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile, fmt::format("cannot open script '{}'", path.string()),
                    path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return std::make_shared<ScriptedBackend>(parse_script(buffer.str()));
}

ChatResponse BudgetedBackend::do_complete(const ChatRequest& request) {
    if (forwarded_.fetch_add(1, std::memory_order_relaxed) >= max_calls_) {
        throw Error(ErrorCode::BudgetExceeded,
                    fmt::format("call budget of {} exhausted", max_calls_));
    }
    return inner_.complete(request);
}

}  // namespace sage
