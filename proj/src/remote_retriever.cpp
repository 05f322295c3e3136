#include <algorithm>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "sage/error.hpp"
#include "sage/retrieval.hpp"

namespace sage {

using nlohmann::json;

RemoteRetriever::RemoteRetriever(std::string base_url, std::size_t top_k, int timeout_seconds)
    : base_url_(std::move(base_url)), top_k_(top_k), timeout_seconds_(timeout_seconds) {
    if (top_k_ < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be >= 1", "top_k");
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::vector<RetrievalHit> RemoteRetriever::retrieve(std::string_view query) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);

    const json request = {{"query", query}, {"k", top_k_}};
    auto result = client.Post("/retrieve", request.dump(), "application/json");
    if (!result) {
        throw Error(ErrorCode::RetrievalUnavailable,
                    fmt::format("retrieval service unreachable: {}",
                                httplib::to_string(result.error())));
    }
    if (result->status < 200 || result->status >= 300) {
        throw Error(ErrorCode::RetrievalUnavailable,
                    fmt::format("retrieval service returned HTTP {}", result->status));
    }

    std::vector<RetrievalHit> hits;
    try {
        const auto body = json::parse(result->body);
        for (const auto& h : body.at("hits")) {
            hits.push_back({h.at("id").get<std::string>(), h.value("title", std::string{}),
                            h.at("text").get<std::string>(), h.at("score").get<double>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::RetrievalUnavailable,
                    fmt::format("malformed retrieval response: {}", e.what()));
    }

    // The service's ordering is not trusted; hit order must satisfy the same
    // contract as the local index.
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > top_k_) hits.resize(top_k_);
    return hits;
}

}  // namespace sage
