#include "sage/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "sage/error.hpp"
#include "sage/random.hpp"

namespace sage {

namespace {

using nlohmann::json;

std::string required_string(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw Error(ErrorCode::MalformedRecord,
                    fmt::format("line {}: missing or non-string field '{}'", line, key), key,
                    line);
    }
    return it->get<std::string>();
}

Document parse_record(std::string_view raw, std::size_t line) {
    json obj;
    try {
        obj = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedRecord, fmt::format("line {}: {}", line, e.what()), {},
                    line);
    }
    if (!obj.is_object()) {
        throw Error(ErrorCode::MalformedRecord, fmt::format("line {}: not a JSON object", line),
                    {}, line);
    }

    Document doc;
    doc.id = required_string(obj, "id", line);
    if (obj.contains("title")) doc.title = required_string(obj, "title", line);
    doc.text = required_string(obj, obj.contains("text") ? "text" : "contents", line);

    if (doc.id.empty()) {
        throw Error(ErrorCode::MalformedRecord, fmt::format("line {}: empty id", line), "id",
                    line);
    }
    if (doc.text.empty()) {
        throw Error(ErrorCode::MalformedRecord, fmt::format("line {}: empty text", line),
                    "text", line);
    }
    return doc;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

Corpus Corpus::ingest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile,
                    fmt::format("cannot open corpus file '{}'", path.string()), path.string());
    }

    Corpus corpus;
    corpus.source_ = path.string();
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (is_blank(raw)) continue;
        corpus.add(parse_record(raw, line), line);
    }
    return corpus;
}

Corpus Corpus::from_documents(std::vector<Document> docs, std::string source) {
    Corpus corpus;
    corpus.source_ = std::move(source);
    std::size_t line = 0;
    for (auto& doc : docs) {
        ++line;
        if (doc.id.empty() || doc.text.empty()) {
            throw Error(ErrorCode::MalformedRecord,
                        fmt::format("document {}: empty id or text", line), {}, line);
        }
        corpus.add(std::move(doc), line);
    }
    return corpus;
}

void Corpus::add(Document doc, std::size_t line) {
    auto [it, inserted] = by_id_.try_emplace(doc.id, docs_.size());
    if (!inserted) {
        throw Error(ErrorCode::DuplicateId,
                    fmt::format("line {}: duplicate id '{}'", line, doc.id), doc.id, line);
    }
    docs_.push_back(std::move(doc));
}

const Document& Corpus::get_document(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        throw Error(ErrorCode::UnknownId, fmt::format("unknown document id '{}'", id),
                    std::string(id));
    }
    return docs_[it->second];
}

bool Corpus::contains(std::string_view id) const {
    return by_id_.contains(std::string(id));
}

const Document& Corpus::sample_document(std::uint64_t seed) const {
    if (docs_.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot sample from an empty corpus");
    return docs_[seeded_index(seed, docs_.size())];
}

std::vector<std::size_t> Corpus::sample_without_replacement(std::size_t count,
                                                            std::uint64_t seed) const {
    if (docs_.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot sample from an empty corpus");
    count = std::min(count, docs_.size());

    // Partial Fisher-Yates driven by the seed chain.
    std::vector<std::size_t> order(docs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t state = seed;
    for (std::size_t i = 0; i < count; ++i) {
        state = splitmix64(state);
        const auto j = i + seeded_index(state, order.size() - i);
        std::swap(order[i], order[j]);
    }
    order.resize(count);
    return order;
}

}  // namespace sage
