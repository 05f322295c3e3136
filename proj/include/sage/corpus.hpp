#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sage {

struct Document {
    std::string id;
    std::string title;
    std::string text;

    friend bool operator==(const Document&, const Document&) = default;
};

/// Immutable in-memory corpus. Ids are case-sensitive opaque tokens.
///
/// Input is JSONL, one `{"id", "title", "text"}` object per line; `contents`
/// is accepted in place of `text`. Blank lines are skipped. Ingestion aborts
/// on the first missing file, malformed record, or duplicate id.
class Corpus {
public:
    static Corpus ingest(const std::filesystem::path& path);
    static Corpus from_documents(std::vector<Document> docs, std::string source = "<memory>");

    std::size_t document_count() const noexcept { return docs_.size(); }
    const std::string& source_path() const noexcept { return source_; }
    std::span<const Document> documents() const noexcept { return docs_; }

    /// Throws UnknownId.
    const Document& get_document(std::string_view id) const;
    bool contains(std::string_view id) const;

    /// Deterministic in (contents, seed), uniform over documents as seed
    /// varies. Throws EmptyCorpus.
    const Document& sample_document(std::uint64_t seed) const;

    /// First `count` entries of a seeded permutation of document indices:
    /// `count` distinct documents. `count` is clamped to document_count().
    std::vector<std::size_t> sample_without_replacement(std::size_t count,
                                                        std::uint64_t seed) const;

private:
    Corpus() = default;
    void add(Document doc, std::size_t line);

    std::string source_;
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace sage
