#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sage/corpus.hpp"

namespace sage {

/// Serial kernels are the reference path; Parallel kernels must produce
/// bit-identical results.
enum class Execution { Serial, Parallel };

/// Lowercases ASCII and splits on every run of non-alphanumeric ASCII bytes.
/// Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct RetrievalConfig {
    std::size_t top_k = 3;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;

    /// Throws InvalidConfig.
    void validate() const;
};

struct RetrievalHit {
    std::string doc_id;
    std::string title;
    std::string text;
    double score = 0.0;

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

/// Inverted index with BM25 statistics. Immutable after build; shares
/// ownership of the corpus it was built from.
class Index {
public:
    using TermId = std::uint32_t;

    /// Throws EmptyCorpus.
    static Index build(std::shared_ptr<const Corpus> corpus,
                       Execution exec = Execution::Parallel);

    const Corpus& corpus() const noexcept { return *corpus_; }
    std::size_t document_count() const noexcept { return doc_lengths_.size(); }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    double average_length() const noexcept { return avg_length_; }
    std::uint32_t document_length(std::size_t doc) const { return doc_lengths_.at(doc); }

    std::optional<TermId> term_id(std::string_view term) const;
    /// 0 for terms outside the vocabulary.
    std::size_t document_frequency(std::string_view term) const;
    std::span<const Posting> postings(TermId term) const { return postings_.at(term); }
    std::span<const std::uint32_t> document_lengths() const noexcept { return doc_lengths_; }

private:
    Index() = default;

    std::shared_ptr<const Corpus> corpus_;
    std::unordered_map<std::string, TermId> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_length_ = 0.0;
};

/// Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Each distinct
/// query term contributes once. Returns at most top_k hits ordered by
/// descending score, ties by ascending doc id; a query whose terms are all
/// out of vocabulary yields no hits. Throws EmptyQuery when the query has no
/// tokens.
std::vector<RetrievalHit> search(const Index& index, std::string_view query,
                                 const RetrievalConfig& config,
                                 Execution exec = Execution::Parallel);

/// Renders hits as the body of an `<information>` block: one line per hit,
/// `Doc {rank} (Title: {title}) {text}`, or `No results found.` when empty.
std::string format_information(std::span<const RetrievalHit> hits);

/// The search tool agents call.
class Retriever {
public:
    virtual ~Retriever() = default;
    /// Throws RetrievalUnavailable on backend failure.
    virtual std::vector<RetrievalHit> retrieve(std::string_view query) const = 0;
};

class LocalRetriever final : public Retriever {
public:
    LocalRetriever(std::shared_ptr<const Index> index, RetrievalConfig config,
                   Execution exec = Execution::Parallel);

    /// Queries that tokenize to nothing return no hits rather than throwing.
    std::vector<RetrievalHit> retrieve(std::string_view query) const override;

    const Index& index() const noexcept { return *index_; }
    const RetrievalConfig& config() const noexcept { return config_; }

private:
    std::shared_ptr<const Index> index_;
    RetrievalConfig config_;
    Execution exec_;
};

/// Client for a retrieval service: POST {base_url}/retrieve with
/// `{"query", "k"}`, expecting `{"hits": [{"id","title","text","score"}]}`.
class RemoteRetriever final : public Retriever {
public:
    RemoteRetriever(std::string base_url, std::size_t top_k, int timeout_seconds = 30);

    std::vector<RetrievalHit> retrieve(std::string_view query) const override;

private:
    std::string base_url_;
    std::size_t top_k_;
    int timeout_seconds_;
};

}  // namespace sage
