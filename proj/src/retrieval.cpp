#include "sage/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "sage/bm25_kernels.hpp"
#include "sage/error.hpp"

namespace sage {

void RetrievalConfig::validate() const {
    if (top_k < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be >= 1", "top_k");
    if (!(bm25_b >= 0.0 && bm25_b <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "bm25_b must lie in [0, 1]", "bm25_b");
    if (!(bm25_k1 >= 0.0)) throw Error(ErrorCode::InvalidConfig, "bm25_k1 must be >= 0", "bm25_k1");
}

Index Index::build(std::shared_ptr<const Corpus> corpus, Execution exec) {
    if (!corpus || corpus->document_count() == 0) {
        throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
    }
    const auto docs = corpus->documents();
    auto per_doc = exec == Execution::Parallel ? kernels::count_terms_parallel(docs)
                                               : kernels::count_terms_serial(docs);

    Index index;
    index.corpus_ = std::move(corpus);
    index.doc_lengths_.reserve(per_doc.size());
    std::uint64_t total_length = 0;
    for (std::size_t d = 0; d < per_doc.size(); ++d) {
        auto& terms = per_doc[d];
        index.doc_lengths_.push_back(terms.length);
        total_length += terms.length;
        for (auto& [term, tf] : terms.counts) {
            auto [it, inserted] =
                index.terms_.try_emplace(std::move(term), static_cast<TermId>(index.postings_.size()));
            if (inserted) index.postings_.emplace_back();
            index.postings_[it->second].push_back({static_cast<std::uint32_t>(d), tf});
        }
    }
    const double avg = static_cast<double>(total_length) / static_cast<double>(per_doc.size());
    // All-empty documents would otherwise divide by zero during scoring.
    index.avg_length_ = avg > 0.0 ? avg : 1.0;
    return index;
}

std::optional<Index::TermId> Index::term_id(std::string_view term) const {
    auto it = terms_.find(std::string(term));
    if (it == terms_.end()) return std::nullopt;
    return it->second;
}

std::size_t Index::document_frequency(std::string_view term) const {
    auto id = term_id(term);
    return id ? postings_[*id].size() : 0;
}

std::vector<RetrievalHit> search(const Index& index, std::string_view query,
                                 const RetrievalConfig& config, Execution exec) {
    config.validate();
    const auto tokens = tokenize(query);
    if (tokens.empty()) throw Error(ErrorCode::EmptyQuery, "query has no searchable terms");

    std::vector<Index::TermId> terms;
    for (const auto& token : tokens) {
        auto id = index.term_id(token);
        if (id && std::find(terms.begin(), terms.end(), *id) == terms.end()) terms.push_back(*id);
    }
    if (terms.empty()) return {};

    const kernels::Bm25Weights weights{config.bm25_k1, config.bm25_b, index.average_length(),
                                       index.document_count()};
    std::vector<double> scores(index.document_count(), 0.0);
    std::vector<std::uint8_t> matched(index.document_count(), 0);
    if (exec == Execution::Parallel) {
        kernels::accumulate_scores_parallel(index, terms, weights, scores, matched);
    } else {
        kernels::accumulate_scores_serial(index, terms, weights, scores, matched);
    }

    std::vector<std::uint32_t> candidates;
    for (std::uint32_t d = 0; d < matched.size(); ++d) {
        if (matched[d]) candidates.push_back(d);
    }

    const auto docs = index.corpus().documents();
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return docs[a].id < docs[b].id;
    };
    const auto keep = std::min(config.top_k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);

    std::vector<RetrievalHit> hits;
    hits.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto& doc = docs[candidates[i]];
        hits.push_back({doc.id, doc.title, doc.text, scores[candidates[i]]});
    }
    return hits;
}

std::string format_information(std::span<const RetrievalHit> hits) {
    if (hits.empty()) return "No results found.";
    std::string out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += fmt::format("Doc {} (Title: {}) {}", i + 1, hits[i].title, hits[i].text);
    }
    return out;
}

LocalRetriever::LocalRetriever(std::shared_ptr<const Index> index, RetrievalConfig config,
                               Execution exec)
    : index_(std::move(index)), config_(config), exec_(exec) {
    config_.validate();
}

std::vector<RetrievalHit> LocalRetriever::retrieve(std::string_view query) const {
    if (tokenize(query).empty()) return {};
    return search(*index_, query, config_, exec_);
}

}  // namespace sage
