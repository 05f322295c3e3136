#include "sage/bm25_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>

namespace sage::kernels {

namespace {

DocumentTerms count_one(const Document& doc) {
    std::map<std::string, std::uint32_t> counts;
    std::uint32_t length = 0;
    for (auto& token : tokenize(doc.text)) {
        ++counts[std::move(token)];
        ++length;
    }
    DocumentTerms out;
    out.length = length;
    out.counts.assign(std::make_move_iterator(counts.begin()),
                      std::make_move_iterator(counts.end()));
    return out;
}

// Below this many postings the fork/join costs more than the loop.
constexpr std::size_t kParallelPostingThreshold = 4096;

inline double term_weight(double idf, std::uint32_t tf, std::uint32_t doc_length,
                          const Bm25Weights& w) {
    const double f = static_cast<double>(tf);
    const double norm = 1.0 - w.b + w.b * static_cast<double>(doc_length) / w.average_length;
    return idf * f * (w.k1 + 1.0) / (f + w.k1 * norm);
}

}  // namespace

std::vector<DocumentTerms> count_terms_serial(std::span<const Document> docs) {
    std::vector<DocumentTerms> out(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) out[i] = count_one(docs[i]);
    return out;
}

std::vector<DocumentTerms> count_terms_parallel(std::span<const Document> docs) {
    std::vector<DocumentTerms> out(docs.size());
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = count_one(docs[i]);
    return out;
}

double bm25_idf(std::size_t df, std::size_t document_count) {
    const double n = static_cast<double>(document_count);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

void accumulate_scores_serial(const Index& index, std::span<const Index::TermId> terms,
                              const Bm25Weights& weights, std::span<double> scores,
                              std::span<std::uint8_t> matched) {
    const auto lengths = index.document_lengths();
    for (auto term : terms) {
        const auto postings = index.postings(term);
        const double idf = bm25_idf(postings.size(), weights.document_count);
        for (const auto& p : postings) {
            scores[p.doc] += term_weight(idf, p.tf, lengths[p.doc], weights);
            matched[p.doc] = 1;
        }
    }
}

void accumulate_scores_parallel(const Index& index, std::span<const Index::TermId> terms,
                                const Bm25Weights& weights, std::span<double> scores,
                                std::span<std::uint8_t> matched) {
    const auto lengths = index.document_lengths();
    for (auto term : terms) {
        const auto postings = index.postings(term);
        const double idf = bm25_idf(postings.size(), weights.document_count);
        const auto n = static_cast<std::ptrdiff_t>(postings.size());
        // A document appears at most once per posting list, so writes within
        // one term never collide.
#pragma omp parallel for schedule(static) if (postings.size() >= kParallelPostingThreshold)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto& p = postings[i];
            scores[p.doc] += term_weight(idf, p.tf, lengths[p.doc], weights);
            matched[p.doc] = 1;
        }
    }
}

}  // namespace sage::kernels
