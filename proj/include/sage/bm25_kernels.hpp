#pragma once

// Data-parallel inner loops behind Index::build and search(). Each kernel has
// a serial reference and an OpenMP variant; tests hold them bit-identical and
// bench/bench_bm25.cpp compares their throughput.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sage/corpus.hpp"
#include "sage/retrieval.hpp"

namespace sage::kernels {

/// Per-document term counts, sorted by term.
struct DocumentTerms {
    std::vector<std::pair<std::string, std::uint32_t>> counts;
    std::uint32_t length = 0;
};

std::vector<DocumentTerms> count_terms_serial(std::span<const Document> docs);
std::vector<DocumentTerms> count_terms_parallel(std::span<const Document> docs);

struct Bm25Weights {
    double k1 = 1.2;
    double b = 0.75;
    double average_length = 1.0;
    std::size_t document_count = 0;
};

double bm25_idf(std::size_t df, std::size_t document_count);

/// Adds each term's BM25 contribution into `scores` (one slot per document)
/// and sets `matched` for every document that contains a term. Terms are
/// applied in the given order, so per-document summation order is fixed.
void accumulate_scores_serial(const Index& index, std::span<const Index::TermId> terms,
                              const Bm25Weights& weights, std::span<double> scores,
                              std::span<std::uint8_t> matched);
void accumulate_scores_parallel(const Index& index, std::span<const Index::TermId> terms,
                                const Bm25Weights& weights, std::span<double> scores,
                                std::span<std::uint8_t> matched);

}  // namespace sage::kernels
