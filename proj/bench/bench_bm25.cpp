// Serial reference vs OpenMP kernels on a synthetic Zipf-ish corpus.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>
#include <fmt/format.h>

#include "sage/corpus.hpp"
#include "sage/retrieval.hpp"

namespace {

std::shared_ptr<const sage::Corpus> synthetic_corpus(std::size_t docs) {
    std::mt19937_64 rng(42);
    std::vector<std::string> vocab;
    for (int i = 0; i < 5000; ++i) vocab.push_back(fmt::format("w{}", i));
    // Rank-frequency roughly 1/r.
    std::vector<double> weights;
    for (std::size_t r = 1; r <= vocab.size(); ++r) weights.push_back(1.0 / static_cast<double>(r));
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::uniform_int_distribution<int> len(40, 200);

    std::vector<sage::Document> out;
    out.reserve(docs);
    for (std::size_t d = 0; d < docs; ++d) {
        std::string text;
        for (int n = len(rng); n > 0; --n) {
            text += vocab[pick(rng)];
            text += ' ';
        }
        out.push_back({fmt::format("d{}", d), fmt::format("Doc {}", d), std::move(text)});
    }
    return std::make_shared<const sage::Corpus>(sage::Corpus::from_documents(std::move(out)));
}

const std::shared_ptr<const sage::Corpus>& corpus() {
    static const auto c = synthetic_corpus(20000);
    return c;
}

const sage::Index& index() {
    static const auto idx = sage::Index::build(corpus(), sage::Execution::Parallel);
    return idx;
}

void BM_IndexBuild(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? sage::Execution::Serial : sage::Execution::Parallel;
    corpus();  // built once, outside the timed loop
    for (auto _ : state) benchmark::DoNotOptimize(sage::Index::build(corpus(), exec));
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_Search(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? sage::Execution::Serial : sage::Execution::Parallel;
    const sage::RetrievalConfig config{10, 1.2, 0.75};
    index();
    for (auto _ : state) benchmark::DoNotOptimize(sage::search(index(), "w0 w3 w17 w250 w999", config, exec));
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_IndexBuild)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Search)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
