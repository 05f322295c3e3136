#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/agents.hpp"
#include "sage/corpus.hpp"
#include "sage/outcome.hpp"
#include "sage/verification.hpp"

namespace sage {

enum class GenerationMode { Feedback, Resample };
enum class FinalStatus { Success, CorrectOnly, Rejected };

std::string_view to_string(GenerationMode mode);
GenerationMode generation_mode_from_string(std::string_view name);
std::string_view to_string(FinalStatus status);
FinalStatus final_status_from_string(std::string_view name);

struct GenerationConfig {
    std::size_t target_steps = 3;
    std::size_t samples_per_verification = 4;
    std::size_t max_feedback_rounds = 3;
    AgentLimits limits;
    RetrievalConfig retrieval;
    double temperature = 1.0;
    int max_output_tokens = 2048;
    GenerationMode mode = GenerationMode::Feedback;
    std::uint64_t rng_seed = 0;
    /// Backend calls allowed per datum across all agents.
    std::size_t max_calls_per_datum = 500;
    bool parallel_samples = true;

    /// Throws InvalidConfig.
    void validate() const;
};

struct RoundRecord {
    std::size_t round_index = 0;
    /// How this round's pair was produced; absent for fresh generation.
    std::optional<FeedbackMode> feedback_mode;
    std::optional<GeneratorOutput> generator_output;
    std::optional<VerificationOutcome> verification;
    std::optional<std::string> error;
};

struct QaPair {
    std::string question;
    std::string answer;

    friend bool operator==(const QaPair&, const QaPair&) = default;
};

struct GenerationRecord {
    std::string seed_doc_id;
    std::size_t target_steps = 0;
    GenerationMode mode = GenerationMode::Feedback;
    std::vector<RoundRecord> rounds;
    FinalStatus final_status = FinalStatus::Rejected;
    std::optional<QaPair> final_qa;
    std::vector<Trace> accumulated_gen_traces;
    std::vector<Trace> accumulated_search_traces;
    std::optional<std::string> error;
    std::size_t backend_calls = 0;

    /// Verification of the pair the record ships (or would have shipped):
    /// the last round that reached verification. Null if none did.
    const VerificationOutcome* final_outcome() const;
    /// Generator output matching final_outcome().
    const GeneratorOutput* final_generator_output() const;
};

/// Shared collaborators for a run. All must tolerate concurrent use.
struct PipelineServices {
    Backend& backend;
    const Retriever& retriever;
    const Judge& judge;
    const PromptLibrary& prompts;
};

/// Generate, verify and revise one QA pair from `doc`.
///
/// Round 0 generates from the document. Each later round runs only while the
/// current pair is not both correct and difficult: Feedback mode revises the
/// last verified pair (Incorrect feedback takes precedence over Easy),
/// Resample mode generates a fresh pair. Round errors are recorded in the
/// round and never thrown. Role tags are "{doc_id}/r{round}/generator",
/// "{doc_id}/r{round}/searcher{k}" and "{doc_id}/r{round}/judge{k}".
GenerationRecord generate_datum(const Document& doc, const GenerationConfig& config,
                                const PipelineServices& services);

struct BatchOptions {
    /// Datum i uses configs[i % configs.size()].
    std::vector<GenerationConfig> configs;
    /// 0 means every document in the corpus.
    std::size_t num_data = 0;
    std::size_t parallelism = 1;
    std::uint64_t seed = 0;
};

struct BatchSummary {
    std::size_t total = 0;
    std::map<FinalStatus, std::size_t> by_status;
    std::map<std::size_t, std::map<FinalStatus, std::size_t>> by_target;
    std::size_t errored = 0;
};

using RecordSink = std::function<void(const GenerationRecord&)>;

/// Samples seed documents without replacement and runs generate_datum on a
/// bounded worker pool. `sink` is called once per record, never
/// concurrently; an exception from it aborts the batch and is rethrown.
/// Each datum's rng_seed is replaced by `options.seed`, from which the datum
/// derives its own streams by document id. Throws EmptyCorpus.
BatchSummary run_batch(const Corpus& corpus, const BatchOptions& options,
                       const PipelineServices& services, const RecordSink& sink);

struct DatasetRow {
    std::string question;
    std::string answer;
    std::size_t target_steps = 0;
    std::size_t measured_steps = 0;
    std::size_t rounds_used = 0;
    FinalStatus final_status = FinalStatus::Rejected;
    std::string seed_doc_id;
    GenerationMode mode = GenerationMode::Feedback;

    friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

/// Keeps records that ship a pair (pass@K > 0) whose measured step count is
/// at least `min_steps`.
std::vector<DatasetRow> filter_dataset(std::span<const GenerationRecord> records,
                                       std::size_t min_steps = 2);

/// Writes JSONL, one row per line. Throws IoError.
std::size_t export_dataset(std::span<const DatasetRow> rows, const std::filesystem::path& path);

/// Throws MissingFile or MalformedRecord.
std::vector<DatasetRow> read_dataset(const std::filesystem::path& path);

}  // namespace sage
