#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sage/orchestrator.hpp"

namespace sage {

enum class BackendKind { Script, Live };
enum class JudgeKind { ExactMatch, Llm };
enum class RetrieverKind { Local, Remote };

/// Everything the CLI needs for a run. Relative paths are resolved against
/// the config file's directory.
///
///     corpus = "corpus.jsonl"
///     target_steps = [3, 4, 5, 6, 7]      # or a single integer
///     samples_per_verification = 4
///     max_feedback_rounds = 3
///     mode = "feedback"                   # or "resample"
///     seed = 0
///     num_data = 0                        # 0 = whole corpus
///     parallelism = 1
///
///     [agent]     max_search_steps, answer_type, temperature, max_output_tokens,
///                 max_calls_per_datum
///     [retrieval] backend = "local"|"remote", url, top_k, bm25_k1, bm25_b
///     [backend]   kind = "script"|"live", script
///     [judge]     kind = "exact"|"llm"
///     prompts_dir = "prompts"             # optional overrides
struct RunConfig {
    std::filesystem::path corpus_path;
    std::optional<std::filesystem::path> prompts_dir;
    BatchOptions batch;
    BackendKind backend = BackendKind::Live;
    std::optional<std::filesystem::path> script_path;
    JudgeKind judge = JudgeKind::Llm;
    RetrieverKind retriever = RetrieverKind::Local;
    std::string retrieval_url;

    /// Single-config view used by commands that do not sweep target steps.
    const GenerationConfig& base() const { return batch.configs.front(); }
};

/// Throws InvalidConfig (bad value or TOML syntax) or MissingFile.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir = ".");

}  // namespace sage
