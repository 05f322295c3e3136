#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sage/llm_gateway.hpp"
#include "sage/orchestrator.hpp"
#include "sage/prompts.hpp"
#include "sage/trace.hpp"

namespace sage {

struct QualityMetrics {
    std::size_t n_total = 0;
    std::size_t n_correct = 0;
    std::size_t n_success = 0;
    /// Fractions in [0, 1].
    double percent_correct = 0.0;
    double percent_pass = 0.0;
    /// Mean over correct records of the final round's correct-sample share.
    /// 0 when no record is correct.
    double avg_at_k = 0.0;
    /// Mean selected step count over correct records.
    double mean_search_steps = 0.0;
};

struct QualityReport : QualityMetrics {
    /// Samples per verification; 0 if the records disagree.
    std::size_t k = 0;
    std::map<std::size_t, QualityMetrics> per_target_step;
};

/// Correctness is read from each record's final verification. Throws
/// EmptyInput.
QualityReport compute_quality_report(std::span<const GenerationRecord> records);

/// Success fraction per target step count. Throws EmptyInput.
std::map<std::size_t, double> per_step_breakdown(std::span<const GenerationRecord> records);

enum class ReportFormat { Text, Json };

/// Fractions are printed as percentages with one decimal.
std::string render_report(const QualityReport& report, ReportFormat format);

struct StrategyInput {
    std::string question;
    Trace trace;
};

struct StrategyAnalysis {
    /// Strategy (lowercased, trimmed) -> share of analyzed trajectories.
    std::map<std::string, double> fractions;
    std::map<std::string, std::size_t> counts;
    std::size_t analyzed = 0;
    std::size_t skipped = 0;
};

/// Per-step strategy lists from `- Step i: [a, b]` lines; absent if the reply
/// has no such line.
std::optional<std::vector<std::vector<std::string>>> parse_strategy_labels(std::string_view reply);

/// One labelling call per trace (role tag "analyze/{i}"). A trajectory
/// exhibits a strategy when any of its steps lists it. Unparseable replies
/// and failed calls are skipped and tallied.
StrategyAnalysis analyze_reasoning_strategies(std::span<const StrategyInput> inputs,
                                              Backend& backend, const PromptLibrary& prompts,
                                              bool parallel = true);

/// Final selected search traces of records that ship a correct pair.
std::vector<StrategyInput> correct_search_traces(std::span<const GenerationRecord> records);

std::string render_strategy_analysis(const StrategyAnalysis& analysis, ReportFormat format);

}  // namespace sage
