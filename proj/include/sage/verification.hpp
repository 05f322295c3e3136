#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sage/agents.hpp"
#include "sage/llm_gateway.hpp"
#include "sage/outcome.hpp"
#include "sage/prompts.hpp"

namespace sage {

/// Standard QA normalization: lowercase, strip ASCII punctuation, collapse
/// whitespace, drop one leading article (a/an/the).
std::string normalize_answer(std::string_view text);

bool judge_exact_match(std::string_view candidate, std::string_view reference);

struct Judgment {
    std::string extracted_final_answer;
    std::string reasoning;
    bool correct = false;
    int confidence = 100;
    bool parse_failure = false;
};

/// Parses the labelled fields of a judge reply. Absent when no
/// `correct: yes|no` field can be found.
std::optional<Judgment> parse_judgment(std::string_view reply);

/// Renders the judge template with the references comma-joined and parses
/// the reply, re-asking once (turn 1) if it is unparseable. A second failure
/// yields correct=false with parse_failure set. Throws InvalidArgument when
/// `references` is empty; transport errors propagate.
Judgment judge_with_llm(std::string_view question, std::string_view candidate,
                        std::span<const std::string> references, Backend& backend,
                        const PromptLibrary& prompts, std::string_view role_tag);

struct JudgeQuery {
    std::string_view question;
    std::string_view candidate;
    std::string_view reference;
    std::string_view role_tag;
};

class Judge {
public:
    virtual ~Judge() = default;
    virtual bool is_correct(const JudgeQuery& query) const = 0;
};

class ExactMatchJudge final : public Judge {
public:
    bool is_correct(const JudgeQuery& query) const override;
};

class LlmJudge final : public Judge {
public:
    LlmJudge(Backend& backend, const PromptLibrary& prompts) : backend_(backend), prompts_(prompts) {}
    bool is_correct(const JudgeQuery& query) const override;

private:
    Backend& backend_;
    const PromptLibrary& prompts_;
};

/// Runs one independent search-agent sample; may throw.
using AgentRunner = std::function<SearchResult(std::size_t sample_index)>;

struct VerifyRequest {
    std::string question;
    std::string reference_answer;
    std::size_t target_steps = 1;
    std::size_t samples = 4;
    std::uint64_t rng_seed = 0;
    /// Judge calls use role tag "{scope}/judge{k}".
    std::string scope = "verify";
    bool parallel = true;
};

/// Samples the search agent K times and selects a trace: the correct sample
/// with the fewest search steps (lowest index on ties), or, if none is
/// correct, a sample chosen uniformly by rng_seed. The pair is difficult when
/// the selected step count reaches target_steps. A sample whose run or
/// judgment throws is recorded as answer-absent and incorrect.
VerificationOutcome verify(const VerifyRequest& request, const Judge& judge,
                           const AgentRunner& runner);

/// The selection step alone, over already-judged samples.
VerificationOutcome select_outcome(std::vector<SampleOutcome> samples, std::size_t target_steps,
                                   std::uint64_t rng_seed);

}  // namespace sage
