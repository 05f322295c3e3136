#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sage/corpus.hpp"
#include "sage/error.hpp"
#include "sage/llm_gateway.hpp"
#include "sage/outcome.hpp"
#include "sage/prompts.hpp"
#include "sage/retrieval.hpp"
#include "sage/trace.hpp"

namespace sage {

struct AgentLimits {
    std::size_t max_search_steps = 20;
    std::string answer_type_hint = "an entity, a date or a number";

    void validate() const;
};

struct SamplingParams {
    double temperature = 1.0;
    int max_output_tokens = 2048;
    /// Forwarded per call (mixed with the turn index) when set.
    std::optional<std::uint64_t> seed;
};

/// Everything an agent run needs besides its inputs. The retriever may be
/// null for regeneration, which never searches.
struct AgentEnv {
    Backend& backend;
    const Retriever* retriever = nullptr;
    const PromptLibrary& prompts;
    SamplingParams sampling{};
};

/// Appended to the generator transcript when its search budget runs out.
/// The think tag is left open for the model to finish.
inline constexpr std::string_view kGeneratorForcedFinalization =
    "<think>I have used up all the search budget and I will use the existing information to "
    "formulate a new plan and generate the question, answer, and answering plans.";

/// Appended to a search-agent transcript when its search budget runs out.
inline constexpr std::string_view kSearcherForcedFinalization =
    "<think>I have used up all the search budget and I will now give the final answer based on "
    "the information gathered so far.</think>\n";

/// Agent run aborted by a transport or retrieval failure. Carries whatever
/// trace was produced before the failure.
class AgentFailure : public Error {
public:
    AgentFailure(const Error& cause, Trace partial)
        : Error(cause.code(), cause.what(), cause.detail(), cause.position()),
          partial_(std::move(partial)) {}

    const Trace& partial_trace() const noexcept { return partial_; }

private:
    Trace partial_;
};

struct SearchResult {
    std::optional<std::string> answer;
    std::size_t steps = 0;
    Trace trace;
    bool forced_finalization = false;
    std::size_t malformed_turns = 0;
};

enum class FeedbackMode { Incorrect, Easy };

std::string_view to_string(FeedbackMode mode);
FeedbackMode feedback_mode_from_string(std::string_view name);

struct GeneratorOutput {
    std::string question;
    std::string answer;
    std::optional<std::string> answering_steps;
    Trace trace;
    bool forced_finalization = false;
    /// Prompt that produced `trace`.
    std::string prompt;
    /// The initial-generation prompt, carried through regenerations.
    std::string source_prompt;
    std::optional<FeedbackMode> mode;
};

std::string render_search_prompt(const PromptLibrary& prompts, std::string_view question);
std::string render_generator_prompt(const PromptLibrary& prompts, const Document& doc,
                                    std::size_t target_steps, const AgentLimits& limits);

/// ReACT search loop: each `<search>` the model emits is executed and its
/// hits spliced back as an `<information>` block. Stops at the first answer,
/// or after max_search_steps searches plus one forced final call. Malformed
/// continuations are re-asked twice, then the run ends without an answer.
/// Backend calls use RoutingKey{role_tag, 0, 1, ...}. Throws AgentFailure.
SearchResult run_search_agent(std::string_view question, const AgentLimits& limits,
                              const AgentEnv& env, std::string_view role_tag);

/// Initial QA generation from a seed document targeting `target_steps`
/// searches. Throws GenerationIncomplete when no question/answer pair
/// emerges, AgentFailure on transport errors.
GeneratorOutput generate_initial(const Document& doc, std::size_t target_steps,
                                 const AgentLimits& limits, const AgentEnv& env,
                                 std::string_view role_tag);

/// One-shot revision of `previous` from the verifier's execution traces.
/// Exactly one backend call, no retrieval. Throws ModePreconditionViolated,
/// GenerationIncomplete, AgentFailure.
GeneratorOutput regenerate_with_feedback(const GeneratorOutput& previous, std::size_t target_steps,
                                         const VerificationOutcome& outcome, FeedbackMode mode,
                                         const AgentEnv& env, std::string_view role_tag);

}  // namespace sage
