#include "sage/agents.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "sage/random.hpp"

namespace sage {

namespace {

constexpr std::string_view kSearchOpen = "<search>";
constexpr std::string_view kSearchClose = "</search>";
constexpr std::size_t kMaxReasks = 2;

std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from = 0) {
    auto it = std::search(hay.begin() + static_cast<std::ptrdiff_t>(std::min(from, hay.size())),
                          hay.end(), needle.begin(), needle.end(), [](char a, char b) {
                              return (a >= 'A' && a <= 'Z' ? a - 'A' + 'a' : a) == b;
                          });
    return it == hay.end() ? std::string_view::npos
                           : static_cast<std::size_t>(it - hay.begin());
}

// Keeps the continuation up to and including its first complete search
// call. A stop sequence strips the closing tag, so a dangling open search at
// the end gets closed here.
std::string cut_after_first_search(std::string_view chunk) {
    const auto close = ifind(chunk, kSearchClose);
    if (close != std::string_view::npos) {
        return std::string(chunk.substr(0, close + kSearchClose.size()));
    }
    const auto open = ifind(chunk, kSearchOpen);
    if (open != std::string_view::npos) return std::string(chunk) + std::string(kSearchClose);
    return std::string(chunk);
}

// Final calls may not search, so anything from the first search on is dropped.
std::string cut_before_first_search(std::string_view chunk) {
    const auto open = ifind(chunk, kSearchOpen);
    return std::string(open == std::string_view::npos ? chunk : chunk.substr(0, open));
}

std::string trim_copy(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::size_t count_kind(const Trace& t, StepKind kind) {
    return static_cast<std::size_t>(std::count_if(
        t.steps.begin(), t.steps.end(), [kind](const TraceStep& s) { return s.kind == kind; }));
}

struct LoopSpec {
    TraceRole role;
    std::string prompt;
    std::size_t max_searches;
    std::string_view forced_text;
};

struct LoopResult {
    Trace trace;
    bool forced = false;
    bool terminal = false;
    std::size_t malformed = 0;
};

bool is_terminal(TraceRole role, const Trace& before, const Trace& after) {
    if (count_kind(after, StepKind::Answer) > count_kind(before, StepKind::Answer)) return true;
    return role == TraceRole::Generator &&
           count_kind(after, StepKind::Question) > count_kind(before, StepKind::Question);
}

// Shared ReACT driver for both agents. `response` is everything appended
// after the prompt: model continuations, information blocks and the forced
// finalization text; the trace is always parse_trace(response).
LoopResult run_react_loop(const LoopSpec& spec, const AgentEnv& env, std::string_view role_tag) {
    LoopResult result;
    std::string response;
    Trace current{spec.role, {}};
    std::size_t turn = 0;
    std::size_t searches = 0;

    auto fail = [&](const Error& e, const Trace& partial) -> AgentFailure {
        return AgentFailure(e, partial);
    };

    while (true) {
        const bool final_call = result.forced;
        ChatRequest request;
        request.prompt = spec.prompt + response;
        request.temperature = env.sampling.temperature;
        request.max_output_tokens = env.sampling.max_output_tokens;
        if (!final_call) request.stop_sequences = {std::string(kSearchClose)};
        request.key = {std::string(role_tag), turn};
        if (env.sampling.seed) request.seed = derive_seed(*env.sampling.seed, turn);
        ++turn;

        ChatResponse reply;
        try {
            reply = env.backend.complete(request);
        } catch (const Error& e) {
            throw fail(e, current);
        }

        const auto chunk = final_call ? cut_before_first_search(reply.text)
                                      : cut_after_first_search(reply.text);
        std::string candidate = response + chunk;
        Trace parsed;
        bool well_formed = true;
        try {
            parsed = parse_trace(candidate, spec.role);
            well_formed = information_follows_search(parsed);
        } catch (const Error&) {
            well_formed = false;
        }

        if (!well_formed) {
            if (++result.malformed > kMaxReasks) break;
            continue;  // re-ask from the same transcript
        }

        if (is_terminal(spec.role, current, parsed)) {
            response = std::move(candidate);
            current = std::move(parsed);
            result.terminal = true;
            break;
        }

        const bool new_search = count_search_steps(parsed) > searches;
        if (!new_search) {
            // Valid text that neither searches nor answers: keep it, but it
            // counts against the re-ask allowance.
            response = std::move(candidate);
            current = std::move(parsed);
            if (final_call) break;
            if (++result.malformed > kMaxReasks) break;
            continue;
        }

        if (parsed.steps.back().kind != StepKind::Search) {
            if (++result.malformed > kMaxReasks) break;
            continue;
        }
        const auto query = trim_copy(parsed.steps.back().body);
        std::vector<RetrievalHit> hits;
        try {
            if (!env.retriever) {
                throw Error(ErrorCode::RetrievalUnavailable, "no retriever configured");
            }
            hits = env.retriever->retrieve(query);
        } catch (const Error& e) {
            throw fail(e, parsed);
        }
        ++searches;
        response = std::move(candidate);
        response += "<information>";
        response += format_information(hits);
        response += "</information>\n\n";
        // Parsed before the forced text, whose think tag may be left open.
        current = parse_trace(response, spec.role);

        if (searches >= spec.max_searches) {
            response += spec.forced_text;
            result.forced = true;
        }
    }

    result.trace = std::move(current);
    return result;
}

}  // namespace

void AgentLimits::validate() const {
    if (max_search_steps < 1) {
        throw Error(ErrorCode::InvalidConfig, "max_search_steps must be >= 1", "max_search_steps");
    }
}

std::string_view to_string(FeedbackMode mode) {
    return mode == FeedbackMode::Incorrect ? "incorrect" : "easy";
}

FeedbackMode feedback_mode_from_string(std::string_view name) {
    if (name == "incorrect") return FeedbackMode::Incorrect;
    if (name == "easy") return FeedbackMode::Easy;
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown feedback mode '{}'", name),
                std::string(name));
}

std::string render_search_prompt(const PromptLibrary& prompts, std::string_view question) {
    return render_template(prompts.search_agent, {{"question", question}});
}

std::string render_generator_prompt(const PromptLibrary& prompts, const Document& doc,
                                    std::size_t target_steps, const AgentLimits& limits) {
    const auto steps = std::to_string(target_steps);
    return render_template(prompts.initial_generator, {{"context", doc.text},
                                                       {"target_search_step", steps},
                                                       {"n_search_step", steps},
                                                       {"answer_type", limits.answer_type_hint}});
}

SearchResult run_search_agent(std::string_view question, const AgentLimits& limits,
                              const AgentEnv& env, std::string_view role_tag) {
    if (question.empty()) throw Error(ErrorCode::InvalidArgument, "question must be non-empty");
    limits.validate();

    LoopSpec spec{TraceRole::Searcher, render_search_prompt(env.prompts, question),
                  limits.max_search_steps, kSearcherForcedFinalization};
    auto loop = run_react_loop(spec, env, role_tag);

    SearchResult result;
    result.answer = last_answer(loop.trace);
    result.steps = count_search_steps(loop.trace);
    result.trace = std::move(loop.trace);
    result.forced_finalization = loop.forced;
    result.malformed_turns = loop.malformed;
    return result;
}

GeneratorOutput generate_initial(const Document& doc, std::size_t target_steps,
                                 const AgentLimits& limits, const AgentEnv& env,
                                 std::string_view role_tag) {
    if (target_steps < 1) {
        throw Error(ErrorCode::InvalidArgument, "target_steps must be >= 1", "target_steps");
    }
    limits.validate();

    LoopSpec spec{TraceRole::Generator, render_generator_prompt(env.prompts, doc, target_steps, limits),
                  limits.max_search_steps, kGeneratorForcedFinalization};
    auto loop = run_react_loop(spec, env, role_tag);

    auto qa = extract_qa(loop.trace);
    if (!qa) {
        throw Error(ErrorCode::GenerationIncomplete,
                    fmt::format("generator for '{}' produced no question/answer pair", doc.id),
                    doc.id);
    }
    GeneratorOutput out;
    out.question = std::move(qa->question);
    out.answer = std::move(qa->answer);
    out.answering_steps = std::move(qa->answering_steps);
    out.trace = std::move(loop.trace);
    out.forced_finalization = loop.forced;
    out.prompt = spec.prompt;
    out.source_prompt = std::move(spec.prompt);
    return out;
}

GeneratorOutput regenerate_with_feedback(const GeneratorOutput& previous, std::size_t target_steps,
                                         const VerificationOutcome& outcome, FeedbackMode mode,
                                         const AgentEnv& env, std::string_view role_tag) {
    if (mode == FeedbackMode::Incorrect && outcome.is_correct) {
        throw Error(ErrorCode::ModePreconditionViolated,
                    "Incorrect feedback requires an incorrect verification outcome");
    }
    if (mode == FeedbackMode::Easy && (!outcome.is_correct || outcome.is_difficult)) {
        throw Error(ErrorCode::ModePreconditionViolated,
                    "Easy feedback requires a correct but not difficult verification outcome");
    }

    const auto& tmpl =
        mode == FeedbackMode::Incorrect ? env.prompts.feedback_incorrect : env.prompts.feedback_easy;
    const auto steps = std::to_string(target_steps);
    const auto gen_response = serialize_trace(previous.trace);
    const auto search_prompt = render_search_prompt(env.prompts, previous.question);
    const auto search_response = serialize_trace(outcome.selected_trace);
    const auto& gen_prompt = previous.source_prompt.empty() ? previous.prompt : previous.source_prompt;

    ChatRequest request;
    request.prompt = render_template(tmpl, {{"target_step", steps},
                                            {"data_generator_agent_prompt", gen_prompt},
                                            {"data_generator_agent_response", gen_response},
                                            {"search_agent_prompt", search_prompt},
                                            {"search_agent_response", search_response}});
    request.temperature = env.sampling.temperature;
    request.max_output_tokens = env.sampling.max_output_tokens;
    request.key = {std::string(role_tag), 0};
    if (env.sampling.seed) request.seed = derive_seed(*env.sampling.seed, 0);

    ChatResponse reply;
    try {
        reply = env.backend.complete(request);
    } catch (const Error& e) {
        throw AgentFailure(e, Trace{TraceRole::Generator, {}});
    }

    Trace trace;
    try {
        trace = parse_trace(reply.text, TraceRole::Generator);
    } catch (const Error& e) {
        throw Error(ErrorCode::GenerationIncomplete,
                    fmt::format("regeneration reply is malformed: {}", e.what()));
    }
    auto qa = extract_qa(trace);
    if (!qa) {
        throw Error(ErrorCode::GenerationIncomplete,
                    "regeneration reply has no question/answer pair");
    }

    GeneratorOutput out;
    out.question = std::move(qa->question);
    out.answer = std::move(qa->answer);
    out.answering_steps = std::move(qa->answering_steps);
    out.trace = std::move(trace);
    out.prompt = std::move(request.prompt);
    out.source_prompt = gen_prompt;
    out.mode = mode;
    return out;
}

}  // namespace sage
