#include "sage/verification.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "sage/error.hpp"
#include "sage/random.hpp"

namespace sage {

std::size_t VerificationOutcome::correct_count() const {
    return static_cast<std::size_t>(std::count_if(per_sample.begin(), per_sample.end(),
                                                  [](const SampleOutcome& s) { return s.correct; }));
}

std::string normalize_answer(std::string_view text) {
    std::vector<std::string> words;
    std::string word;
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        if (std::isspace(c)) {
            if (!word.empty()) words.push_back(std::move(word));
            word.clear();
            continue;
        }
        word.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!word.empty()) words.push_back(std::move(word));

    std::size_t first = 0;
    if (!words.empty() && (words[0] == "a" || words[0] == "an" || words[0] == "the")) first = 1;

    std::string out;
    for (std::size_t i = first; i < words.size(); ++i) {
        if (!out.empty()) out.push_back(' ');
        out += words[i];
    }
    return out;
}

bool judge_exact_match(std::string_view candidate, std::string_view reference) {
    return normalize_answer(candidate) == normalize_answer(reference);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n*_`");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n*_`");
    return s.substr(first, last - first + 1);
}

bool istarts_with(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    }
    return true;
}

enum class Field { None, Extracted, Reasoning, Correct, Confidence };

// Recognizes "label:" at the start of a line, tolerating markdown emphasis
// and list markers around the label.
std::pair<Field, std::string_view> split_label(std::string_view line) {
    auto s = line;
    while (!s.empty() && (s.front() == ' ' || s.front() == '-' || s.front() == '*' ||
                          s.front() == '#' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    static constexpr std::pair<std::string_view, Field> labels[] = {
        {"extracted_final_answer", Field::Extracted},
        {"reasoning", Field::Reasoning},
        {"correct", Field::Correct},
        {"confidence", Field::Confidence},
    };
    for (const auto& [label, field] : labels) {
        if (!istarts_with(s, label)) continue;
        auto rest = s.substr(label.size());
        while (!rest.empty() && (rest.front() == '*' || rest.front() == ' ')) rest.remove_prefix(1);
        if (rest.empty() || rest.front() != ':') continue;
        rest.remove_prefix(1);
        return {field, rest};
    }
    return {Field::None, line};
}

}  // namespace

std::optional<Judgment> parse_judgment(std::string_view reply) {
    Judgment j;
    std::optional<bool> correct;
    std::optional<int> confidence;
    Field current = Field::None;
    std::string reasoning;

    std::size_t pos = 0;
    while (pos <= reply.size()) {
        const auto nl = reply.find('\n', pos);
        const auto line = reply.substr(pos, nl == std::string_view::npos ? reply.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? reply.size() + 1 : nl + 1;

        auto [field, value] = split_label(line);
        if (field == Field::None) {
            if (current == Field::Reasoning) {
                reasoning += '\n';
                reasoning += line;
            }
            continue;
        }
        current = field;
        const auto v = trim(value);
        switch (field) {
            case Field::Extracted: j.extracted_final_answer = std::string(v); break;
            case Field::Reasoning: reasoning = std::string(v); break;
            case Field::Correct:
                if (istarts_with(v, "yes")) correct = true;
                else if (istarts_with(v, "no")) correct = false;
                break;
            case Field::Confidence: {
                auto digits = v.find_first_of("0123456789");
                if (digits != std::string_view::npos) {
                    int value_int = 0;
                    auto res = std::from_chars(v.data() + digits, v.data() + v.size(), value_int);
                    if (res.ec == std::errc()) confidence = std::clamp(value_int, 0, 100);
                }
                break;
            }
            case Field::None: break;
        }
    }
    if (!correct) return std::nullopt;
    j.correct = *correct;
    j.confidence = confidence.value_or(100);
    j.reasoning = std::string(trim(reasoning));
    return j;
}

Judgment judge_with_llm(std::string_view question, std::string_view candidate,
                        std::span<const std::string> references, Backend& backend,
                        const PromptLibrary& prompts, std::string_view role_tag) {
    if (references.empty()) {
        throw Error(ErrorCode::InvalidArgument, "judge needs at least one reference answer");
    }
    std::string gold;
    for (const auto& r : references) {
        if (!gold.empty()) gold += ", ";
        gold += r;
    }

    ChatRequest request;
    request.prompt = render_template(
        prompts.judge, {{"question", question}, {"model_answer", candidate}, {"gold_answer", gold}});
    request.temperature = 0.0;
    request.max_output_tokens = 1024;

    for (std::size_t turn = 0; turn < 2; ++turn) {
        request.key = {std::string(role_tag), turn};
        if (auto parsed = parse_judgment(backend.complete(request).text)) return *parsed;
    }
    Judgment failed;
    failed.correct = false;
    failed.parse_failure = true;
    return failed;
}

bool ExactMatchJudge::is_correct(const JudgeQuery& query) const {
    return judge_exact_match(query.candidate, query.reference);
}

bool LlmJudge::is_correct(const JudgeQuery& query) const {
    const std::string refs[] = {std::string(query.reference)};
    return judge_with_llm(query.question, query.candidate, refs, backend_, prompts_, query.role_tag)
        .correct;
}

VerificationOutcome select_outcome(std::vector<SampleOutcome> samples, std::size_t target_steps,
                                   std::uint64_t rng_seed) {
    if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "verification needs K >= 1 samples");

    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].correct && (!best || samples[k].steps < samples[*best].steps)) best = k;
    }

    VerificationOutcome out;
    out.is_correct = best.has_value();
    out.selected_index = best ? *best : seeded_index(rng_seed, samples.size());
    const auto& chosen = samples[out.selected_index];
    out.selected_answer = chosen.answer.value_or("");
    out.selected_steps = chosen.steps;
    out.selected_trace = chosen.trace;
    out.target_steps = target_steps;
    out.is_difficult = out.selected_steps >= target_steps;
    out.per_sample = std::move(samples);
    return out;
}

VerificationOutcome verify(const VerifyRequest& request, const Judge& judge,
                           const AgentRunner& runner) {
    if (request.samples < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1", "samples");

    std::vector<SampleOutcome> samples(request.samples);
    const auto k_count = static_cast<std::ptrdiff_t>(request.samples);

    // per_sample is indexed by k, so the outcome does not depend on the order
    // in which samples finish.
#pragma omp parallel for schedule(dynamic, 1) if (request.parallel && request.samples > 1)
    for (std::ptrdiff_t k = 0; k < k_count; ++k) {
        auto& sample = samples[static_cast<std::size_t>(k)];
        try {
            auto result = runner(static_cast<std::size_t>(k));
            sample.answer = std::move(result.answer);
            sample.steps = result.steps;
            sample.trace = std::move(result.trace);
        } catch (const AgentFailure& e) {
            sample.error = e.what();
            sample.trace = e.partial_trace();
            sample.steps = count_search_steps(sample.trace);
            continue;
        } catch (const std::exception& e) {
            sample.error = e.what();
            continue;
        }
        if (!sample.answer) continue;
        try {
            const auto tag = fmt::format("{}/judge{}", request.scope, k);
            sample.correct = judge.is_correct(
                {request.question, *sample.answer, request.reference_answer, tag});
        } catch (const std::exception& e) {
            sample.error = fmt::format("judge failed: {}", e.what());
            sample.correct = false;
        }
    }
    return select_outcome(std::move(samples), request.target_steps, request.rng_seed);
}

}  // namespace sage
