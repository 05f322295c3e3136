#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sage {

enum class StepKind {
    Think,
    Search,
    Information,
    Answer,
    Question,
    AnsweringSteps,
    Reason,
    SearchSteps,
    Raw,
};

/// Canonical tag name ("think", "answering steps", ...); empty for Raw.
std::string_view tag_name(StepKind kind);

enum class TraceRole { Generator, Searcher };

std::string_view to_string(TraceRole role);
/// Throws InvalidArgument.
TraceRole trace_role_from_string(std::string_view name);

struct TraceStep {
    StepKind kind = StepKind::Raw;
    /// Text between the tags, verbatim. For Raw, the untagged text itself.
    std::string body;
    /// Original tag spellings when the input used non-canonical case; empty
    /// means canonical lowercase.
    std::string open_tag;
    std::string close_tag;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct Trace {
    TraceRole role = TraceRole::Searcher;
    std::vector<TraceStep> steps;

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// Splits a tagged transcript into steps in order of appearance. Tag names
/// match case-insensitively; text outside tags becomes Raw steps and closing
/// tags with no open counterpart are kept as text. Throws UnclosedTag or
/// NestedTag (Error::detail() is the tag, Error::position() the byte offset).
Trace parse_trace(std::string_view raw, TraceRole role);

/// Inverse of parse_trace: serialize_trace(parse_trace(x)) == x.
std::string serialize_trace(const Trace& trace);

std::size_t count_search_steps(const Trace& trace);

/// True when every Information step directly follows a Search step.
bool information_follows_search(const Trace& trace);

struct ExtractedQa {
    std::string question;
    std::string answer;
    std::optional<std::string> answering_steps;
};

/// Last Question, last Answer and last AnsweringSteps (falling back to the
/// last SearchSteps), trimmed. Absent when the answer is missing, or, for a
/// Generator trace, when the question is.
std::optional<ExtractedQa> extract_qa(const Trace& trace);

/// Last Answer body, trimmed, if any.
std::optional<std::string> last_answer(const Trace& trace);

}  // namespace sage
