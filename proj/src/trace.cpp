#include "sage/trace.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "sage/error.hpp"

namespace sage {

namespace {

constexpr std::array kTagged = {
    StepKind::Think,  StepKind::Search,         StepKind::Information, StepKind::Answer,
    StepKind::Question, StepKind::AnsweringSteps, StepKind::Reason,    StepKind::SearchSteps,
};

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == y; });
}

struct TagMatch {
    StepKind kind;
    bool closing;
    std::size_t length;  // whole tag including brackets
};

// Recognizes `<name>` or `</name>` starting at raw[pos].
std::optional<TagMatch> match_tag(std::string_view raw, std::size_t pos) {
    if (raw[pos] != '<') return std::nullopt;
    std::size_t name_start = pos + 1;
    const bool closing = name_start < raw.size() && raw[name_start] == '/';
    if (closing) ++name_start;
    for (auto kind : kTagged) {
        const auto name = tag_name(kind);
        const auto end = name_start + name.size();
        if (end < raw.size() && raw[end] == '>' &&
            iequals(raw.substr(name_start, name.size()), name)) {
            return TagMatch{kind, closing, end + 1 - pos};
        }
    }
    return std::nullopt;
}

std::string canonical_open(StepKind kind) { return fmt::format("<{}>", tag_name(kind)); }
std::string canonical_close(StepKind kind) { return fmt::format("</{}>", tag_name(kind)); }

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

const TraceStep* last_of(const Trace& trace, StepKind kind) {
    auto it = std::find_if(trace.steps.rbegin(), trace.steps.rend(),
                           [kind](const TraceStep& s) { return s.kind == kind; });
    return it == trace.steps.rend() ? nullptr : &*it;
}

}  // namespace

std::string_view tag_name(StepKind kind) {
    switch (kind) {
        case StepKind::Think: return "think";
        case StepKind::Search: return "search";
        case StepKind::Information: return "information";
        case StepKind::Answer: return "answer";
        case StepKind::Question: return "question";
        case StepKind::AnsweringSteps: return "answering steps";
        case StepKind::Reason: return "reason";
        case StepKind::SearchSteps: return "search steps";
        case StepKind::Raw: return "";
    }
    return "";
}

std::string_view to_string(TraceRole role) {
    return role == TraceRole::Generator ? "generator" : "searcher";
}

TraceRole trace_role_from_string(std::string_view name) {
    if (name == "generator") return TraceRole::Generator;
    if (name == "searcher") return TraceRole::Searcher;
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown trace role '{}'", name),
                std::string(name));
}

Trace parse_trace(std::string_view raw, TraceRole role) {
    Trace trace{role, {}};
    std::string pending_raw;
    auto flush_raw = [&] {
        if (!pending_raw.empty()) {
            trace.steps.push_back({StepKind::Raw, std::move(pending_raw), {}, {}});
            pending_raw.clear();
        }
    };

    std::size_t pos = 0;
    while (pos < raw.size()) {
        const auto lt = raw.find('<', pos);
        if (lt == std::string_view::npos) {
            pending_raw.append(raw.substr(pos));
            break;
        }
        pending_raw.append(raw.substr(pos, lt - pos));
        const auto open = match_tag(raw, lt);
        if (!open || open->closing) {
            // Plain '<' or a stray closing tag: both are ordinary text.
            const auto skip = open ? open->length : 1;
            pending_raw.append(raw.substr(lt, skip));
            pos = lt + skip;
            continue;
        }

        const auto body_start = lt + open->length;
        std::size_t scan = body_start;
        std::optional<std::size_t> close_at;
        std::size_t close_len = 0;
        while (true) {
            const auto next = raw.find('<', scan);
            if (next == std::string_view::npos) break;
            const auto inner = match_tag(raw, next);
            if (inner && !inner->closing) {
                throw Error(ErrorCode::NestedTag,
                            fmt::format("<{}> opened inside <{}> at offset {}",
                                        tag_name(inner->kind), tag_name(open->kind), next),
                            std::string(tag_name(inner->kind)), next);
            }
            if (inner && inner->kind == open->kind) {
                close_at = next;
                close_len = inner->length;
                break;
            }
            scan = next + 1;
        }
        if (!close_at) {
            throw Error(ErrorCode::UnclosedTag,
                        fmt::format("<{}> at offset {} is never closed", tag_name(open->kind), lt),
                        std::string(tag_name(open->kind)), lt);
        }

        flush_raw();
        TraceStep step{open->kind, std::string(raw.substr(body_start, *close_at - body_start)), {},
                       {}};
        const auto open_text = raw.substr(lt, open->length);
        const auto close_text = raw.substr(*close_at, close_len);
        if (open_text != canonical_open(open->kind)) step.open_tag = std::string(open_text);
        if (close_text != canonical_close(open->kind)) step.close_tag = std::string(close_text);
        trace.steps.push_back(std::move(step));
        pos = *close_at + close_len;
    }
    flush_raw();
    return trace;
}

std::string serialize_trace(const Trace& trace) {
    std::string out;
    for (const auto& step : trace.steps) {
        if (step.kind == StepKind::Raw) {
            out += step.body;
            continue;
        }
        out += step.open_tag.empty() ? canonical_open(step.kind) : step.open_tag;
        out += step.body;
        out += step.close_tag.empty() ? canonical_close(step.kind) : step.close_tag;
    }
    return out;
}

std::size_t count_search_steps(const Trace& trace) {
    return static_cast<std::size_t>(
        std::count_if(trace.steps.begin(), trace.steps.end(),
                      [](const TraceStep& s) { return s.kind == StepKind::Search; }));
}

bool information_follows_search(const Trace& trace) {
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        if (trace.steps[i].kind != StepKind::Information) continue;
        if (i == 0 || trace.steps[i - 1].kind != StepKind::Search) return false;
    }
    return true;
}

std::optional<std::string> last_answer(const Trace& trace) {
    const auto* answer = last_of(trace, StepKind::Answer);
    if (!answer) return std::nullopt;
    auto text = trim(answer->body);
    if (text.empty()) return std::nullopt;
    return std::string(text);
}

std::optional<ExtractedQa> extract_qa(const Trace& trace) {
    auto answer = last_answer(trace);
    if (!answer) return std::nullopt;

    ExtractedQa qa;
    qa.answer = std::move(*answer);
    if (const auto* q = last_of(trace, StepKind::Question)) qa.question = std::string(trim(q->body));
    if (trace.role == TraceRole::Generator && qa.question.empty()) return std::nullopt;

    const auto* steps = last_of(trace, StepKind::AnsweringSteps);
    if (!steps) steps = last_of(trace, StepKind::SearchSteps);
    if (steps) qa.answering_steps = std::string(trim(steps->body));
    return qa;
}

}  // namespace sage
