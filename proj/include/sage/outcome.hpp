#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sage/trace.hpp"

namespace sage {

struct SampleOutcome {
    std::optional<std::string> answer;
    std::size_t steps = 0;
    bool correct = false;
    /// Set when the agent run or its judgment failed; the sample then counts
    /// as incorrect.
    std::optional<std::string> error;
    Trace trace;

    friend bool operator==(const SampleOutcome&, const SampleOutcome&) = default;
};

/// Result of verifying one QA pair with K search-agent samples.
struct VerificationOutcome {
    std::string selected_answer;
    std::size_t selected_steps = 0;
    Trace selected_trace;
    std::size_t selected_index = 0;
    bool is_correct = false;
    bool is_difficult = false;
    std::size_t target_steps = 0;
    std::vector<SampleOutcome> per_sample;

    std::size_t correct_count() const;

    friend bool operator==(const VerificationOutcome&, const VerificationOutcome&) = default;
};

}  // namespace sage
