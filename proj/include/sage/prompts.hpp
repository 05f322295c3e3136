#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace sage {

using Substitution = std::pair<std::string_view, std::string_view>;

/// Replaces `{name}` for each supplied name in one left-to-right pass.
/// Substituted text is never rescanned, and braces that do not spell a
/// supplied name are copied through unchanged.
std::string render_template(std::string_view tmpl, std::initializer_list<Substitution> values);

/// The six prompt templates the pipeline renders.
struct PromptLibrary {
    std::string initial_generator;
    std::string search_agent;
    std::string judge;
    std::string feedback_incorrect;
    std::string feedback_easy;
    std::string reasoning_strategy;

    /// Templates compiled in from prompts/.
    static PromptLibrary defaults();

    /// Loads `<name>.txt` from `dir` for every template present there;
    /// missing files keep the default.
    static PromptLibrary load(const std::filesystem::path& dir);
};

}  // namespace sage
