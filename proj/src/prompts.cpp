#include "sage/prompts.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sage/default_prompts.hpp"
#include "sage/error.hpp"

namespace sage {

std::string render_template(std::string_view tmpl, std::initializer_list<Substitution> values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const auto close = tmpl.find('}', open + 1);
        bool replaced = false;
        if (close != std::string_view::npos) {
            const auto name = tmpl.substr(open + 1, close - open - 1);
            for (const auto& [key, value] : values) {
                if (key == name) {
                    out.append(value);
                    pos = close + 1;
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) {
            out.push_back('{');
            pos = open + 1;
        }
    }
    return out;
}

PromptLibrary PromptLibrary::defaults() {
    namespace d = prompts::defaults;
    return {std::string(d::initial_generator),  std::string(d::search_agent),
            std::string(d::judge),              std::string(d::feedback_incorrect),
            std::string(d::feedback_easy),      std::string(d::reasoning_strategy)};
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    auto lib = defaults();
    auto maybe_load = [&](const char* name, std::string& slot) {
        const auto path = dir / fmt::format("{}.txt", name);
        if (!std::filesystem::exists(path)) return;
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error(ErrorCode::IoError, fmt::format("cannot read prompt '{}'", path.string()),
                        path.string());
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        slot = buffer.str();
    };
    maybe_load("initial_generator", lib.initial_generator);
    maybe_load("search_agent", lib.search_agent);
    maybe_load("judge", lib.judge);
    maybe_load("feedback_incorrect", lib.feedback_incorrect);
    maybe_load("feedback_easy", lib.feedback_easy);
    maybe_load("reasoning_strategy", lib.reasoning_strategy);
    return lib;
}

}  // namespace sage
