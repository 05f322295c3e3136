#include "sage/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "sage/error.hpp"

namespace sage {

namespace {

template <typename T>
T get_or(const toml::node_view<const toml::node>& node, std::string_view key, T fallback) {
    if (!node) return fallback;
    auto v = node.value<T>();
    if (!v) throw Error(ErrorCode::InvalidConfig, fmt::format("config key '{}' has the wrong type", key), std::string(key));
    return *v;
}

std::size_t get_count(const toml::node_view<const toml::node>& node, std::string_view key,
                      std::size_t fallback) {
    const auto v = get_or<std::int64_t>(node, key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw Error(ErrorCode::InvalidConfig, fmt::format("config key '{}' must be >= 0", key), std::string(key));
    return static_cast<std::size_t>(v);
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, fmt::format("config parse error: {}", e.description()));
    }
    const toml::table& tbl = root;

    RunConfig rc;
    GenerationConfig base;
    base.samples_per_verification = get_count(tbl["samples_per_verification"], "samples_per_verification", 4);
    base.max_feedback_rounds = get_count(tbl["max_feedback_rounds"], "max_feedback_rounds", 3);
    base.mode = generation_mode_from_string(get_or<std::string>(tbl["mode"], "mode", "feedback"));

    const auto agent = tbl["agent"];
    base.limits.max_search_steps = get_count(agent["max_search_steps"], "agent.max_search_steps", 20);
    base.limits.answer_type_hint =
        get_or<std::string>(agent["answer_type"], "agent.answer_type", base.limits.answer_type_hint);
    base.temperature = get_or<double>(agent["temperature"], "agent.temperature", 1.0);
    base.max_output_tokens = static_cast<int>(
        get_count(agent["max_output_tokens"], "agent.max_output_tokens", 2048));
    base.max_calls_per_datum = get_count(agent["max_calls_per_datum"], "agent.max_calls_per_datum", 500);

    const auto retrieval = tbl["retrieval"];
    base.retrieval.top_k = get_count(retrieval["top_k"], "retrieval.top_k", 3);
    base.retrieval.bm25_k1 = get_or<double>(retrieval["bm25_k1"], "retrieval.bm25_k1", 1.2);
    base.retrieval.bm25_b = get_or<double>(retrieval["bm25_b"], "retrieval.bm25_b", 0.75);
    const auto retriever = get_or<std::string>(retrieval["backend"], "retrieval.backend", "local");
    if (retriever == "local") {
        rc.retriever = RetrieverKind::Local;
    } else if (retriever == "remote") {
        rc.retriever = RetrieverKind::Remote;
        rc.retrieval_url = get_or<std::string>(retrieval["url"], "retrieval.url", "");
        if (rc.retrieval_url.empty()) {
            throw Error(ErrorCode::InvalidConfig, "remote retrieval needs retrieval.url", "retrieval.url");
        }
    } else {
        throw Error(ErrorCode::InvalidConfig, fmt::format("unknown retrieval backend '{}'", retriever),
                    "retrieval.backend");
    }

    std::vector<std::size_t> targets;
    if (const auto* arr = tbl["target_steps"].as_array()) {
        for (const auto& el : *arr) {
            auto v = el.value<std::int64_t>();
            if (!v || *v < 1) throw Error(ErrorCode::InvalidConfig, "target_steps entries must be positive integers", "target_steps");
            targets.push_back(static_cast<std::size_t>(*v));
        }
    } else {
        targets.push_back(get_count(tbl["target_steps"], "target_steps", 3));
    }
    if (targets.empty()) throw Error(ErrorCode::InvalidConfig, "target_steps is empty", "target_steps");

    const auto seed = get_or<std::int64_t>(tbl["seed"], "seed", 0);
    base.rng_seed = static_cast<std::uint64_t>(seed);
    for (auto s : targets) {
        auto c = base;
        c.target_steps = s;
        c.validate();
        rc.batch.configs.push_back(std::move(c));
    }
    rc.batch.seed = base.rng_seed;
    rc.batch.num_data = get_count(tbl["num_data"], "num_data", 0);
    rc.batch.parallelism = std::max<std::size_t>(1, get_count(tbl["parallelism"], "parallelism", 1));

    if (auto corpus = tbl["corpus"].value<std::string>()) rc.corpus_path = resolve(base_dir, *corpus);
    if (auto prompts = tbl["prompts_dir"].value<std::string>()) rc.prompts_dir = resolve(base_dir, *prompts);

    const auto backend = tbl["backend"];
    const auto kind = get_or<std::string>(backend["kind"], "backend.kind", "live");
    if (kind == "live") {
        rc.backend = BackendKind::Live;
    } else if (kind == "script") {
        rc.backend = BackendKind::Script;
        auto script = backend["script"].value<std::string>();
        if (!script) throw Error(ErrorCode::InvalidConfig, "script backend needs backend.script", "backend.script");
        rc.script_path = resolve(base_dir, *script);
    } else {
        throw Error(ErrorCode::InvalidConfig, fmt::format("unknown backend kind '{}'", kind), "backend.kind");
    }

    const auto judge = get_or<std::string>(tbl["judge"]["kind"], "judge.kind", "llm");
    if (judge == "llm") {
        rc.judge = JudgeKind::Llm;
    } else if (judge == "exact") {
        rc.judge = JudgeKind::ExactMatch;
    } else {
        throw Error(ErrorCode::InvalidConfig, fmt::format("unknown judge kind '{}'", judge), "judge.kind");
    }
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile, fmt::format("cannot open config '{}'", path.string()),
                    path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace sage
