// sage: command-line front end for the generation pipeline.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sage/config.hpp"
#include "sage/corpus.hpp"
#include "sage/error.hpp"
#include "sage/metrics.hpp"
#include "sage/orchestrator.hpp"
#include "sage/random.hpp"
#include "sage/records_io.hpp"
#include "sage/retrieval.hpp"

namespace {

using namespace sage;

// Owns everything a PipelineServices refers to.
struct Services {
    std::shared_ptr<Backend> backend;
    std::unique_ptr<Retriever> retriever;
    std::unique_ptr<Judge> judge;
    PromptLibrary prompts;
    std::shared_ptr<const Corpus> corpus;

    PipelineServices view() const { return {*backend, *retriever, *judge, prompts}; }
};

Services make_services(const RunConfig& rc, bool need_corpus) {
    Services s;
    s.prompts = rc.prompts_dir ? PromptLibrary::load(*rc.prompts_dir) : PromptLibrary::defaults();

    if (rc.backend == BackendKind::Script) {
        s.backend = load_script(*rc.script_path);
    } else {
        s.backend = std::make_shared<HttpBackend>(HttpBackendConfig::from_env());
    }

    if (need_corpus || rc.retriever == RetrieverKind::Local) {
        if (rc.corpus_path.empty()) throw Error(ErrorCode::InvalidConfig, "config has no corpus", "corpus");
        s.corpus = std::make_shared<const Corpus>(Corpus::ingest(rc.corpus_path));
    }
    if (rc.retriever == RetrieverKind::Remote) {
        s.retriever = std::make_unique<RemoteRetriever>(rc.retrieval_url, rc.base().retrieval.top_k);
    } else {
        auto index = std::make_shared<const Index>(Index::build(s.corpus));
        s.retriever = std::make_unique<LocalRetriever>(std::move(index), rc.base().retrieval);
    }

    if (rc.judge == JudgeKind::ExactMatch) {
        s.judge = std::make_unique<ExactMatchJudge>();
    } else {
        s.judge = std::make_unique<LlmJudge>(*s.backend, s.prompts);
    }
    return s;
}

ReportFormat parse_format(const std::string& name) {
    if (name == "json") return ReportFormat::Json;
    return ReportFormat::Text;
}

int cmd_index(const std::string& corpus_path, const std::string& query, std::size_t top_k) {
    auto corpus = std::make_shared<const Corpus>(Corpus::ingest(corpus_path));
    const auto index = Index::build(corpus);
    fmt::print("documents {}\nvocabulary {}\navg_length {:.2f}\n", index.document_count(),
               index.vocabulary_size(), index.average_length());
    if (!query.empty()) {
        RetrievalConfig cfg;
        cfg.top_k = top_k;
        const auto hits = search(index, query, cfg);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            fmt::print("{}\t{:.6f}\t{}\t{}\n", i + 1, hits[i].score, hits[i].doc_id, hits[i].title);
        }
    }
    return 0;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, std::optional<std::size_t> num_data,
                 std::optional<std::size_t> parallelism) {
    auto rc = load_run_config(config_path);
    if (seed) rc.batch.seed = *seed;
    if (num_data) rc.batch.num_data = *num_data;
    if (parallelism) rc.batch.parallelism = std::max<std::size_t>(1, *parallelism);

    auto services = make_services(rc, true);
    RecordWriter writer(out_dir);
    const auto summary = run_batch(*services.corpus, rc.batch, services.view(),
                                   [&](const GenerationRecord& r) { writer.write(r); });

    auto count = [](const std::map<FinalStatus, std::size_t>& m, FinalStatus s) {
        auto it = m.find(s);
        return it == m.end() ? std::size_t{0} : it->second;
    };
    fmt::print("records {}  success {}  correct_only {}  rejected {}  errored {}\n", summary.total,
               count(summary.by_status, FinalStatus::Success),
               count(summary.by_status, FinalStatus::CorrectOnly),
               count(summary.by_status, FinalStatus::Rejected), summary.errored);
    for (const auto& [target, m] : summary.by_target) {
        fmt::print("S={}  success {}  correct_only {}  rejected {}\n", target,
                   count(m, FinalStatus::Success), count(m, FinalStatus::CorrectOnly),
                   count(m, FinalStatus::Rejected));
    }
    return 0;
}

int cmd_verify(const std::string& config_path, const std::string& dataset_path, std::size_t k,
               std::optional<std::uint64_t> seed, const std::string& out_path) {
    const auto rc = load_run_config(config_path);
    const auto rows = read_dataset(dataset_path);
    auto services = make_services(rc, false);
    const auto& base = rc.base();
    const auto run_seed = seed.value_or(rc.batch.seed);

    std::FILE* out = stdout;
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(nullptr, &std::fclose);
    if (!out_path.empty()) {
        file.reset(std::fopen(out_path.c_str(), "wb"));
        if (!file) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", out_path), out_path);
        out = file.get();
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto row_seed = derive_seed(run_seed, i);
        VerifyRequest request;
        request.question = row.question;
        request.reference_answer = row.answer;
        request.target_steps = row.target_steps;
        request.samples = k;
        request.rng_seed = derive_seed(row_seed, "select");
        request.scope = fmt::format("verify/{}", i);
        request.parallel = base.parallel_samples;

        AgentEnv env{*services.backend, services.retriever.get(), services.prompts,
                     SamplingParams{base.temperature, base.max_output_tokens, row_seed}};
        const auto outcome = verify(request, *services.judge, [&](std::size_t sample) {
            AgentEnv sample_env = env;
            sample_env.sampling.seed = derive_seed(row_seed, sample + 1);
            return run_search_agent(row.question, base.limits, sample_env,
                                    fmt::format("verify/{}/searcher{}", i, sample));
        });
        if (outcome.is_correct) ++correct;

        nlohmann::json line = {{"question", row.question},
                               {"answer", row.answer},
                               {"target_steps", row.target_steps},
                               {"is_correct", outcome.is_correct},
                               {"is_difficult", outcome.is_difficult},
                               {"measured_steps", outcome.selected_steps},
                               {"correct_samples", outcome.correct_count()},
                               {"k", k}};
        fmt::print(out, "{}\n", line.dump());
    }
    fmt::print(stderr, "verified {}  correct {}\n", rows.size(), correct);
    return 0;
}

int cmd_report(const std::string& records_dir, const std::string& format) {
    const auto records = read_records(records_dir);
    fmt::print("{}", render_report(compute_quality_report(records), parse_format(format)));
    return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& records_dir,
                const std::string& format) {
    const auto rc = load_run_config(config_path);
    const auto records = read_records(records_dir);
    const auto inputs = correct_search_traces(records);
    if (inputs.empty()) throw Error(ErrorCode::EmptyInput, "no correct search traces to analyze");

    const auto prompts = rc.prompts_dir ? PromptLibrary::load(*rc.prompts_dir) : PromptLibrary::defaults();
    std::shared_ptr<Backend> backend;
    if (rc.backend == BackendKind::Script) {
        backend = load_script(*rc.script_path);
    } else {
        backend = std::make_shared<HttpBackend>(HttpBackendConfig::from_env());
    }
    const auto analysis = analyze_reasoning_strategies(inputs, *backend, prompts);
    fmt::print("{}", render_strategy_analysis(analysis, parse_format(format)));
    return 0;
}

int cmd_export(const std::string& records_dir, std::size_t min_steps, const std::string& out_path) {
    const auto records = read_records(records_dir);
    const auto rows = filter_dataset(records, min_steps);
    export_dataset(rows, out_path);
    fmt::print("exported {} of {} records\n", rows.size(), records.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sage: search-agent-verified QA generation"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "RNG seed"); };

    std::string corpus_path, query;
    std::size_t top_k = 3;
    auto* index = app.add_subcommand("index", "Build a BM25 index and print statistics");
    index->add_option("corpus", corpus_path, "JSONL corpus")->required();
    index->add_option("--query", query, "Run one query against the index");
    index->add_option("--top-k", top_k, "Hits to print with --query")->check(CLI::PositiveNumber);
    add_seed(index);

    std::string config_path, out_dir;
    std::optional<std::size_t> num_data, parallelism;
    auto* generate = app.add_subcommand("generate", "Generate QA records from a corpus");
    generate->add_option("--config", config_path, "TOML run config")->required();
    generate->add_option("--out", out_dir, "Record directory")->required();
    generate->add_option("--num-data", num_data, "Seed documents to use (0 = all)");
    generate->add_option("--parallelism", parallelism, "Concurrent data");
    add_seed(generate);

    std::string dataset_path, verify_out;
    std::size_t k = 4;
    auto* verify_cmd = app.add_subcommand("verify", "Re-verify an exported QA dataset");
    verify_cmd->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
    verify_cmd->add_option("--k", k, "Search-agent samples per question")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--config", config_path, "TOML run config")->required();
    verify_cmd->add_option("--out", verify_out, "Write results here instead of stdout");
    add_seed(verify_cmd);

    std::string records_dir, format = "text";
    auto* report = app.add_subcommand("report", "Quality metrics over generation records");
    report->add_option("--records", records_dir, "Record directory or records.jsonl")->required();
    report->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    add_seed(report);

    auto* analyze = app.add_subcommand("analyze", "Label reasoning strategies in correct traces");
    analyze->add_option("--records", records_dir, "Record directory or records.jsonl")->required();
    analyze->add_option("--config", config_path, "TOML run config")->required();
    analyze->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    add_seed(analyze);

    std::string export_out;
    std::size_t min_steps = 2;
    auto* export_cmd = app.add_subcommand("export", "Write the filtered QA dataset");
    export_cmd->add_option("--records", records_dir, "Record directory or records.jsonl")->required();
    export_cmd->add_option("--min-steps", min_steps, "Minimum measured search steps");
    export_cmd->add_option("--out", export_out, "Output JSONL")->required();
    add_seed(export_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*index) return cmd_index(corpus_path, query, top_k);
        if (*generate) return cmd_generate(config_path, out_dir, seed, num_data, parallelism);
        if (*verify_cmd) return cmd_verify(config_path, dataset_path, k, seed, verify_out);
        if (*report) return cmd_report(records_dir, format);
        if (*analyze) return cmd_analyze(config_path, records_dir, format);
        if (*export_cmd) return cmd_export(records_dir, min_steps, export_out);
    } catch (const Error& e) {
        fmt::print(stderr, "error [{}]: {}\n", to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 1;
}
