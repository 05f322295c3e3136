#include "sage/orchestrator.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "sage/error.hpp"
#include "sage/random.hpp"

namespace sage {

std::string_view to_string(GenerationMode mode) {
    return mode == GenerationMode::Feedback ? "feedback" : "resample";
}

GenerationMode generation_mode_from_string(std::string_view name) {
    if (name == "feedback") return GenerationMode::Feedback;
    if (name == "resample") return GenerationMode::Resample;
    throw Error(ErrorCode::InvalidConfig, fmt::format("unknown generation mode '{}'", name),
                std::string(name));
}

std::string_view to_string(FinalStatus status) {
    switch (status) {
        case FinalStatus::Success: return "success";
        case FinalStatus::CorrectOnly: return "correct_only";
        case FinalStatus::Rejected: return "rejected";
    }
    return "rejected";
}

FinalStatus final_status_from_string(std::string_view name) {
    if (name == "success") return FinalStatus::Success;
    if (name == "correct_only") return FinalStatus::CorrectOnly;
    if (name == "rejected") return FinalStatus::Rejected;
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown final status '{}'", name),
                std::string(name));
}

void GenerationConfig::validate() const {
    if (target_steps < 1) throw Error(ErrorCode::InvalidConfig, "target_steps must be >= 1", "target_steps");
    if (samples_per_verification < 1) {
        throw Error(ErrorCode::InvalidConfig, "samples_per_verification must be >= 1",
                    "samples_per_verification");
    }
    if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0", "temperature");
    if (max_output_tokens <= 0) {
        throw Error(ErrorCode::InvalidConfig, "max_output_tokens must be positive", "max_output_tokens");
    }
    if (max_calls_per_datum < 1) {
        throw Error(ErrorCode::InvalidConfig, "max_calls_per_datum must be >= 1", "max_calls_per_datum");
    }
    limits.validate();
    retrieval.validate();
}

const VerificationOutcome* GenerationRecord::final_outcome() const {
    for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) {
        if (it->verification) return &*it->verification;
    }
    return nullptr;
}

const GeneratorOutput* GenerationRecord::final_generator_output() const {
    for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) {
        if (it->verification) return it->generator_output ? &*it->generator_output : nullptr;
    }
    return nullptr;
}

GenerationRecord generate_datum(const Document& doc, const GenerationConfig& config,
                                const PipelineServices& services) {
    config.validate();

    GenerationRecord record;
    record.seed_doc_id = doc.id;
    record.target_steps = config.target_steps;
    record.mode = config.mode;

    BudgetedBackend budget(services.backend, config.max_calls_per_datum);
    const auto datum_seed = derive_seed(config.rng_seed, doc.id);

    // The last verified pair, carried between rounds.
    std::optional<GeneratorOutput> current;
    std::optional<VerificationOutcome> outcome;

    for (std::size_t r = 0; r <= config.max_feedback_rounds; ++r) {
        if (outcome && outcome->is_correct && outcome->is_difficult) break;

        const auto round_seed = derive_seed(datum_seed, r);
        const auto scope = fmt::format("{}/r{}", doc.id, r);
        AgentEnv env{budget, &services.retriever, services.prompts,
                     SamplingParams{config.temperature, config.max_output_tokens, round_seed}};

        RoundRecord round;
        round.round_index = r;
        Trace gen_trace{TraceRole::Generator, {}};
        Trace search_trace{TraceRole::Searcher, {}};
        bool stop = false;

        try {
            GeneratorOutput produced;
            const auto gen_tag = scope + "/generator";
            if (r == 0 || config.mode == GenerationMode::Resample) {
                produced = generate_initial(doc, config.target_steps, config.limits, env, gen_tag);
            } else if (!current || !outcome) {
                throw Error(ErrorCode::GenerationIncomplete, "no verified pair to revise");
            } else {
                round.feedback_mode =
                    outcome->is_correct ? FeedbackMode::Easy : FeedbackMode::Incorrect;
                produced = regenerate_with_feedback(*current, config.target_steps, *outcome,
                                                    *round.feedback_mode, env, gen_tag);
            }
            gen_trace = produced.trace;

            VerifyRequest request;
            request.question = produced.question;
            request.reference_answer = produced.answer;
            request.target_steps = config.target_steps;
            request.samples = config.samples_per_verification;
            request.rng_seed = derive_seed(round_seed, "select");
            request.scope = scope;
            request.parallel = config.parallel_samples;
            const auto question = produced.question;
            auto verified = verify(request, services.judge, [&](std::size_t k) {
                AgentEnv sample_env = env;
                sample_env.sampling.seed = derive_seed(round_seed, k + 1);
                return run_search_agent(question, config.limits, sample_env,
                                        fmt::format("{}/searcher{}", scope, k));
            });
            search_trace = verified.selected_trace;

            if (budget.exhausted()) {
                round.error = "call budget exhausted during verification";
                stop = true;
            }
            round.generator_output = produced;
            round.verification = verified;
            current = std::move(produced);
            outcome = std::move(verified);
        } catch (const Error& e) {
            round.error = fmt::format("{}: {}", to_string(e.code()), e.what());
            if (const auto* failure = dynamic_cast<const AgentFailure*>(&e)) {
                gen_trace = failure->partial_trace();
            }
            // Feedback mode can only revise a verified pair; without one
            // there is nothing left to do.
            stop = e.code() == ErrorCode::BudgetExceeded ||
                   (config.mode == GenerationMode::Feedback && !current);
        }

        record.rounds.push_back(std::move(round));
        record.accumulated_gen_traces.push_back(std::move(gen_trace));
        record.accumulated_search_traces.push_back(std::move(search_trace));
        if (stop) break;
    }

    if (outcome && outcome->is_correct) {
        record.final_status = outcome->is_difficult ? FinalStatus::Success : FinalStatus::CorrectOnly;
        record.final_qa = QaPair{current->question, current->answer};
    } else {
        record.final_status = FinalStatus::Rejected;
    }
    if (!outcome) {
        const auto& last = record.rounds.back();
        record.error = last.error.value_or("no round reached verification");
    }
    record.backend_calls = budget.calls_made();
    return record;
}

BatchSummary run_batch(const Corpus& corpus, const BatchOptions& options,
                       const PipelineServices& services, const RecordSink& sink) {
    if (corpus.document_count() == 0) {
        throw Error(ErrorCode::EmptyCorpus, "cannot run a batch over an empty corpus");
    }
    if (options.configs.empty()) throw Error(ErrorCode::InvalidConfig, "batch needs at least one config");
    for (const auto& c : options.configs) c.validate();

    const auto wanted = options.num_data == 0 ? corpus.document_count() : options.num_data;
    const auto order = corpus.sample_without_replacement(wanted, options.seed);
    const auto docs = corpus.documents();

    BatchSummary summary;
    std::mutex sink_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr sink_failure;

    auto worker = [&] {
        while (!abort.load()) {
            const auto i = next.fetch_add(1);
            if (i >= order.size()) return;
            auto config = options.configs[i % options.configs.size()];
            config.rng_seed = options.seed;
            const auto& doc = docs[order[i]];

            GenerationRecord record;
            try {
                record = generate_datum(doc, config, services);
            } catch (const std::exception& e) {
                record = GenerationRecord{};
                record.seed_doc_id = doc.id;
                record.target_steps = config.target_steps;
                record.mode = config.mode;
                record.error = e.what();
            }

            std::lock_guard lock(sink_mutex);
            if (abort.load()) return;
            try {
                sink(record);
            } catch (...) {
                sink_failure = std::current_exception();
                abort.store(true);
                return;
            }
            ++summary.total;
            ++summary.by_status[record.final_status];
            ++summary.by_target[record.target_steps][record.final_status];
            if (record.error) ++summary.errored;
        }
    };

    const auto threads = std::max<std::size_t>(1, std::min(options.parallelism, order.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (sink_failure) std::rethrow_exception(sink_failure);
    return summary;
}

std::vector<DatasetRow> filter_dataset(std::span<const GenerationRecord> records,
                                       std::size_t min_steps) {
    std::vector<DatasetRow> rows;
    for (const auto& rec : records) {
        const auto* outcome = rec.final_outcome();
        if (!rec.final_qa || !outcome || !outcome->is_correct) continue;
        if (outcome->selected_steps < min_steps) continue;
        rows.push_back({rec.final_qa->question, rec.final_qa->answer, rec.target_steps,
                        outcome->selected_steps, rec.rounds.size(), rec.final_status,
                        rec.seed_doc_id, rec.mode});
    }
    return rows;
}

namespace {

using nlohmann::json;

json row_to_json(const DatasetRow& row) {
    return {{"question", row.question},
            {"answer", row.answer},
            {"target_steps", row.target_steps},
            {"measured_steps", row.measured_steps},
            {"rounds_used", row.rounds_used},
            {"final_status", to_string(row.final_status)},
            {"seed_doc_id", row.seed_doc_id},
            {"mode", to_string(row.mode)}};
}

DatasetRow row_from_json(const json& j) {
    DatasetRow row;
    row.question = j.at("question").get<std::string>();
    row.answer = j.at("answer").get<std::string>();
    row.target_steps = j.at("target_steps").get<std::size_t>();
    row.measured_steps = j.value("measured_steps", std::size_t{0});
    row.rounds_used = j.value("rounds_used", std::size_t{0});
    row.final_status = final_status_from_string(j.value("final_status", std::string("success")));
    row.seed_doc_id = j.value("seed_doc_id", std::string());
    row.mode = generation_mode_from_string(j.value("mode", std::string("feedback")));
    return row;
}

}  // namespace

std::size_t export_dataset(std::span<const DatasetRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path.string()), path.string());
    }
    for (const auto& row : rows) out << row_to_json(row).dump() << '\n';
    out.flush();
    if (!out) {
        throw Error(ErrorCode::IoError, fmt::format("write to '{}' failed", path.string()), path.string());
    }
    return rows.size();
}

std::vector<DatasetRow> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile, fmt::format("cannot open dataset '{}'", path.string()),
                    path.string());
    }
    std::vector<DatasetRow> rows;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(row_from_json(json::parse(raw)));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::MalformedRecord, fmt::format("dataset line {}: {}", line, e.what()),
                        {}, line);
        }
    }
    return rows;
}

}  // namespace sage
