#include "sage/records_io.hpp"

#include <fmt/format.h>

#include "sage/error.hpp"

namespace sage {

using nlohmann::json;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<std::string> opt_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

json generator_to_json(const GeneratorOutput& g) {
    return {{"question", g.question},
            {"answer", g.answer},
            {"answering_steps", opt(g.answering_steps)},
            {"forced_finalization", g.forced_finalization},
            {"mode", g.mode ? json(to_string(*g.mode)) : json(nullptr)},
            {"prompt", g.prompt},
            {"source_prompt", g.source_prompt},
            {"trace", trace_to_json(g.trace)}};
}

GeneratorOutput generator_from_json(const json& j) {
    GeneratorOutput g;
    g.question = j.at("question").get<std::string>();
    g.answer = j.at("answer").get<std::string>();
    g.answering_steps = opt_string(j, "answering_steps");
    g.forced_finalization = j.value("forced_finalization", false);
    if (auto mode = opt_string(j, "mode")) g.mode = feedback_mode_from_string(*mode);
    g.prompt = j.value("prompt", std::string());
    g.source_prompt = j.value("source_prompt", std::string());
    g.trace = trace_from_json(j.at("trace"));
    return g;
}

json outcome_to_json(const VerificationOutcome& v) {
    json samples = json::array();
    for (const auto& s : v.per_sample) {
        samples.push_back({{"answer", opt(s.answer)},
                           {"steps", s.steps},
                           {"correct", s.correct},
                           {"error", opt(s.error)},
                           {"trace", trace_to_json(s.trace)}});
    }
    return {{"selected_answer", v.selected_answer},
            {"selected_steps", v.selected_steps},
            {"selected_index", v.selected_index},
            {"is_correct", v.is_correct},
            {"is_difficult", v.is_difficult},
            {"target_steps", v.target_steps},
            {"per_sample", std::move(samples)}};
}

VerificationOutcome outcome_from_json(const json& j) {
    VerificationOutcome v;
    v.selected_answer = j.at("selected_answer").get<std::string>();
    v.selected_steps = j.at("selected_steps").get<std::size_t>();
    v.selected_index = j.at("selected_index").get<std::size_t>();
    v.is_correct = j.at("is_correct").get<bool>();
    v.is_difficult = j.at("is_difficult").get<bool>();
    v.target_steps = j.at("target_steps").get<std::size_t>();
    for (const auto& s : j.at("per_sample")) {
        SampleOutcome sample;
        sample.answer = opt_string(s, "answer");
        sample.steps = s.at("steps").get<std::size_t>();
        sample.correct = s.at("correct").get<bool>();
        sample.error = opt_string(s, "error");
        sample.trace = trace_from_json(s.at("trace"));
        v.per_sample.push_back(std::move(sample));
    }
    if (v.selected_index < v.per_sample.size()) {
        v.selected_trace = v.per_sample[v.selected_index].trace;
    } else if (!v.per_sample.empty()) {
        throw std::out_of_range("selected_index beyond per_sample");
    }
    return v;
}

json traces_to_json(const std::vector<Trace>& traces) {
    json out = json::array();
    for (const auto& t : traces) out.push_back(trace_to_json(t));
    return out;
}

std::vector<Trace> traces_from_json(const json& j) {
    std::vector<Trace> out;
    for (const auto& t : j) out.push_back(trace_from_json(t));
    return out;
}

}  // namespace

json trace_to_json(const Trace& trace) {
    return {{"role", to_string(trace.role)},
            {"raw", serialize_trace(trace)},
            {"search_steps", count_search_steps(trace)}};
}

Trace trace_from_json(const json& j) {
    return parse_trace(j.at("raw").get<std::string>(),
                       trace_role_from_string(j.at("role").get<std::string>()));
}

json record_to_json(const GenerationRecord& record) {
    json rounds = json::array();
    for (const auto& r : record.rounds) {
        rounds.push_back(
            {{"round_index", r.round_index},
             {"feedback_mode", r.feedback_mode ? json(to_string(*r.feedback_mode)) : json(nullptr)},
             {"generator_output", r.generator_output ? generator_to_json(*r.generator_output) : json(nullptr)},
             {"verification", r.verification ? outcome_to_json(*r.verification) : json(nullptr)},
             {"error", opt(r.error)}});
    }
    json final_qa = nullptr;
    if (record.final_qa) {
        final_qa = {{"question", record.final_qa->question}, {"answer", record.final_qa->answer}};
    }
    return {{"seed_doc_id", record.seed_doc_id},
            {"target_steps", record.target_steps},
            {"mode", to_string(record.mode)},
            {"final_status", to_string(record.final_status)},
            {"final_qa", std::move(final_qa)},
            {"error", opt(record.error)},
            {"backend_calls", record.backend_calls},
            {"rounds", std::move(rounds)},
            {"accumulated_gen_traces", traces_to_json(record.accumulated_gen_traces)},
            {"accumulated_search_traces", traces_to_json(record.accumulated_search_traces)}};
}

GenerationRecord record_from_json(const json& j) {
    try {
        GenerationRecord record;
        record.seed_doc_id = j.at("seed_doc_id").get<std::string>();
        record.target_steps = j.at("target_steps").get<std::size_t>();
        record.mode = generation_mode_from_string(j.at("mode").get<std::string>());
        record.final_status = final_status_from_string(j.at("final_status").get<std::string>());
        if (const auto& qa = j.at("final_qa"); !qa.is_null()) {
            record.final_qa = QaPair{qa.at("question").get<std::string>(),
                                     qa.at("answer").get<std::string>()};
        }
        record.error = opt_string(j, "error");
        record.backend_calls = j.value("backend_calls", std::size_t{0});
        for (const auto& r : j.at("rounds")) {
            RoundRecord round;
            round.round_index = r.at("round_index").get<std::size_t>();
            if (auto mode = opt_string(r, "feedback_mode")) round.feedback_mode = feedback_mode_from_string(*mode);
            if (const auto& g = r.at("generator_output"); !g.is_null()) {
                round.generator_output = generator_from_json(g);
            }
            if (const auto& v = r.at("verification"); !v.is_null()) {
                round.verification = outcome_from_json(v);
            }
            round.error = opt_string(r, "error");
            record.rounds.push_back(std::move(round));
        }
        record.accumulated_gen_traces = traces_from_json(j.at("accumulated_gen_traces"));
        record.accumulated_search_traces = traces_from_json(j.at("accumulated_search_traces"));
        return record;
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedRecord, fmt::format("bad generation record: {}", e.what()));
    } catch (const std::exception& e) {
        throw Error(ErrorCode::MalformedRecord, fmt::format("bad generation record: {}", e.what()));
    }
}

std::vector<GenerationRecord> read_records(const std::filesystem::path& dir) {
    const auto path = std::filesystem::is_directory(dir) ? dir / kRecordsFile : dir;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile, fmt::format("cannot open records '{}'", path.string()),
                    path.string());
    }
    std::vector<GenerationRecord> records;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(raw);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedRecord, fmt::format("records line {}: {}", line, e.what()),
                        {}, line);
        }
        records.push_back(record_from_json(j));
    }
    return records;
}

RecordWriter::RecordWriter(const std::filesystem::path& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    records_.open(dir / kRecordsFile, std::ios::binary | std::ios::app);
    traces_.open(dir / kTracesFile, std::ios::binary | std::ios::app);
    if (!records_ || !traces_) {
        throw Error(ErrorCode::IoError, fmt::format("cannot write into '{}'", dir.string()),
                    dir.string());
    }
}

void RecordWriter::write(const GenerationRecord& record) {
    std::lock_guard lock(mutex_);
    records_ << record_to_json(record).dump() << '\n';
    for (const auto& round : record.rounds) {
        if (round.generator_output) traces_ << trace_to_json(round.generator_output->trace).dump() << '\n';
        if (round.verification) {
            for (const auto& s : round.verification->per_sample) {
                traces_ << trace_to_json(s.trace).dump() << '\n';
            }
        }
    }
    records_.flush();
    traces_.flush();
    if (!records_ || !traces_) {
        throw Error(ErrorCode::IoError, fmt::format("write into '{}' failed", dir_.string()),
                    dir_.string());
    }
}

}  // namespace sage
