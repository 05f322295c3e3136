#include "sage/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "sage/error.hpp"

namespace sage {

namespace {

QualityMetrics aggregate(std::span<const GenerationRecord* const> records) {
    QualityMetrics m;
    m.n_total = records.size();
    double share_sum = 0.0;
    double steps_sum = 0.0;
    for (const auto* rec : records) {
        const auto* outcome = rec->final_outcome();
        if (rec->final_status == FinalStatus::Success) ++m.n_success;
        if (!outcome || !outcome->is_correct) continue;
        ++m.n_correct;
        const auto k = outcome->per_sample.size();
        share_sum += k == 0 ? 0.0 : static_cast<double>(outcome->correct_count()) / static_cast<double>(k);
        steps_sum += static_cast<double>(outcome->selected_steps);
    }
    if (m.n_total > 0) {
        m.percent_correct = static_cast<double>(m.n_correct) / static_cast<double>(m.n_total);
        m.percent_pass = static_cast<double>(m.n_success) / static_cast<double>(m.n_total);
    }
    if (m.n_correct > 0) {
        m.avg_at_k = share_sum / static_cast<double>(m.n_correct);
        m.mean_search_steps = steps_sum / static_cast<double>(m.n_correct);
    }
    return m;
}

std::string pct(double fraction) { return fmt::format("{:.1f}", fraction * 100.0); }

std::string lower_trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\"'`*");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\"'`*");
    std::string out(s.substr(first, last - first + 1));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

QualityReport compute_quality_report(std::span<const GenerationRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to report on");

    std::vector<const GenerationRecord*> all;
    std::map<std::size_t, std::vector<const GenerationRecord*>> by_target;
    std::set<std::size_t> ks;
    for (const auto& rec : records) {
        all.push_back(&rec);
        by_target[rec.target_steps].push_back(&rec);
        if (const auto* o = rec.final_outcome()) ks.insert(o->per_sample.size());
    }

    QualityReport report;
    static_cast<QualityMetrics&>(report) = aggregate(all);
    report.k = ks.size() == 1 ? *ks.begin() : 0;
    for (const auto& [target, group] : by_target) report.per_target_step[target] = aggregate(group);
    return report;
}

std::map<std::size_t, double> per_step_breakdown(std::span<const GenerationRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to break down");
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> tally;  // target -> (success, total)
    for (const auto& rec : records) {
        auto& [success, total] = tally[rec.target_steps];
        ++total;
        if (rec.final_status == FinalStatus::Success) ++success;
    }
    std::map<std::size_t, double> out;
    for (const auto& [target, counts] : tally) {
        out[target] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return out;
}

std::string render_report(const QualityReport& report, ReportFormat format) {
    const auto avg_label = report.k > 0 ? fmt::format("Avg@{}", report.k) : std::string("Avg@K");
    const bool has_correct = report.n_correct > 0;

    if (format == ReportFormat::Json) {
        auto metrics_json = [&](const QualityMetrics& m) {
            nlohmann::json j = {{"n_total", m.n_total},
                                {"n_correct", m.n_correct},
                                {"n_success", m.n_success},
                                {"percent_correct", pct(m.percent_correct)},
                                {"percent_pass", pct(m.percent_pass)}};
            j["avg_at_k"] = m.n_correct > 0 ? nlohmann::json(pct(m.avg_at_k)) : nlohmann::json(nullptr);
            j["mean_search_steps"] = m.n_correct > 0
                                         ? nlohmann::json(fmt::format("{:.1f}", m.mean_search_steps))
                                         : nlohmann::json(nullptr);
            return j;
        };
        nlohmann::json j = metrics_json(report);
        j["k"] = report.k;
        nlohmann::json per_step = nlohmann::json::object();
        for (const auto& [target, m] : report.per_target_step) {
            per_step[std::to_string(target)] = metrics_json(m);
        }
        j["per_target_step"] = std::move(per_step);
        return j.dump(2) + "\n";
    }

    std::string out;
    out += fmt::format("records {}  correct {}  success {}\n", report.n_total, report.n_correct,
                       report.n_success);
    out += fmt::format("{:<10}{:>8}{:>8}{:>8}{:>9}\n", "", "%corr", "%pass", avg_label, "#search");
    out += fmt::format("{:<10}{:>8}{:>8}{:>8}{:>9}\n", "overall", pct(report.percent_correct),
                       pct(report.percent_pass), has_correct ? pct(report.avg_at_k) : "-",
                       has_correct ? fmt::format("{:.1f}", report.mean_search_steps) : "-");
    if (!report.per_target_step.empty()) {
        out += "\npass by target steps\n";
        for (const auto& [target, m] : report.per_target_step) {
            const bool ok = m.n_correct > 0;
            out += fmt::format("S={} {}  %corr {}  {} {}  #search {}  n={}\n", target,
                               pct(m.percent_pass), pct(m.percent_correct), avg_label,
                               ok ? pct(m.avg_at_k) : "-",
                               ok ? fmt::format("{:.1f}", m.mean_search_steps) : "-", m.n_total);
        }
    }
    return out;
}

std::optional<std::vector<std::vector<std::string>>> parse_strategy_labels(std::string_view reply) {
    static const std::regex step_line(R"(^\s*[-*]?\s*\**\s*step\s+[^:\n]*:\s*\**\s*\[([^\]\n]*)\])",
                                      std::regex::icase);
    std::vector<std::vector<std::string>> steps;
    std::size_t pos = 0;
    while (pos <= reply.size()) {
        const auto nl = reply.find('\n', pos);
        const std::string line(reply.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? reply.size() + 1 : nl + 1;

        std::smatch m;
        if (!std::regex_search(line, m, step_line)) continue;
        std::vector<std::string> labels;
        const std::string inner = m[1].str();
        std::size_t start = 0;
        while (start <= inner.size()) {
            const auto comma = inner.find(',', start);
            auto label = lower_trim(std::string_view(inner).substr(
                start, comma == std::string::npos ? std::string::npos : comma - start));
            if (!label.empty()) labels.push_back(std::move(label));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        steps.push_back(std::move(labels));
    }
    if (steps.empty()) return std::nullopt;
    return steps;
}

StrategyAnalysis analyze_reasoning_strategies(std::span<const StrategyInput> inputs,
                                              Backend& backend, const PromptLibrary& prompts,
                                              bool parallel) {
    std::vector<std::optional<std::set<std::string>>> present(inputs.size());
    const auto n = static_cast<std::ptrdiff_t>(inputs.size());

#pragma omp parallel for schedule(dynamic, 1) if (parallel && inputs.size() > 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& in = inputs[static_cast<std::size_t>(i)];
        ChatRequest request;
        request.prompt = render_template(prompts.reasoning_strategy,
                                         {{"question", in.question},
                                          {"agent_trace", serialize_trace(in.trace)}});
        request.temperature = 0.0;
        request.key = {fmt::format("analyze/{}", i), 0};
        try {
            auto labels = parse_strategy_labels(backend.complete(request).text);
            if (!labels) continue;
            std::set<std::string> seen;
            for (const auto& step : *labels) seen.insert(step.begin(), step.end());
            present[static_cast<std::size_t>(i)] = std::move(seen);
        } catch (const std::exception&) {
            // Counted as skipped below.
        }
    }

    StrategyAnalysis out;
    for (const auto& p : present) {
        if (!p) {
            ++out.skipped;
            continue;
        }
        ++out.analyzed;
        for (const auto& s : *p) ++out.counts[s];
    }
    for (const auto& [name, count] : out.counts) {
        out.fractions[name] = static_cast<double>(count) / static_cast<double>(out.analyzed);
    }
    return out;
}

std::vector<StrategyInput> correct_search_traces(std::span<const GenerationRecord> records) {
    std::vector<StrategyInput> out;
    for (const auto& rec : records) {
        const auto* outcome = rec.final_outcome();
        const auto* gen = rec.final_generator_output();
        if (!outcome || !outcome->is_correct || !gen) continue;
        out.push_back({gen->question, outcome->selected_trace});
    }
    return out;
}

std::string render_strategy_analysis(const StrategyAnalysis& analysis, ReportFormat format) {
    if (format == ReportFormat::Json) {
        nlohmann::json j = {{"analyzed", analysis.analyzed}, {"skipped", analysis.skipped}};
        nlohmann::json fractions = nlohmann::json::object();
        for (const auto& [name, f] : analysis.fractions) fractions[name] = pct(f);
        j["strategies"] = std::move(fractions);
        return j.dump(2) + "\n";
    }
    std::string out = fmt::format("trajectories analyzed {}  skipped {}\n", analysis.analyzed,
                                  analysis.skipped);
    std::vector<std::pair<std::string, double>> rows(analysis.fractions.begin(), analysis.fractions.end());
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [name, f] : rows) out += fmt::format("{:<28}{:>7}\n", name, pct(f));
    return out;
}

}  // namespace sage
