#include "support/fixtures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "sage/records_io.hpp"
#include "sage/retrieval.hpp"

namespace sage::testing {

std::vector<Document> toy_documents() {
    return {
        {"doc01", "Apollo 11", "Apollo 11 was the spaceflight that first landed humans on the Moon in July 1969."},
        {"doc02", "Neil Armstrong", "Neil Armstrong was the commander of Apollo 11 and the first person to walk on the Moon."},
        {"doc03", "Buzz Aldrin", "Buzz Aldrin was the lunar module pilot on Apollo 11. Aldrin walked on the Moon after Armstrong."},
        {"doc04", "Michael Collins", "Michael Collins flew the command module Columbia in lunar orbit during Apollo 11."},
        {"doc05", "Saturn V", "The Saturn V rocket launched every crewed Apollo mission to the Moon, including Apollo 11."},
        {"doc06", "Wapakoneta", "Wapakoneta is a city in Ohio. Neil Armstrong was born near Wapakoneta in 1930."},
        {"doc07", "Ohio", "Ohio is a state in the Midwestern United States. Its capital is Columbus."},
        {"doc08", "Columbus", "Columbus is the capital and most populous city of Ohio, founded in 1812."},
        {"doc09", "Eiffel Tower", "The Eiffel Tower is a wrought iron tower in Paris, completed in 1889 for the World's Fair."},
        {"doc10", "Gustave Eiffel", "Gustave Eiffel was a French engineer whose company built the Eiffel Tower in Paris."},
        {"doc11", "Paris", "Paris is the capital of France. Paris hosted the World's Fair of 1889 and of 1900."},
        {"doc12", "Statue of Liberty", "The Statue of Liberty was a gift from France; Gustave Eiffel designed its iron frame."},
        {"doc13", "Marie Curie", "Marie Curie won the Nobel Prize in Physics in 1903 and in Chemistry in 1911."},
        {"doc14", "Pierre Curie", "Pierre Curie shared the 1903 Nobel Prize in Physics with Marie Curie and Henri Becquerel."},
        {"doc15", "Nobel Prize", "The Nobel Prize is awarded in Stockholm. The first Nobel Prize was awarded in 1901."},
        {"doc16", "Stockholm", "Stockholm is the capital of Sweden. Stockholm hosts the Nobel Prize ceremony each December."},
        {"doc17", "Python", "Python is a programming language created by Guido van Rossum, first released in 1991."},
        {"doc18", "Guido van Rossum", "Guido van Rossum is a Dutch programmer, the creator of the Python programming language."},
        {"doc19", "Moon", "The Moon is Earth's only natural satellite. Twelve people walked on the Moon, the Moon, the Moon."},
        {"doc20", "Columbia", "Columbia was the Apollo 11 command module; it is displayed in Washington."},
    };
}

std::vector<std::string> toy_queries() {
    return {
        "first person to walk on the Moon",
        "Apollo 11 command module pilot",
        "where was Neil Armstrong born",
        "capital of Ohio",
        "who built the Eiffel Tower",
        "Paris World's Fair 1889",
        "Nobel Prize Physics 1903",
        "capital city hosting the Nobel ceremony",
        "creator of the Python programming language",
        "moon MOON satellite zebra",
    };
}

namespace {

// Deliberately simple and separate from the library tokenizer.
std::vector<std::string> oracle_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
        if (word) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32) : ch);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

std::vector<OracleHit> bm25_oracle(const std::vector<Document>& docs, const std::string& query,
                                   double k1, double b) {
    std::vector<std::vector<std::string>> toks;
    double total = 0;
    for (const auto& d : docs) {
        toks.push_back(oracle_tokens(d.text));
        total += static_cast<double>(toks.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total / n;

    auto q = oracle_tokens(query);
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());

    std::vector<OracleHit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0;
        bool any = false;
        for (const auto& term : q) {
            double df = 0;
            for (const auto& t : toks) df += std::count(t.begin(), t.end(), term) > 0 ? 1 : 0;
            const double f = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), term));
            if (f == 0) continue;
            any = true;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double dl = static_cast<double>(toks[i].size());
            score += idf * (f * (k1 + 1)) / (f + k1 * (1 - b + b * dl / avgdl));
        }
        if (any) hits.push_back({docs[i].id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& c) {
        return a.score != c.score ? a.score > c.score : a.id < c.id;
    });
    return hits;
}

OracleSelection selection_oracle(const std::vector<OracleSample>& samples, std::size_t target,
                                 std::size_t uniform_index) {
    std::vector<std::size_t> matching;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].correct) matching.push_back(k);
    }
    OracleSelection out;
    out.correct = !matching.empty();
    if (out.correct) {
        std::size_t best = matching.front();
        for (auto k : matching) {
            if (samples[k].steps < samples[best].steps) best = k;
        }
        out.index = best;
    } else {
        out.index = uniform_index;
    }
    out.steps = samples[out.index].steps;
    out.difficult = out.steps >= target;
    return out;
}

// ---- random generators ----------------------------------------------------

namespace {

const std::vector<std::string>& tag_names() {
    static const std::vector<std::string> names = {"think",  "search", "information", "answer",
                                                   "question", "answering steps", "reason",
                                                   "search steps"};
    return names;
}

std::string vary_case(std::mt19937_64& rng, const std::string& name) {
    switch (rng() % 4) {
        case 0: {
            std::string up = name;
            for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            return up;
        }
        case 1: {
            std::string cap = name;
            cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
            return cap;
        }
        default: return name;
    }
}

std::string random_words(std::mt19937_64& rng, std::size_t self, bool allow_stray) {
    static const std::vector<std::string> words = {
        "alpha", "beta",  "x < y", "3<4", "<b>bold</b>", "a>b", "\n",   "  ",  "<searchx>",
        "Doc 1 (Title: Moon)", "\xc3\xbcnic\xc3\xb6" "de", "</zzz>", "<", ">", "1969", "{braces}"};
    std::string out;
    for (auto n = rng() % 6; n > 0; --n) {
        if (allow_stray && rng() % 5 == 0) {
            // A closing tag of some other kind is text here.
            auto other = rng() % tag_names().size();
            if (other != self) out += "</" + vary_case(rng, tag_names()[other]) + ">";
            continue;
        }
        out += words[rng() % words.size()];
        if (rng() % 2) out += ' ';
    }
    return out;
}

}  // namespace

std::string random_transcript(std::mt19937_64& rng) {
    std::string out;
    for (auto steps = rng() % 12; steps > 0; --steps) {
        if (rng() % 3 == 0) out += random_words(rng, tag_names().size(), true);
        const auto kind = rng() % tag_names().size();
        const auto& name = tag_names()[kind];
        out += "<" + vary_case(rng, name) + ">";
        out += random_words(rng, kind, true);
        out += "</" + vary_case(rng, name) + ">";
    }
    if (rng() % 2) out += random_words(rng, tag_names().size(), true);
    return out;
}

std::size_t count_search_tags(const std::string& text) {
    std::string lower = text;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::size_t n = 0;
    for (auto pos = lower.find("<search>"); pos != std::string::npos; pos = lower.find("<search>", pos + 1)) ++n;
    return n;
}

VerificationOutcome make_outcome(const std::vector<int>& correct, const std::vector<std::size_t>& steps,
                                 std::size_t target) {
    VerificationOutcome v;
    v.target_steps = target;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < correct.size(); ++k) {
        SampleOutcome s;
        s.correct = correct[k] != 0;
        s.steps = steps[k];
        s.answer = s.correct ? "ref" : "other";
        s.trace = Trace{TraceRole::Searcher, {{StepKind::Answer, *s.answer, {}, {}}}};
        v.per_sample.push_back(s);
        if (s.correct && (!best || steps[k] < steps[*best])) best = k;
    }
    v.is_correct = best.has_value();
    v.selected_index = best.value_or(0);
    v.selected_steps = v.per_sample[v.selected_index].steps;
    v.selected_answer = *v.per_sample[v.selected_index].answer;
    v.selected_trace = v.per_sample[v.selected_index].trace;
    v.is_difficult = v.selected_steps >= target;
    return v;
}

GenerationRecord make_record(std::string id, std::size_t target, FinalStatus status,
                             const std::vector<int>& correct, std::size_t selected_steps) {
    std::vector<std::size_t> steps;
    bool first = true;
    for (int c : correct) {
        steps.push_back(c && first ? selected_steps : c ? selected_steps + 1 : selected_steps);
        if (c) first = false;
    }
    GenerationRecord rec;
    rec.seed_doc_id = std::move(id);
    rec.target_steps = target;
    rec.final_status = status;
    RoundRecord round;
    GeneratorOutput gen;
    gen.question = "question for " + rec.seed_doc_id;
    gen.answer = "ref";
    gen.trace = Trace{TraceRole::Generator, {}};
    round.generator_output = gen;
    round.verification = make_outcome(correct, steps, target);
    rec.rounds.push_back(round);
    if (round.verification->is_correct) rec.final_qa = QaPair{gen.question, gen.answer};
    return rec;
}

GenerationRecord random_record(std::mt19937_64& rng, const std::string& id, std::size_t k,
                               bool corrupt) {
    GenerationRecord rec;
    rec.seed_doc_id = id;
    rec.target_steps = 1 + rng() % 7;
    rec.mode = rng() % 2 ? GenerationMode::Feedback : GenerationMode::Resample;

    const auto n_rounds = 1 + rng() % 4;
    std::optional<VerificationOutcome> last;
    std::optional<QaPair> pair;
    for (std::size_t r = 0; r < n_rounds; ++r) {
        RoundRecord round;
        round.round_index = r;
        if (r > 0 && rec.mode == GenerationMode::Feedback) {
            round.feedback_mode = rng() % 2 ? FeedbackMode::Easy : FeedbackMode::Incorrect;
        }
        if (rng() % 5 == 0) {
            round.error = "generation_incomplete: no pair";
        } else {
            GeneratorOutput gen;
            gen.question = fmt::format("q-{}-{}", id, r);
            gen.answer = fmt::format("a-{}-{}", id, r);
            gen.trace = Trace{TraceRole::Generator, {}};
            std::vector<int> correct;
            std::vector<std::size_t> steps;
            for (std::size_t s = 0; s < k; ++s) {
                correct.push_back(rng() % 5 < 2 ? 1 : 0);
                steps.push_back(rng() % 9);
            }
            round.generator_output = gen;
            round.verification = make_outcome(correct, steps, rec.target_steps);
            last = round.verification;
            pair = QaPair{gen.question, gen.answer};
        }
        rec.rounds.push_back(std::move(round));
    }
    if (last && last->is_correct) {
        rec.final_status = last->is_difficult ? FinalStatus::Success : FinalStatus::CorrectOnly;
        rec.final_qa = pair;
    } else {
        rec.final_status = FinalStatus::Rejected;
        if (!last) rec.error = "no round reached verification";
    }

    if (corrupt && rng() % 3 == 0) {
        switch (rng() % 3) {
            case 0: rec.final_qa = QaPair{"stale question", "stale answer"}; break;
            case 1: rec.final_status = FinalStatus::Success; break;
            default:
                rec.final_qa = QaPair{"stale question", "stale answer"};
                rec.final_status = FinalStatus::Success;
                break;
        }
    }
    return rec;
}

std::vector<GenerationRecord> metrics_fixture_records() {
    using S = FinalStatus;
    return {
        make_record("r01", 3, S::Success, {1, 1, 0, 1}, 3),
        make_record("r02", 3, S::CorrectOnly, {1, 0, 0, 0}, 1),
        make_record("r03", 3, S::Rejected, {0, 0, 0, 0}, 2),
        make_record("r04", 3, S::Success, {1, 1, 1, 1}, 4),
        make_record("r05", 5, S::Success, {1, 0, 0, 0}, 5),
        make_record("r06", 5, S::CorrectOnly, {1, 1, 0, 0}, 2),
        make_record("r07", 5, S::CorrectOnly, {1, 1, 1, 0}, 3),
        make_record("r08", 5, S::Rejected, {0, 0, 0, 0}, 6),
        make_record("r09", 7, S::Rejected, {0, 0, 0, 0}, 1),
        make_record("r10", 7, S::CorrectOnly, {0, 1, 0, 0}, 4),
        make_record("r11", 7, S::Success, {0, 0, 1, 1}, 7),
        make_record("r12", 7, S::Rejected, {0, 0, 0, 0}, 0),
    };
}

std::vector<std::string> exportable_ids(const std::vector<GenerationRecord>& records,
                                        std::size_t min_steps) {
    std::vector<std::string> ids;
    for (const auto& rec : records) {
        const RoundRecord* last = nullptr;
        for (const auto& round : rec.rounds) {
            if (round.verification) last = &round;
        }
        if (!last) continue;
        std::optional<std::size_t> best;
        for (const auto& s : last->verification->per_sample) {
            if (s.correct && !s.error && (!best || s.steps < *best)) best = s.steps;
        }
        if (best && *best >= min_steps) ids.push_back(rec.seed_doc_id);
    }
    return ids;
}

// ---- scripted agents ------------------------------------------------------

ScriptBuilder& ScriptBuilder::add(std::string role, std::size_t turn, std::string text) {
    entries.push_back({std::move(role), turn, std::move(text), false});
    return *this;
}

ScriptBuilder& ScriptBuilder::generator(const std::string& scope, const std::string& question,
                                        const std::string& answer, std::size_t searches) {
    const auto role = scope + "/generator";
    for (std::size_t i = 0; i < searches; ++i) {
        add(role, i, fmt::format("<think>I need fact {}.</think>\n<search>apollo moon {}</search>", i, i));
    }
    add(role, searches,
        fmt::format("<think>Ready.</think>\n<question>{}</question>\n<answer>{}</answer>\n"
                    "<answering steps>Step 1: look it up.</answering steps>",
                    question, answer));
    return *this;
}

ScriptBuilder& ScriptBuilder::revision(const std::string& scope, const std::string& question,
                                       const std::string& answer) {
    return add(scope + "/generator", 0,
               fmt::format("<think>Revising.</think>\n<question>{}</question>\n<answer>{}</answer>",
                           question, answer));
}

ScriptBuilder& ScriptBuilder::searcher(const std::string& scope, std::size_t k, std::size_t steps,
                                       const std::string& answer) {
    const auto role = fmt::format("{}/searcher{}", scope, k);
    for (std::size_t i = 0; i < steps; ++i) {
        add(role, i, fmt::format("<think>Step {}.</think>\n<search>capital of ohio {}</search>", i, i));
    }
    add(role, steps, fmt::format("<think>Done.</think>\n<answer>{}</answer>", answer));
    return *this;
}

// ---- orchestrator scenarios -----------------------------------------------

Document scenario_document() {
    return {"d1", "Apollo 11", "Apollo 11 landed on the Moon in 1969; Neil Armstrong stepped out first."};
}

namespace {

std::string scope(std::size_t r) { return fmt::format("d1/r{}", r); }

GenerationConfig base_config() {
    GenerationConfig c;
    c.target_steps = 3;
    c.samples_per_verification = 2;
    c.max_feedback_rounds = 3;
    c.rng_seed = 7;
    c.parallel_samples = false;
    return c;
}

template <typename... Checks>
std::function<std::string(const GenerationRecord&)> all_of(Checks... checks) {
    return [=](const GenerationRecord& rec) {
        std::string failure;
        ((failure.empty() ? (failure = checks(rec), 0) : 0), ...);
        return failure;
    };
}

std::string expect(bool ok, const std::string& what) { return ok ? "" : what; }

}  // namespace

std::vector<Scenario> orchestrator_scenarios() {
    std::vector<Scenario> out;

    {
        Scenario s{"immediate success", base_config(), {}, 1, {std::nullopt}, FinalStatus::Success,
                   QaPair{"Q0", "A0"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 3, "A0").searcher(scope(0), 1, 4, "A0");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& v = *r.rounds[0].verification;
            return expect(v.selected_index == 0 && v.selected_steps == 3 && v.is_difficult,
                          "expected sample 0 with 3 steps, difficult");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"easy then feedback success", base_config(), {}, 2,
                   {std::nullopt, FeedbackMode::Easy}, FinalStatus::Success, QaPair{"Q1", "A1"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 1, "A0").searcher(scope(0), 1, 2, "A0");
        b.revision(scope(1), "Q1", "A1").searcher(scope(1), 0, 3, "A1").searcher(scope(1), 1, 5, "wrong");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& v0 = *r.rounds[0].verification;
            const auto& v1 = *r.rounds[1].verification;
            return expect(v0.is_correct && !v0.is_difficult && v0.selected_steps == 1 &&
                              v1.selected_steps == 3 && v1.correct_count() == 1,
                          "round outcomes differ from trace");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"incorrect then feedback success", base_config(), {}, 2,
                   {std::nullopt, FeedbackMode::Incorrect}, FinalStatus::Success, QaPair{"Q1", "A1"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 2, "no").searcher(scope(0), 1, 3, "nope");
        // Second sample matches after normalization and is shorter.
        b.revision(scope(1), "Q1", "A1").searcher(scope(1), 0, 4, "A1").searcher(scope(1), 1, 3, "a1.");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& v1 = *r.rounds[1].verification;
            return expect(v1.selected_index == 1 && v1.selected_steps == 3, "expected sample 1 (3 steps)");
        };
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.max_feedback_rounds = 2;
        Scenario s{"rounds exhausted while easy", cfg, {}, 3,
                   {std::nullopt, FeedbackMode::Easy, FeedbackMode::Easy}, FinalStatus::CorrectOnly,
                   QaPair{"Q2", "A2"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 1, "A0").searcher(scope(0), 1, 1, "A0");
        b.revision(scope(1), "Q1", "A1").searcher(scope(1), 0, 2, "A1").searcher(scope(1), 1, 1, "x");
        b.revision(scope(2), "Q2", "A2").searcher(scope(2), 0, 2, "A2").searcher(scope(2), 1, 2, "A2");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            return expect(r.accumulated_gen_traces.size() == 3 && r.accumulated_search_traces.size() == 3,
                          "expected three accumulated traces of each kind");
        };
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.max_feedback_rounds = 2;
        Scenario s{"rounds exhausted while incorrect", cfg, {}, 3,
                   {std::nullopt, FeedbackMode::Incorrect, FeedbackMode::Incorrect},
                   FinalStatus::Rejected, std::nullopt, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 1, "x").searcher(scope(0), 1, 1, "y");
        b.revision(scope(1), "Q1", "A1").searcher(scope(1), 0, 2, "x").searcher(scope(1), 1, 3, "y");
        b.revision(scope(2), "Q2", "A2").searcher(scope(2), 0, 4, "x").searcher(scope(2), 1, 4, "y");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            return expect(!r.error && r.final_outcome() && !r.final_outcome()->is_correct,
                          "expected a verified, incorrect final outcome and no record error");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"incorrect then easy then success", base_config(), {}, 3,
                   {std::nullopt, FeedbackMode::Incorrect, FeedbackMode::Easy}, FinalStatus::Success,
                   QaPair{"Q2", "A2"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 1, "x").searcher(scope(0), 1, 1, "y");
        b.revision(scope(1), "Q1", "A1").searcher(scope(1), 0, 1, "A1").searcher(scope(1), 1, 2, "A1");
        b.revision(scope(2), "Q2", "A2").searcher(scope(2), 0, 6, "A2").searcher(scope(2), 1, 3, "A2");
        s.script = b.entries;
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.mode = GenerationMode::Resample;
        Scenario s{"resample mode", cfg, {}, 2, {std::nullopt, std::nullopt}, FinalStatus::Success,
                   QaPair{"Q1", "A1"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 1, "x").searcher(scope(0), 1, 1, "y");
        b.generator(scope(1), "Q1", "A1", 2).searcher(scope(1), 0, 3, "A1").searcher(scope(1), 1, 3, "A1");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& g = *r.rounds[1].generator_output;
            return expect(!g.mode && count_search_steps(g.trace) == 2 && r.mode == GenerationMode::Resample,
                          "round 1 should be a fresh two-search generation");
        };
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.target_steps = 2;
        cfg.limits.max_search_steps = 2;
        Scenario s{"forced finalization", cfg, {}, 1, {std::nullopt}, FinalStatus::Success,
                   QaPair{"Q0", "A0"}, {}};
        ScriptBuilder b;
        const auto gen = scope(0) + "/generator";
        b.add(gen, 0, "<think>First hop.</think>\n<search>apollo</search>");
        b.add(gen, 1, "<think>Second hop.</think>\n<search>armstrong</search>");
        b.add(gen, 2, "</think>\n<question>Q0</question>\n<answer>A0</answer>");
        const auto s0 = scope(0) + "/searcher0";
        b.add(s0, 0, "<search>apollo</search>").add(s0, 1, "<search>moon</search>");
        b.add(s0, 2, "<answer>A0</answer>");
        // The forced final call tries to search again; the search is dropped.
        const auto s1 = scope(0) + "/searcher1";
        b.add(s1, 0, "<search>ohio</search>").add(s1, 1, "<search>columbus</search>");
        b.add(s1, 2, "<think>One more lookup.</think>\n<search>extra</search>");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& g = *r.rounds[0].generator_output;
            const auto& v = *r.rounds[0].verification;
            const bool gen_ok = g.forced_finalization &&
                                serialize_trace(g.trace).find(kGeneratorForcedFinalization) != std::string::npos;
            const bool s0_ok = serialize_trace(v.per_sample[0].trace).find(kSearcherForcedFinalization) !=
                               std::string::npos;
            const bool s1_ok = !v.per_sample[1].answer && v.per_sample[1].steps == 2;
            return expect(gen_ok && s0_ok && s1_ok && v.selected_steps == 2, "forced finalization not applied");
        };
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.max_calls_per_datum = 3;
        Scenario s{"budget exhausted during verification", cfg, {}, 1, {std::nullopt},
                   FinalStatus::CorrectOnly, QaPair{"Q0", "A0"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0", 0).searcher(scope(0), 0, 1, "A0").searcher(scope(0), 1, 3, "A0");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& v = *r.rounds[0].verification;
            return expect(r.rounds[0].error.has_value() && v.per_sample[1].error.has_value() &&
                              !v.per_sample[1].correct && r.backend_calls == 4,
                          "expected the second sample to hit the call budget");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"errored sample", base_config(), {}, 1, {std::nullopt}, FinalStatus::Success,
                   QaPair{"Q0", "A0"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 3, "A0");
        s.script = b.entries;  // searcher1 has no script and fails
        s.extra = [](const GenerationRecord& r) {
            const auto& v = *r.rounds[0].verification;
            return expect(v.per_sample[1].error && !v.per_sample[1].correct && !v.per_sample[1].answer &&
                              v.selected_index == 0,
                          "expected sample 1 to be recorded as failed");
        };
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.max_feedback_rounds = 0;
        Scenario s{"all samples fail with no rounds left", cfg, {}, 1, {std::nullopt},
                   FinalStatus::Rejected, std::nullopt, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& v = *r.rounds[0].verification;
            return expect(v.per_sample[0].error && v.per_sample[1].error && !v.is_correct,
                          "expected every sample to fail");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"initial generation incomplete", base_config(), {}, 1, {std::nullopt},
                   FinalStatus::Rejected, std::nullopt, {}};
        ScriptBuilder b;
        const auto gen = scope(0) + "/generator";
        b.add(gen, 0, "<think>Hmm.</think>").add(gen, 1, "<think>Still thinking.</think>");
        b.add(gen, 2, "<think>No idea.</think>");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            return expect(r.error.has_value() && r.rounds[0].error.has_value() && !r.final_outcome(),
                          "expected a record error and no verification");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"failed revision keeps the previous pair", base_config(), {}, 3,
                   {std::nullopt, FeedbackMode::Easy, FeedbackMode::Easy}, FinalStatus::Success,
                   QaPair{"Q2", "A2"}, {}};
        ScriptBuilder b;
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 1, "A0").searcher(scope(0), 1, 1, "A0");
        b.add(scope(1) + "/generator", 0, "<think>I cannot improve this.</think>");
        b.revision(scope(2), "Q2", "A2").searcher(scope(2), 0, 3, "A2").searcher(scope(2), 1, 4, "A2");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            return expect(r.rounds[1].error && !r.rounds[1].verification && !r.rounds[1].generator_output,
                          "round 1 should fail without verification");
        };
        out.push_back(std::move(s));
    }
    {
        auto cfg = base_config();
        cfg.mode = GenerationMode::Resample;
        Scenario s{"resample after failed generation", cfg, {}, 2, {std::nullopt, std::nullopt},
                   FinalStatus::Success, QaPair{"Q1", "A1"}, {}};
        ScriptBuilder b;
        const auto gen = scope(0) + "/generator";
        b.add(gen, 0, "<think>a</think>").add(gen, 1, "<think>b</think>").add(gen, 2, "<think>c</think>");
        b.generator(scope(1), "Q1", "A1").searcher(scope(1), 0, 3, "A1").searcher(scope(1), 1, 3, "A1");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            return expect(r.rounds[0].error && !r.error, "round 0 error should not become a record error");
        };
        out.push_back(std::move(s));
    }
    {
        Scenario s{"incorrect feedback takes precedence over easy", base_config(), {}, 2,
                   {std::nullopt, FeedbackMode::Incorrect}, FinalStatus::Success, QaPair{"Q1", "A1"}, {}};
        ScriptBuilder b;
        // Both samples search a lot but answer wrongly: difficult, not correct.
        b.generator(scope(0), "Q0", "A0").searcher(scope(0), 0, 5, "x").searcher(scope(0), 1, 5, "y");
        b.revision(scope(1), "Q1", "A1").searcher(scope(1), 0, 3, "A1").searcher(scope(1), 1, 3, "A1");
        s.script = b.entries;
        s.extra = [](const GenerationRecord& r) {
            const auto& v0 = *r.rounds[0].verification;
            return expect(!v0.is_correct && v0.is_difficult, "round 0 should be difficult but incorrect");
        };
        out.push_back(std::move(s));
    }
    return out;
}

std::string run_scenario(const Scenario& scenario, GenerationRecord* out) {
    ScriptedBackend backend(scenario.script);
    auto corpus = std::make_shared<const Corpus>(Corpus::from_documents(toy_documents()));
    auto index = std::make_shared<const Index>(Index::build(corpus));
    LocalRetriever retriever(index, scenario.config.retrieval);
    ExactMatchJudge judge;
    const auto prompts = PromptLibrary::defaults();

    const auto record = generate_datum(scenario_document(), scenario.config,
                                       {backend, retriever, judge, prompts});
    if (out) *out = record;

    if (record.rounds.size() != scenario.rounds) {
        return fmt::format("rounds: got {}, want {}", record.rounds.size(), scenario.rounds);
    }
    for (std::size_t r = 0; r < record.rounds.size(); ++r) {
        const auto& got = record.rounds[r].feedback_mode;
        const auto& want = scenario.modes.at(r);
        if (got != want) {
            return fmt::format("round {} feedback mode: got {}, want {}", r,
                               got ? to_string(*got) : "none", want ? to_string(*want) : "none");
        }
    }
    if (record.final_status != scenario.status) {
        return fmt::format("status: got {}, want {}", to_string(record.final_status),
                           to_string(scenario.status));
    }
    if (record.final_qa != scenario.final_qa) {
        return fmt::format("final pair: got {}, want {}",
                           record.final_qa ? record.final_qa->question : "none",
                           scenario.final_qa ? scenario.final_qa->question : "none");
    }
    if (scenario.extra) return scenario.extra(record);
    return "";
}

// ---- batch fixture --------------------------------------------------------

BatchFixture batch_fixture(std::size_t parallelism) {
    auto docs = toy_documents();
    docs.resize(16);
    BatchFixture f;
    f.corpus = std::make_shared<const Corpus>(Corpus::from_documents(docs));

    GenerationConfig cfg;
    cfg.target_steps = 3;
    cfg.samples_per_verification = 3;
    cfg.max_feedback_rounds = 2;
    cfg.parallel_samples = true;
    f.options.configs = {cfg};
    f.options.parallelism = parallelism;
    f.options.seed = 11;

    ScriptBuilder b;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto& id = docs[i].id;
        auto sc = [&](std::size_t r) { return fmt::format("{}/r{}", id, r); };
        const auto q = [&](std::size_t r) { return fmt::format("Q-{}-{}", id, r); };
        const auto a = [&](std::size_t r) { return fmt::format("A-{}-{}", id, r); };
        switch (i % 4) {
            case 0:
                b.generator(sc(0), q(0), a(0));
                b.searcher(sc(0), 0, 3, a(0)).searcher(sc(0), 1, 4, a(0)).searcher(sc(0), 2, 5, a(0));
                break;
            case 1:
                b.generator(sc(0), q(0), a(0));
                b.searcher(sc(0), 0, 1, a(0)).searcher(sc(0), 1, 2, a(0)).searcher(sc(0), 2, 1, a(0));
                b.revision(sc(1), q(1), a(1));
                b.searcher(sc(1), 0, 3, a(1)).searcher(sc(1), 1, 3, a(1)).searcher(sc(1), 2, 6, a(1));
                break;
            case 2:
                b.generator(sc(0), q(0), a(0));
                for (std::size_t r = 0; r <= 2; ++r) {
                    if (r > 0) b.revision(sc(r), q(r), a(r));
                    b.searcher(sc(r), 0, 2, "x").searcher(sc(r), 1, 3, "y").searcher(sc(r), 2, 4, "z");
                }
                break;
            default:
                b.generator(sc(0), q(0), a(0));
                b.searcher(sc(0), 0, 3, a(0)).searcher(sc(0), 2, 1, "wrong");
                break;
        }
    }
    f.script = std::move(b.entries);
    return f;
}

std::vector<std::string> run_batch_fixture(const BatchFixture& fixture) {
    ScriptedBackend backend(fixture.script);
    auto index = std::make_shared<const Index>(Index::build(fixture.corpus));
    LocalRetriever retriever(index, fixture.options.configs.front().retrieval);
    ExactMatchJudge judge;
    const auto prompts = PromptLibrary::defaults();

    std::vector<std::string> lines;
    run_batch(*fixture.corpus, fixture.options, {backend, retriever, judge, prompts},
              [&](const GenerationRecord& r) { lines.push_back(record_to_json(r).dump()); });
    std::sort(lines.begin(), lines.end());
    return lines;
}

}  // namespace sage::testing
