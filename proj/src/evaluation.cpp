#include "narrative/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "narrative/community.hpp"
#include "narrative/csv.hpp"
#include "narrative/error.hpp"
#include "narrative/parallel.hpp"
#include "narrative/templates.hpp"
#include "narrative/text.hpp"
#include "narrative/trace.hpp"

namespace narrative::eval {

using json = nlohmann::json;

std::string category_name(Category c) {
    switch (c) {
        case Category::GroundTruth: return "ground_truth";
        case Category::Theme: return "theme";
        case Category::Opinion: return "opinion";
    }
    return "?";
}

Category parse_category(std::string_view s) {
    auto v = text::to_lower(text::trim(s));
    if (v == "ground_truth") return Category::GroundTruth;
    if (v == "theme") return Category::Theme;
    if (v == "opinion") return Category::Opinion;
    throw ParseError("unknown question category '" + std::string(s) + "'");
}

QuestionCorpus QuestionCorpus::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("question corpus not found: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    std::vector<json> records;
    auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '[') {
        json j = json::parse(content, nullptr, false);
        if (j.is_discarded()) throw ParseError(path.string() + ": not valid JSON");
        for (auto& r : j) records.push_back(r);
    } else {
        std::istringstream lines(content);
        std::string line;
        std::size_t n = 0;
        while (std::getline(lines, line)) {
            ++n;
            if (text::trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) throw ParseError(fmt::format("{}:{}: not valid JSON", path.string(), n));
            records.push_back(std::move(j));
        }
    }

    QuestionCorpus c;
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (!r.is_object() || !r.contains("id") || !r.contains("text"))
            throw ParseError(path.string() + ": each question needs id and text");
        Question q{r["id"].get<std::string>(), r["text"].get<std::string>(),
                   parse_category(r.value("category", "ground_truth"))};
        if (!ids.insert(q.id).second) throw ParseError(path.string() + ": duplicate question id '" + q.id + "'");
        c.questions.push_back(std::move(q));
    }
    return c;
}

const Question* QuestionCorpus::find(std::string_view id) const {
    for (const auto& q : questions)
        if (q.id == id) return &q;
    return nullptr;
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::Comprehensiveness: return "comprehensiveness";
        case Metric::Empowerment: return "empowerment";
        case Metric::Diversity: return "diversity";
        case Metric::Directness: return "directness";
    }
    return "?";
}

Metric parse_metric(std::string_view s) {
    auto v = text::to_lower(text::trim(s));
    for (auto m : kMetrics)
        if (metric_name(m) == v) return m;
    throw ValidationError("unknown metric '" + std::string(s) + "'");
}

std::string metric_definition(Metric m) {
    switch (m) {
        case Metric::Comprehensiveness:
            return "How much detail the answer gives, and whether it covers every part of the question.";
        case Metric::Empowerment:
            return "How well the answer helps the reader understand the topic and reach an informed judgement of their own.";
        case Metric::Diversity:
            return "How many different perspectives, ideas and examples the answer brings in.";
        case Metric::Directness:
            return "How clearly and specifically the answer addresses the question, without vagueness.";
    }
    return "";
}

// ---- Corpus run --------------------------------------------------------------

void to_json(json& j, const AnswerCell& c) {
    j = json{{"question_id", c.question_id},
             {"mode", retrieval::query_mode_name(c.mode)},
             {"answer", c.answer ? json(*c.answer) : json(nullptr)},
             {"error", c.error},
             {"fingerprints", c.fingerprints}};
}

void from_json(const json& j, AnswerCell& c) {
    c.question_id = j.at("question_id").get<std::string>();
    c.mode = retrieval::parse_query_mode(j.at("mode").get<std::string>());
    c.answer.reset();
    if (j.contains("answer") && !j["answer"].is_null()) c.answer = j["answer"].get<retrieval::Answer>();
    c.error = j.value("error", "");
    c.fingerprints = j.value("fingerprints", std::vector<std::string>{});
}

std::vector<AnswerCell> run_corpus(const QuestionCorpus& corpus, const std::vector<QueryMode>& modes,
                                   const Answerer& answer, int workers) {
    std::vector<AnswerCell> cells;
    for (const auto& q : corpus.questions)
        for (auto m : modes) {
            AnswerCell c;
            c.question_id = q.id;
            c.mode = m;
            cells.push_back(std::move(c));
        }
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        auto& cell = cells[i];
        CallTrace trace;
        const auto* q = corpus.find(cell.question_id);
        TraceScope scope(&trace);
        try {
            cell.answer = answer(cell.mode, q->text);
        } catch (const std::exception& e) {
            cell.error = e.what();
            spdlog::warn("question {} / {} failed: {}", cell.question_id, retrieval::query_mode_name(cell.mode),
                         e.what());
        }
        cell.fingerprints = trace.fingerprints();
    });
    return cells;
}

// ---- Judging -----------------------------------------------------------------

void to_json(json& j, const JudgeVerdict& v) {
    std::vector<std::string> presented;
    for (auto m : v.presented) presented.push_back(retrieval::query_mode_name(m));
    j = json{{"question_id", v.question_id},
             {"metric", metric_name(v.metric)},
             {"winner", retrieval::query_mode_name(v.winner)},
             {"rationale", v.rationale},
             {"presented", presented}};
}

void from_json(const json& j, JudgeVerdict& v) {
    v.question_id = j.at("question_id").get<std::string>();
    v.metric = parse_metric(j.at("metric").get<std::string>());
    v.winner = retrieval::parse_query_mode(j.at("winner").get<std::string>());
    v.rationale = j.value("rationale", "");
    v.presented.clear();
    for (const auto& m : j.value("presented", std::vector<std::string>{}))
        v.presented.push_back(retrieval::parse_query_mode(m));
}

std::optional<char> parse_winner(std::string_view reply, std::string_view letters) {
    const std::string s(reply);
    auto valid = [&](char c) -> std::optional<char> {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (letters.find(c) != std::string_view::npos) return c;
        return std::nullopt;
    };
    static const std::regex winner_re(R"(winner\W{0,4}(?:answer\s*)?\(?([A-Za-z])\b)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(s, m, winner_re))
        if (auto c = valid(m.str(1)[0])) return c;
    // No "Winner:" line: accept a reply that names exactly one answer.
    static const std::regex answer_re(R"(\b[Aa]nswer\s+([A-Z])\b)");
    std::set<char> named;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), answer_re); it != std::sregex_iterator(); ++it)
        if (auto c = valid(it->str(1)[0])) named.insert(*c);
    if (named.size() == 1) return *named.begin();
    return std::nullopt;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string rationale_of(const std::string& reply) {
    static const std::regex reason_re(R"(reason\s*:\s*)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(reply, m, reason_re)) return text::trim(m.suffix().str());
    return text::trim(reply);
}

}  // namespace

JudgeVerdict judge(const Question& question, const std::vector<retrieval::Answer>& answers, Metric metric,
                   llm::Gateway& gateway, std::uint64_t seed) {
    if (answers.size() < 2) throw ValidationError("judging needs at least two answers");
    if (answers.size() > 26) throw ValidationError("too many answers to label");
    std::set<QueryMode> seen;
    for (const auto& a : answers)
        if (!seen.insert(a.mode).second) throw ValidationError("each mode may appear once per judgement");

    std::vector<std::size_t> order(answers.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    community::Rng rng(seed ^ fnv1a(question.id + "|" + metric_name(metric)));
    rng.shuffle(order);

    std::string letters, block;
    JudgeVerdict v;
    v.question_id = question.id;
    v.metric = metric;
    for (std::size_t i = 0; i < order.size(); ++i) {
        char letter = static_cast<char>('A' + i);
        letters += letter;
        if (!block.empty()) block += "\n\n";
        block += fmt::format("Answer {}:\n{}", letter, answers[order[i]].text);
        v.presented.push_back(answers[order[i]].mode);
    }

    const std::string ctx = fmt::format("judge {} / {}", question.id, metric_name(metric));
    std::string reply = with_context(ctx, [&] {
        return gateway.complete(llm::tmpl::kJudge, {{"metric", metric_name(metric)},
                                                    {"definition", metric_definition(metric)},
                                                    {"question", question.text},
                                                    {"answers", block}});
    });
    auto letter = parse_winner(reply, letters);
    if (!letter) {
        std::string label_list;
        for (std::size_t i = 0; i < letters.size(); ++i)
            label_list += (i ? (i + 1 == letters.size() ? " or " : ", ") : "") + std::string(1, letters[i]);
        reply = with_context(ctx, [&] {
            return gateway.complete(llm::tmpl::kJudgeReprompt, {{"labels", label_list}, {"previous", reply}});
        });
        letter = parse_winner(reply, letters);
        if (!letter) throw StructuredOutputError(ctx + ": judge reply names no answer", reply);
    }
    v.winner = v.presented[static_cast<std::size_t>(*letter - 'A')];
    v.rationale = rationale_of(reply);
    return v;
}

JudgeRun judge_corpus(const QuestionCorpus& corpus, const std::vector<AnswerCell>& cells,
                      const std::vector<Metric>& metrics, llm::Gateway& gateway, std::uint64_t seed, int workers) {
    JudgeRun run;
    struct Job {
        const Question* q;
        Metric metric;
        std::vector<retrieval::Answer> answers;
    };
    std::vector<Job> jobs;
    for (const auto& q : corpus.questions) {
        std::vector<retrieval::Answer> answers;
        std::string failure;
        for (const auto& c : cells) {
            if (c.question_id != q.id) continue;
            if (c.ok()) answers.push_back(*c.answer);
            else failure = fmt::format("{} cell failed: {}", retrieval::query_mode_name(c.mode), c.error);
        }
        for (auto m : metrics) {
            if (!failure.empty()) run.excluded.emplace_back(q.id + "/" + metric_name(m), failure);
            else if (answers.size() < 2) run.excluded.emplace_back(q.id + "/" + metric_name(m), "fewer than two answers");
            else jobs.push_back({&q, m, answers});
        }
    }
    std::vector<std::optional<JudgeVerdict>> out(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        try {
            out[i] = judge(*jobs[i].q, jobs[i].answers, jobs[i].metric, gateway, seed);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (out[i]) run.verdicts.push_back(std::move(*out[i]));
        else {
            spdlog::warn("judging {} / {} failed: {}", jobs[i].q->id, metric_name(jobs[i].metric), errors[i]);
            run.excluded.emplace_back(jobs[i].q->id + "/" + metric_name(jobs[i].metric), errors[i]);
        }
    }
    return run;
}

int WinTable::total(QueryMode m) const {
    auto it = wins.find(m);
    if (it == wins.end()) return 0;
    int t = 0;
    for (int x : it->second) t += x;
    return t;
}

int WinTable::column(Metric m) const {
    int t = 0;
    for (const auto& [_, row] : wins) t += row[static_cast<int>(m)];
    return t;
}

int WinTable::verdicts() const {
    int t = 0;
    for (auto m : modes) t += total(m);
    return t;
}

WinTable tally(const std::vector<JudgeVerdict>& verdicts, const std::vector<QueryMode>& modes) {
    WinTable t;
    t.modes = modes;
    for (auto m : modes) t.wins[m] = {};
    for (const auto& v : verdicts) {
        auto it = t.wins.find(v.winner);
        if (it == t.wins.end())
            throw ValidationError(fmt::format("verdict for {} names mode {} outside the table", v.question_id,
                                              retrieval::query_mode_name(v.winner)));
        ++it->second[static_cast<int>(v.metric)];
    }
    return t;
}

void write_win_table_csv(std::ostream& out, const WinTable& t) {
    csv::Row header{"mode"};
    for (auto m : kMetrics) header.push_back(metric_name(m));
    header.push_back("total");
    csv::write_row(out, header);
    for (auto mode : t.modes) {
        csv::Row r{retrieval::query_mode_name(mode)};
        for (int x : t.wins.at(mode)) r.push_back(std::to_string(x));
        r.push_back(std::to_string(t.total(mode)));
        csv::write_row(out, r);
    }
}

std::string render_win_table(const WinTable& t) {
    std::string s = fmt::format("{:<12}{:>6}{:>6}{:>6}{:>6}{:>7}\n", "mode", "Com", "Emp", "Div", "Dir", "Total");
    for (auto mode : t.modes) {
        const auto& w = t.wins.at(mode);
        s += fmt::format("{:<12}{:>6}{:>6}{:>6}{:>6}{:>7}\n", retrieval::query_mode_name(mode), w[0], w[1], w[2], w[3],
                         t.total(mode));
    }
    return s;
}

// ---- Adversarial suite ---------------------------------------------------------

std::string trap_kind_name(TrapKind k) {
    switch (k) {
        case TrapKind::FabricatedEvidence: return "fabricated_evidence";
        case TrapKind::FalsePresupposition: return "false_presupposition";
        case TrapKind::SuggestiveDetail: return "suggestive_detail";
    }
    return "?";
}

TrapKind parse_trap_kind(std::string_view s) {
    auto v = text::to_lower(text::trim(s));
    for (auto k : {TrapKind::FabricatedEvidence, TrapKind::FalsePresupposition, TrapKind::SuggestiveDetail})
        if (trap_kind_name(k) == v) return k;
    throw ParseError("unknown trap kind '" + std::string(s) + "'");
}

std::string outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Pending: return "pending";
        case Outcome::Resisted: return "resisted";
        case Outcome::AcceptedFalsePremise: return "accepted_false_premise";
        case Outcome::Hedged: return "hedged";
    }
    return "?";
}

Outcome parse_outcome(std::string_view s) {
    auto v = text::to_lower(text::trim(s));
    if (v.empty()) return Outcome::Pending;
    for (auto o : {Outcome::Pending, Outcome::Resisted, Outcome::AcceptedFalsePremise, Outcome::Hedged})
        if (outcome_name(o) == v) return o;
    throw ParseError("unknown outcome '" + std::string(s) + "' (resisted, accepted_false_premise, hedged or blank)");
}

std::vector<AdversarialCase> load_adversarial_cases(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("adversarial cases not found: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ParseError(path.string() + ": expected a JSON array of cases");
    std::vector<AdversarialCase> out;
    std::set<std::string> ids;
    for (const auto& r : j) {
        AdversarialCase c{r.at("id").get<std::string>(), r.at("prompt").get<std::string>(),
                          parse_trap_kind(r.at("trap_kind").get<std::string>()), r.value("ground_truth_note", "")};
        if (!ids.insert(c.id).second) throw ParseError(path.string() + ": duplicate case id '" + c.id + "'");
        out.push_back(std::move(c));
    }
    return out;
}

void to_json(json& j, const AdversarialCell& c) {
    j = json{{"case_id", c.case_id},
             {"mode", retrieval::query_mode_name(c.mode)},
             {"answer", c.answer ? json(*c.answer) : json(nullptr)},
             {"error", c.error},
             {"outcome", outcome_name(c.outcome)}};
}

std::vector<AdversarialCell> run_adversarial(const std::vector<AdversarialCase>& cases,
                                             const std::vector<QueryMode>& modes, const Answerer& answer,
                                             int workers) {
    std::vector<AdversarialCell> cells;
    std::vector<const AdversarialCase*> source;
    for (const auto& c : cases)
        for (auto m : modes) {
            AdversarialCell cell;
            cell.case_id = c.id;
            cell.mode = m;
            cells.push_back(std::move(cell));
            source.push_back(&c);
        }
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        try {
            cells[i].answer = answer(cells[i].mode, source[i]->prompt);
        } catch (const std::exception& e) {
            cells[i].error = e.what();
            spdlog::warn("case {} / {} failed: {}", cells[i].case_id, retrieval::query_mode_name(cells[i].mode),
                         e.what());
        }
    });
    return cells;
}

Grades load_grades(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw NotFoundError("grading file not found: " + path.string());
    auto records = csv::read_file(path.string());
    if (records.empty()) return {};
    const auto& header = records.front().fields;
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto ci = col("case_id"), mi = col("mode"), oi = col("outcome");
    Grades g;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& f = records[r].fields;
        if (f.size() <= std::max({ci, mi, oi}))
            throw ParseError(fmt::format("{}:{}: too few fields", path.string(), records[r].line));
        try {
            g[{f[ci], retrieval::parse_query_mode(f[mi])}] = parse_outcome(f[oi]);
        } catch (const Error& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), records[r].line, e.what()));
        }
    }
    return g;
}

void write_grading_sheet(std::ostream& out, const std::vector<AdversarialCell>& cells) {
    csv::write_row(out, {"case_id", "mode", "outcome", "declined", "answer"});
    for (const auto& c : cells)
        csv::write_row(out, {c.case_id, retrieval::query_mode_name(c.mode), "",
                             c.answer ? (c.answer->declined ? "yes" : "no") : "",
                             c.answer ? c.answer->text : "ERROR: " + c.error});
}

void apply_grades(std::vector<AdversarialCell>& cells, const Grades& grades) {
    for (auto& c : cells) {
        auto it = grades.find({c.case_id, c.mode});
        c.outcome = it == grades.end() ? Outcome::Pending : it->second;
    }
}

AdversarialSummary summarize(const std::vector<AdversarialCell>& cells) {
    AdversarialSummary s;
    for (const auto& c : cells) {
        if (std::find(s.modes.begin(), s.modes.end(), c.mode) == s.modes.end()) s.modes.push_back(c.mode);
        ++s.counts[c.mode][c.outcome];
    }
    return s;
}

std::string render_adversarial(const AdversarialSummary& s) {
    std::string out = fmt::format("{:<12}{:>10}{:>10}{:>8}{:>9}\n", "mode", "resisted", "accepted", "hedged", "pending");
    for (auto m : s.modes) {
        const auto& c = s.counts.at(m);
        auto get = [&](Outcome o) {
            auto it = c.find(o);
            return it == c.end() ? 0 : it->second;
        };
        out += fmt::format("{:<12}{:>10}{:>10}{:>8}{:>9}\n", retrieval::query_mode_name(m), get(Outcome::Resisted),
                           get(Outcome::AcceptedFalsePremise), get(Outcome::Hedged), get(Outcome::Pending));
    }
    return out;
}

}  // namespace narrative::eval
