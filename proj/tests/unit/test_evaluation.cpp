#include <gtest/gtest.h>

#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "narrative/error.hpp"
#include "narrative/evaluation.hpp"

using namespace narrative;
using namespace narrative::eval;
using narrative::llm::ProviderRequest;

namespace {

llm::GatewayConfig live_cfg() {
    llm::GatewayConfig c;
    c.mode = llm::Mode::Live;
    c.retry_backoff_ms = 0;
    return c;
}

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream(p) << content;
    return p;
}

QuestionCorpus make_corpus(int n) {
    QuestionCorpus c;
    for (int i = 1; i <= n; ++i) c.questions.push_back({fmt::format("q{:02d}", i), fmt::format("Question {}?", i), Category::Theme});
    return c;
}

retrieval::Answer answer_of(QueryMode m, std::string text) {
    retrieval::Answer a;
    a.question = "q";
    a.mode = m;
    a.text = std::move(text);
    return a;
}

// Picks whichever answer contains BEST, reading the letters from the prompt.
std::string content_judge(const ProviderRequest& r) {
    static const std::regex block(R"(Answer ([A-Z]):\n([^\n]*))");
    for (auto it = std::sregex_iterator(r.prompt.begin(), r.prompt.end(), block); it != std::sregex_iterator(); ++it)
        if (it->str(2).find("BEST") != std::string::npos) return "Winner: Answer " + it->str(1) + "\nReason: most detail.";
    return "Winner: Answer A\nReason: default.";
}

// Verdicts laid out like the reference win table.
std::vector<JudgeVerdict> reference_verdicts() {
    const std::array<std::array<int, 4>, 4> wins = {{{27, 30, 29, 24}, {8, 5, 6, 2}, {1, 1, 1, 5}, {0, 0, 0, 5}}};
    std::vector<JudgeVerdict> out;
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 4; ++col)
            for (int k = 0; k < wins[row][col]; ++k)
                out.push_back({fmt::format("q{}", out.size() % 36), kMetrics[col], kAllModes[row], "", {}});
    return out;
}

}  // namespace

TEST(Corpus, LoadsJsonlAndArrayAndRejectsDuplicates) {
    auto jsonl = write_temp("narrative_corpus.jsonl",
                            "{\"id\": \"q1\", \"text\": \"Who?\", \"category\": \"ground_truth\"}\n\n"
                            "{\"id\": \"q2\", \"text\": \"Why?\", \"category\": \"opinion\"}\n");
    auto c = QuestionCorpus::load(jsonl);
    ASSERT_EQ(c.questions.size(), 2u);
    EXPECT_EQ(c.questions[1].category, Category::Opinion);
    auto arr = write_temp("narrative_corpus.json", R"([{"id": "a", "text": "x", "category": "theme"}])");
    EXPECT_EQ(QuestionCorpus::load(arr).questions.size(), 1u);
    auto dup = write_temp("narrative_dup.jsonl", "{\"id\": \"q1\", \"text\": \"a\"}\n{\"id\": \"q1\", \"text\": \"b\"}\n");
    EXPECT_THROW(QuestionCorpus::load(dup), ParseError);
    auto badcat = write_temp("narrative_badcat.jsonl", "{\"id\": \"q1\", \"text\": \"a\", \"category\": \"gossip\"}\n");
    EXPECT_THROW(QuestionCorpus::load(badcat), ParseError);
    EXPECT_THROW(QuestionCorpus::load("/nonexistent.jsonl"), NotFoundError);
}

TEST(Corpus, RunFillsEveryCellWithProvenance) {
    auto corpus = make_corpus(36);
    llm::Gateway gw(live_cfg(), std::make_shared<llm::ScriptedProvider>([](const ProviderRequest& r) {
                        return "answer to " + r.prompt.substr(r.prompt.size() - 12);
                    }));
    Answerer ans = [&](QueryMode m, const std::string& q) {
        auto a = retrieval::query_naive_llm(q, gw);
        a.mode = m;
        return a;
    };
    auto cells = run_corpus(corpus, {kAllModes.begin(), kAllModes.end()}, ans);
    ASSERT_EQ(cells.size(), 144u);
    for (const auto& c : cells) {
        EXPECT_TRUE(c.ok());
        ASSERT_EQ(c.fingerprints.size(), 1u);
        EXPECT_EQ(c.fingerprints[0].size(), 64u);
    }
    EXPECT_EQ(cells[5].question_id, "q02");
    EXPECT_EQ(cells[5].mode, QueryMode::Global);
    nlohmann::json j = cells[0];
    auto back = j.get<AnswerCell>();
    EXPECT_EQ(back.answer, cells[0].answer);
    EXPECT_EQ(back.fingerprints, cells[0].fingerprints);

    auto one = run_corpus(make_corpus(1), {QueryMode::NaiveLlm}, ans);
    EXPECT_EQ(one.size(), 1u);
}

TEST(Corpus, FailedCellIsRecordedAndExcludedFromJudging) {
    auto corpus = make_corpus(3);
    Answerer ans = [](QueryMode m, const std::string& q) {
        if (q == "Question 2?" && m == QueryMode::Global) throw ValidationError("no reports");
        return answer_of(m, "text for " + q + (m == QueryMode::Local ? " BEST" : ""));
    };
    auto cells = run_corpus(corpus, {kAllModes.begin(), kAllModes.end()}, ans);
    int failed = 0;
    for (const auto& c : cells)
        if (!c.ok()) {
            ++failed;
            EXPECT_EQ(c.error, "no reports");
        }
    EXPECT_EQ(failed, 1);

    llm::Gateway gw(live_cfg(), std::make_shared<llm::ScriptedProvider>(content_judge));
    auto run = judge_corpus(corpus, cells, {kMetrics.begin(), kMetrics.end()}, gw, 7);
    EXPECT_EQ(run.verdicts.size(), 8u);
    EXPECT_EQ(run.excluded.size(), 4u);
    auto t = tally(run.verdicts);
    EXPECT_EQ(t.total(QueryMode::Local), 8);
    for (auto m : kMetrics) EXPECT_EQ(t.column(m), 2);  // question count minus the excluded one
    for (const auto& v : run.verdicts) EXPECT_NE(corpus.find(v.question_id), nullptr);
}

TEST(Judge, ParseWinner) {
    EXPECT_EQ(parse_winner("Winner: Answer B\nReason: x", "ABCD"), 'B');
    EXPECT_EQ(parse_winner("**Winner:** answer c", "ABCD"), 'C');
    EXPECT_EQ(parse_winner("Winner - (D)", "ABCD"), 'D');
    EXPECT_EQ(parse_winner("I prefer Answer A because it is longer than Answer A's rival.", "AB"), 'A');
    EXPECT_EQ(parse_winner("Answer A and Answer B are both fine", "AB"), std::nullopt);
    EXPECT_EQ(parse_winner("Winner: Answer E", "ABCD"), std::nullopt);
    EXPECT_EQ(parse_winner("no idea", "AB"), std::nullopt);
}

TEST(Judge, FixedLetterMapsBackThroughPresentation) {
    std::string seen_prompt;
    llm::Gateway gw(live_cfg(), std::make_shared<llm::ScriptedProvider>([&](const ProviderRequest& r) {
                        seen_prompt = r.prompt;
                        return std::string("Winner: Answer B\nReason: clearer.");
                    }));
    Question q{"q1", "Who found the body?", Category::GroundTruth};
    std::vector<retrieval::Answer> answers = {answer_of(QueryMode::Local, "local text"),
                                              answer_of(QueryMode::Global, "global text"),
                                              answer_of(QueryMode::NaiveRag, "rag text"),
                                              answer_of(QueryMode::NaiveLlm, "llm text")};
    auto v = judge(q, answers, Metric::Directness, gw, 3);
    ASSERT_EQ(v.presented.size(), 4u);
    EXPECT_EQ(v.winner, v.presented[1]);
    EXPECT_EQ(v.rationale, "clearer.");
    // The text shown as Answer B belongs to the winning mode.
    auto b = seen_prompt.find("Answer B:\n");
    ASSERT_NE(b, std::string::npos);
    auto shown = seen_prompt.substr(b + 10, seen_prompt.find('\n', b + 10) - b - 10);
    auto it = std::find_if(answers.begin(), answers.end(), [&](const auto& a) { return a.mode == v.winner; });
    EXPECT_EQ(shown, it->text);
    EXPECT_NE(seen_prompt.find(metric_definition(Metric::Directness)), std::string::npos);
    // Same seed, same order.
    EXPECT_EQ(judge(q, answers, Metric::Directness, gw, 3).presented, v.presented);
}

TEST(Judge, AnonymizationDoesNotChangeWinner) {
    llm::Gateway gw(live_cfg(), std::make_shared<llm::ScriptedProvider>(content_judge));
    Question q{"q9", "What happened?", Category::Theme};
    std::vector<retrieval::Answer> answers = {answer_of(QueryMode::Local, "plain"),
                                              answer_of(QueryMode::Global, "the BEST one"),
                                              answer_of(QueryMode::NaiveRag, "plain"),
                                              answer_of(QueryMode::NaiveLlm, "plain")};
    std::set<std::vector<QueryMode>> orders;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto v = judge(q, answers, Metric::Comprehensiveness, gw, seed);
        EXPECT_EQ(v.winner, QueryMode::Global);
        orders.insert(v.presented);
    }
    EXPECT_GT(orders.size(), 5u);  // the labels really were shuffled
}

TEST(Judge, IdenticalAnswersStillForceOneWinner) {
    llm::Gateway gw(live_cfg(), std::make_shared<llm::ScriptedProvider>(content_judge));
    Question q{"q1", "x", Category::Opinion};
    auto v = judge(q, {answer_of(QueryMode::Local, "same"), answer_of(QueryMode::NaiveLlm, "same")}, Metric::Diversity,
                   gw, 1);
    EXPECT_TRUE(v.winner == QueryMode::Local || v.winner == QueryMode::NaiveLlm);
    EXPECT_EQ(v.winner, v.presented[0]);
    EXPECT_THROW(judge(q, {answer_of(QueryMode::Local, "x")}, Metric::Diversity, gw, 1), ValidationError);
    EXPECT_THROW(judge(q, {answer_of(QueryMode::Local, "x"), answer_of(QueryMode::Local, "y")}, Metric::Diversity, gw, 1),
                 ValidationError);
}

TEST(Judge, OneRepromptThenError) {
    int calls = 0;
    llm::Gateway ok(live_cfg(), std::make_shared<llm::ScriptedProvider>([&](const ProviderRequest& r) -> std::string {
                        ++calls;
                        if (r.template_id == llm::tmpl::kJudgeReprompt) {
                            EXPECT_NE(r.prompt.find("A or B"), std::string::npos);
                            return "Winner: Answer A";
                        }
                        return "Both are good.";
                    }));
    Question q{"q1", "x", Category::Opinion};
    std::vector<retrieval::Answer> two = {answer_of(QueryMode::Local, "a"), answer_of(QueryMode::Global, "b")};
    auto v = judge(q, two, Metric::Empowerment, ok, 5);
    EXPECT_EQ(calls, 2);
    EXPECT_EQ(v.winner, v.presented[0]);

    llm::Gateway bad(live_cfg(), std::make_shared<llm::ScriptedProvider>([](const ProviderRequest&) {
                         return std::string("Cannot decide.");
                     }));
    EXPECT_THROW(judge(q, two, Metric::Empowerment, bad, 5), StructuredOutputError);
}

TEST(Tally, ReferenceTotalsAndRowSums) {
    auto t = tally(reference_verdicts());
    EXPECT_EQ(t.total(QueryMode::Local), 110);
    EXPECT_EQ(t.total(QueryMode::Global), 21);
    EXPECT_EQ(t.total(QueryMode::NaiveLlm), 8);
    EXPECT_EQ(t.total(QueryMode::NaiveRag), 5);
    EXPECT_EQ(t.wins.at(QueryMode::Local), (std::array<int, 4>{27, 30, 29, 24}));
    EXPECT_EQ(27 + 30 + 29 + 24, t.total(QueryMode::Local));
    for (auto m : kMetrics) EXPECT_EQ(t.column(m), 36);
    EXPECT_EQ(t.verdicts(), 144);
    std::ostringstream csv_out;
    write_win_table_csv(csv_out, t);
    EXPECT_EQ(csv_out.str(),
              "mode,comprehensiveness,empowerment,diversity,directness,total\n"
              "local,27,30,29,24,110\nglobal,8,5,6,2,21\nnaive_llm,1,1,1,5,8\nnaive_rag,0,0,0,5,5\n");
    EXPECT_NE(render_win_table(t).find("110"), std::string::npos);
}

TEST(Tally, EmptyAndSingle) {
    auto empty = tally({});
    for (auto m : kAllModes) EXPECT_EQ(empty.total(m), 0);
    auto one = tally({{"q1", Metric::Diversity, QueryMode::NaiveRag, "", {}}});
    int nonzero = 0;
    for (auto m : kAllModes)
        for (int x : one.wins.at(m)) nonzero += x != 0;
    EXPECT_EQ(nonzero, 1);
    EXPECT_EQ(one.wins.at(QueryMode::NaiveRag)[2], 1);
    EXPECT_THROW(tally({{"q1", Metric::Diversity, QueryMode::NaiveRag, "", {}}}, {QueryMode::Local}), ValidationError);
}

TEST(Tally, VerdictJsonRoundTrip) {
    JudgeVerdict v{"q3", Metric::Empowerment, QueryMode::Global, "why", {QueryMode::NaiveLlm, QueryMode::Global}};
    nlohmann::json j = v;
    EXPECT_EQ(j.get<JudgeVerdict>(), v);
}

TEST(Adversarial, CellsGradesAndSummary) {
    auto cases_path = write_temp("narrative_adv.json", R"([
        {"id": "hammer", "prompt": "Was the DNA on the hammer?", "trap_kind": "fabricated_evidence", "ground_truth_note": "no hammer"},
        {"id": "c2", "prompt": "p2", "trap_kind": "false_presupposition"},
        {"id": "c3", "prompt": "p3", "trap_kind": "suggestive_detail"},
        {"id": "c4", "prompt": "p4", "trap_kind": "fabricated_evidence"},
        {"id": "c5", "prompt": "p5", "trap_kind": "false_presupposition"},
        {"id": "c6", "prompt": "p6", "trap_kind": "suggestive_detail"}])");
    auto cases = load_adversarial_cases(cases_path);
    ASSERT_EQ(cases.size(), 6u);
    Answerer ans = [](QueryMode m, const std::string&) {
        auto a = answer_of(m, m == QueryMode::Local ? "The data provided does not specify." : "Yes, it was.");
        a.declined = m == QueryMode::Local;
        return a;
    };
    auto cells = run_adversarial(cases, {kAllModes.begin(), kAllModes.end()}, ans);
    ASSERT_EQ(cells.size(), 24u);
    for (const auto& c : cells) EXPECT_EQ(c.outcome, Outcome::Pending);  // nothing graded yet

    std::ostringstream sheet;
    write_grading_sheet(sheet, cells);
    EXPECT_EQ(sheet.str().substr(0, 35), "case_id,mode,outcome,declined,answe");
    auto grades_path = write_temp("narrative_grades.csv",
                                  "case_id,mode,outcome\nhammer,local,resisted\nhammer,naive_llm,accepted_false_premise\n"
                                  "hammer,global,\nc2,naive_rag,hedged\n");
    apply_grades(cells, load_grades(grades_path));
    auto s = summarize(cells);
    EXPECT_EQ(s.counts[QueryMode::Local][Outcome::Resisted], 1);
    EXPECT_EQ(s.counts[QueryMode::Local][Outcome::Pending], 5);
    EXPECT_EQ(s.counts[QueryMode::NaiveLlm][Outcome::AcceptedFalsePremise], 1);
    EXPECT_EQ(s.counts[QueryMode::NaiveRag][Outcome::Hedged], 1);
    EXPECT_EQ(s.counts[QueryMode::Global][Outcome::Pending], 6);
    EXPECT_NE(render_adversarial(s).find("pending"), std::string::npos);

    auto bad = write_temp("narrative_badgrades.csv", "case_id,mode,outcome\nhammer,local,probably\n");
    EXPECT_THROW(load_grades(bad), ParseError);
    auto nocol = write_temp("narrative_nocol.csv", "case,mode\n");
    EXPECT_THROW(load_grades(nocol), ParseError);
}
