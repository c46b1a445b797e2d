#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "narrative/llm_gateway.hpp"
#include "narrative/retrieval.hpp"

namespace narrative::eval {

using retrieval::QueryMode;

enum class Category { GroundTruth, Theme, Opinion };
std::string category_name(Category c);
Category parse_category(std::string_view s);

struct Question {
    std::string id;
    std::string text;
    Category category = Category::GroundTruth;
    bool operator==(const Question&) const = default;
};

struct QuestionCorpus {
    std::vector<Question> questions;
    /// JSON array or one JSON object per line. Throws ParseError on duplicate ids.
    static QuestionCorpus load(const std::filesystem::path& path);
    const Question* find(std::string_view id) const;
};

enum class Metric { Comprehensiveness, Empowerment, Diversity, Directness };
inline constexpr std::array<Metric, 4> kMetrics = {Metric::Comprehensiveness, Metric::Empowerment, Metric::Diversity,
                                                   Metric::Directness};
std::string metric_name(Metric m);
Metric parse_metric(std::string_view s);
/// What the judge is told the metric means.
std::string metric_definition(Metric m);

/// Row order of the win table.
inline constexpr std::array<QueryMode, 4> kAllModes = {QueryMode::Local, QueryMode::Global, QueryMode::NaiveLlm,
                                                       QueryMode::NaiveRag};

// ---- Corpus run --------------------------------------------------------------

struct AnswerCell {
    std::string question_id;
    QueryMode mode = QueryMode::NaiveLlm;
    std::optional<retrieval::Answer> answer;
    std::string error;  // set when the cell failed
    /// Cassette fingerprints of every completion behind this answer.
    std::vector<std::string> fingerprints;
    bool ok() const { return answer.has_value(); }
};

void to_json(nlohmann::json& j, const AnswerCell& c);
void from_json(const nlohmann::json& j, AnswerCell& c);

/// Any query function; the retriever's `query` in practice.
using Answerer = std::function<retrieval::Answer(QueryMode, const std::string& question)>;

/// Questions in corpus order, modes in the given order. A failing cell is
/// recorded and the run goes on.
std::vector<AnswerCell> run_corpus(const QuestionCorpus& corpus, const std::vector<QueryMode>& modes,
                                   const Answerer& answer, int workers = 4);

// ---- Judging -----------------------------------------------------------------

struct JudgeVerdict {
    std::string question_id;
    Metric metric = Metric::Comprehensiveness;
    QueryMode winner = QueryMode::Local;
    std::string rationale;
    /// Modes in the order they were shown as Answer A, B, ...
    std::vector<QueryMode> presented;
    bool operator==(const JudgeVerdict&) const = default;
};

void to_json(nlohmann::json& j, const JudgeVerdict& v);
void from_json(const nlohmann::json& j, JudgeVerdict& v);

/// Letter of the winning answer, or nullopt when the reply names none of `letters`.
std::optional<char> parse_winner(std::string_view reply, std::string_view letters);

/// Shows the answers under shuffled letters (order fixed by seed, question
/// and metric), forces one winner, reprompts once if it cannot be mapped.
JudgeVerdict judge(const Question& question, const std::vector<retrieval::Answer>& answers, Metric metric,
                   llm::Gateway& gateway, std::uint64_t seed);

struct JudgeRun {
    std::vector<JudgeVerdict> verdicts;
    /// (question id, metric) pairs left out, with the reason.
    std::vector<std::pair<std::string, std::string>> excluded;
};

/// Every question whose cells all succeeded, on every metric. Questions with a
/// failed cell are excluded for all metrics, since each verdict compares every mode.
JudgeRun judge_corpus(const QuestionCorpus& corpus, const std::vector<AnswerCell>& cells,
                      const std::vector<Metric>& metrics, llm::Gateway& gateway, std::uint64_t seed, int workers = 4);

struct WinTable {
    std::vector<QueryMode> modes;
    std::map<QueryMode, std::array<int, 4>> wins;  // columns follow kMetrics
    int total(QueryMode m) const;
    int column(Metric m) const;
    int verdicts() const;
};

WinTable tally(const std::vector<JudgeVerdict>& verdicts,
               const std::vector<QueryMode>& modes = {kAllModes.begin(), kAllModes.end()});
void write_win_table_csv(std::ostream& out, const WinTable& t);
std::string render_win_table(const WinTable& t);

// ---- Adversarial suite ---------------------------------------------------------

enum class TrapKind { FabricatedEvidence, FalsePresupposition, SuggestiveDetail };
std::string trap_kind_name(TrapKind k);
TrapKind parse_trap_kind(std::string_view s);

enum class Outcome { Pending, Resisted, AcceptedFalsePremise, Hedged };
std::string outcome_name(Outcome o);
Outcome parse_outcome(std::string_view s);

struct AdversarialCase {
    std::string id;
    std::string prompt;
    TrapKind trap_kind = TrapKind::FabricatedEvidence;
    std::string ground_truth_note;
};

std::vector<AdversarialCase> load_adversarial_cases(const std::filesystem::path& path);

struct AdversarialCell {
    std::string case_id;
    QueryMode mode = QueryMode::NaiveLlm;
    std::optional<retrieval::Answer> answer;
    std::string error;
    Outcome outcome = Outcome::Pending;
};

void to_json(nlohmann::json& j, const AdversarialCell& c);

std::vector<AdversarialCell> run_adversarial(const std::vector<AdversarialCase>& cases,
                                             const std::vector<QueryMode>& modes, const Answerer& answer,
                                             int workers = 4);

/// Grading file: CSV `case_id,mode,outcome`; a blank outcome means pending.
using Grades = std::map<std::pair<std::string, QueryMode>, Outcome>;
Grades load_grades(const std::filesystem::path& path);
/// Blank grading sheet with the answers alongside, for a human to fill in.
void write_grading_sheet(std::ostream& out, const std::vector<AdversarialCell>& cells);
/// Copies grades onto cells; ungraded cells stay pending.
void apply_grades(std::vector<AdversarialCell>& cells, const Grades& grades);

struct AdversarialSummary {
    std::vector<QueryMode> modes;
    std::map<QueryMode, std::map<Outcome, int>> counts;
};

AdversarialSummary summarize(const std::vector<AdversarialCell>& cells);
std::string render_adversarial(const AdversarialSummary& s);

}  // namespace narrative::eval
