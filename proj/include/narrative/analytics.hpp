#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "narrative/graph_builder.hpp"
#include "narrative/ingest.hpp"
#include "narrative/llm_gateway.hpp"

namespace narrative::analytics {

// ---- Lexicon sentiment -----------------------------------------------------

/// Rule constants of the lexicon scorer; defaults are VADER's.
struct SentimentRules {
    double alpha = 15.0;
    int negation_window = 3;
    double negation_scalar = -0.74;
    double booster_increment = 0.293;
    double caps_increment = 0.733;
    double exclamation_increment = 0.292;
    int max_exclamations = 4;
};

class SentimentLexicon {
public:
    /// Tab-separated `token<TAB>valence[<TAB>...]`. Throws ConfigError when missing.
    static SentimentLexicon load(const std::filesystem::path& path);

    void set(std::string token, double valence) { valence_[std::move(token)] = valence; }
    std::optional<double> valence(std::string_view lower_token) const;
    std::size_t size() const { return valence_.size(); }

    std::unordered_set<std::string> boosters_up;
    std::unordered_set<std::string> boosters_down;
    std::unordered_set<std::string> negators;

    /// Empty valence table with the built-in booster and negator lists.
    SentimentLexicon();

private:
    std::unordered_map<std::string, double> valence_;
};

/// Compound score in [-1, 1]; 0 for empty or all-neutral text.
double sentiment_score(std::string_view text, const SentimentLexicon& lexicon, const SentimentRules& rules = {});

struct SentimentPoint {
    ingest::SegmentLabel label;
    double score = 0.0;
};

struct SentimentSeries {
    std::vector<SentimentPoint> points;
    std::vector<double> smoothed;  // empty until smoothed
    std::vector<double> raw() const;
};

SentimentSeries score_segments(const std::vector<ingest::LabeledSegment>& segments, const SentimentLexicon& lexicon,
                               const SentimentRules& rules = {});

/// Centred moving average. Even windows lean left (10 → 5 before, 4 after);
/// near the ends both sides shrink to the same radius.
std::vector<double> rolling_average(const std::vector<double>& series, int window = 10);

struct ChangePointSet {
    /// Index of the first value of each new segment.
    std::vector<std::size_t> indices;
    double penalty = 0.0;
    bool operator==(const ChangePointSet&) const = default;
};

/// Squared deviation of series[begin, end) about its mean.
double segment_cost(const std::vector<double>& series, std::size_t begin, std::size_t end);

/// Exact penalised least-squares segmentation by pruned dynamic programming.
ChangePointSet pelt_changepoints(const std::vector<double>& series, double penalty);

/// 2 σ² log n with σ estimated from first differences (σ² = var(Δ)/2).
double default_penalty(const std::vector<double>& series);

/// label,raw,smoothed,is_changepoint
void write_sentiment_csv(std::ostream& out, const SentimentSeries& series, const ChangePointSet& cps);
/// Line plot of the smoothed series with change-point markers.
void write_sentiment_svg(std::ostream& out, const SentimentSeries& series, const ChangePointSet& cps);

// ---- Model-based classification ---------------------------------------------

enum class SentimentClass { VeryNegative, Negative, Neutral, Positive, VeryPositive };
inline constexpr std::array<SentimentClass, 5> kSentimentClasses = {
    SentimentClass::VeryNegative, SentimentClass::Negative, SentimentClass::Neutral, SentimentClass::Positive,
    SentimentClass::VeryPositive};

std::string sentiment_class_name(SentimentClass c);
/// Case, punctuation and separator tolerant; StructuredOutputError otherwise.
SentimentClass parse_sentiment_class(std::string_view response);

struct HearsayVerdict {
    bool is_hearsay = false;
    std::string explanation;
};

/// `"true", "explanation"`; falls back to the first bare true/false token.
HearsayVerdict parse_hearsay(std::string_view response);

struct HearsayRecord {
    std::string chunk_id;
    bool is_hearsay = false;
    std::string explanation;
    SentimentClass sentiment_class = SentimentClass::Neutral;
    bool operator==(const HearsayRecord&) const = default;
};

void to_json(nlohmann::json& j, const HearsayRecord& r);
void from_json(const nlohmann::json& j, HearsayRecord& r);

HearsayVerdict classify_hearsay(const ingest::Chunk& chunk, llm::Gateway& gateway);
SentimentClass classify_sentiment_5(const ingest::Chunk& chunk, llm::Gateway& gateway);

/// Both classifications for every chunk; output sorted by chunk id.
std::vector<HearsayRecord> analyze_hearsay(const std::vector<ingest::Chunk>& chunks, llm::Gateway& gateway);

double hearsay_rate(const std::vector<HearsayRecord>& records);

struct CrossTab {
    /// Row 0: hearsay, row 1: not hearsay. Columns follow kSentimentClasses.
    std::array<std::array<int, 5>, 2> counts{};
    std::array<int, 2> totals{};
    /// Row percentages to one decimal; each nonempty row sums to exactly 100.
    std::array<std::array<double, 5>, 2> percent{};
};

CrossTab crosstab_hearsay_sentiment(const std::vector<HearsayRecord>& records);
void write_crosstab_csv(std::ostream& out, const CrossTab& t);
std::string render_crosstab(const CrossTab& t);

// ---- Keywords --------------------------------------------------------------

struct KeywordReport {
    int community_id = 0;
    std::vector<std::string> keywords;
    std::string uniqueness_note;
    bool operator==(const KeywordReport&) const = default;
};

void to_json(nlohmann::json& j, const KeywordReport& r);
void from_json(const nlohmann::json& j, KeywordReport& r);

/// Accepts numbered lists (several items per line allowed), bullets, or one
/// comma-separated line. The note is whatever follows "Community Uniqueness:"
/// or, failing that, the text after the list. No count check here.
KeywordReport parse_keywords(std::string_view response);

/// Exactly 10 distinct keywords, with one corrective reprompt.
KeywordReport extract_keywords(const builder::CommunityReport& report, llm::Gateway& gateway);

}  // namespace narrative::analytics
