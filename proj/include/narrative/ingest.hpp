#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace narrative::ingest {

/// One timestamped utterance of a transcript.
struct TranscriptSegment {
    std::int64_t sequence = 0;
    int episode = 1;
    std::string episode_title;
    double start_time = 0.0;
    double end_time = 0.0;
    std::string text;
    std::string speaker;

    bool operator==(const TranscriptSegment&) const = default;
};

/// "<episode>_<ordinal>", e.g. 2_51 is the 51st retained segment of episode 2.
struct SegmentLabel {
    int episode = 1;
    int ordinal = 1;

    std::string render() const;
    static SegmentLabel parse(std::string_view rendered);

    auto operator<=>(const SegmentLabel&) const = default;
};

struct LabeledSegment {
    SegmentLabel label;
    TranscriptSegment segment;

    bool operator==(const LabeledSegment&) const = default;
};

struct Chunk {
    std::string id;
    std::string text;
    int token_count = 0;
    std::vector<SegmentLabel> source_labels;

    bool operator==(const Chunk&) const = default;
};

/// Maps logical fields onto CSV header names.
struct ColumnMapping {
    std::string sequence = "sequence";
    std::string episode = "episode";
    std::string episode_title = "episode_title";
    std::string start_time = "start_time";
    std::string end_time = "end_time";
    std::string text = "text";
    std::string speaker = "speaker";
};

/// Drops segments such as the recurring episode intro. An empty episode list
/// applies the rule to every episode.
struct FilterRule {
    enum class Kind { Prefix, Regex };
    Kind kind = Kind::Prefix;
    std::string pattern;
    std::vector<int> episodes;
};

struct PreprocessConfig {
    bool speaker_pronoun_rewrite = true;
    std::vector<std::pair<std::string, std::string>> clitic_removals;
    std::vector<std::pair<std::string, std::string>> negative_expansions;
    std::vector<std::string> proper_nouns;
    std::vector<FilterRule> opening_filters;
    bool filler_removal = false;
    std::vector<std::string> filler_list;

    /// Throws ConfigError when a proper noun has no internal space or a filter
    /// regex does not compile.
    void validate() const;

    /// Built-in contraction and filler lists; no proper nouns, no filters.
    static PreprocessConfig defaults();
};

void from_json(const nlohmann::json& j, PreprocessConfig& cfg);
void to_json(nlohmann::json& j, const PreprocessConfig& cfg);
void from_json(const nlohmann::json& j, ColumnMapping& cols);

/// Accepts plain seconds ("83.5") or clock time ("00:01:23.5", "1:23").
double parse_timestamp(std::string_view s);

std::vector<TranscriptSegment> parse_transcript(std::istream& in, const ColumnMapping& schema = {});
std::vector<TranscriptSegment> parse_transcript(const std::filesystem::path& path,
                                                const ColumnMapping& schema = {});

TranscriptSegment preprocess_segment(const TranscriptSegment& segment, const PreprocessConfig& config);

/// Removes configured filler words and discourse markers from `text`.
std::string strip_fillers(std::string_view text, const std::vector<std::string>& fillers);

std::vector<LabeledSegment> label_and_filter(const std::vector<TranscriptSegment>& segments,
                                             const PreprocessConfig& config);

std::vector<Chunk> chunk_segments(const std::vector<LabeledSegment>& labeled, int chunk_size);

// Stores: preprocessed CSV (label column first) and line-delimited chunk records.
void write_labeled_csv(std::ostream& out, const std::vector<LabeledSegment>& segments);
std::vector<LabeledSegment> read_labeled_csv(const std::filesystem::path& path);
void write_chunks(std::ostream& out, const std::vector<Chunk>& chunks);
std::vector<Chunk> read_chunks(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Chunk& c);
void from_json(const nlohmann::json& j, Chunk& c);

}  // namespace narrative::ingest
