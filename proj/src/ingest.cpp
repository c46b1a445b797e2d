#include "narrative/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "narrative/csv.hpp"
#include "narrative/error.hpp"
#include "narrative/text.hpp"

namespace narrative::ingest {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

std::string SegmentLabel::render() const { return fmt::format("{}_{}", episode, ordinal); }

SegmentLabel SegmentLabel::parse(std::string_view rendered) {
    auto us = rendered.find('_');
    if (us == std::string_view::npos || us == 0 || us + 1 == rendered.size())
        throw ParseError(fmt::format("bad segment label '{}'", rendered));
    SegmentLabel label;
    auto ep = rendered.substr(0, us);
    auto ord = rendered.substr(us + 1);
    auto r1 = std::from_chars(ep.data(), ep.data() + ep.size(), label.episode);
    auto r2 = std::from_chars(ord.data(), ord.data() + ord.size(), label.ordinal);
    if (r1.ec != std::errc{} || r1.ptr != ep.data() + ep.size() || r2.ec != std::errc{} ||
        r2.ptr != ord.data() + ord.size() || label.episode < 1 || label.ordinal < 1)
        throw ParseError(fmt::format("bad segment label '{}'", rendered));
    return label;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void PreprocessConfig::validate() const {
    for (const auto& name : proper_nouns) {
        auto t = text::trim(name);
        if (t.find(' ') == std::string::npos)
            throw ConfigError(fmt::format("proper noun '{}' has no internal space", name));
    }
    for (const auto& rule : opening_filters) {
        if (rule.pattern.empty()) throw ConfigError("opening filter with empty pattern");
        if (rule.kind == FilterRule::Kind::Regex) {
            try {
                std::regex re(rule.pattern);
            } catch (const std::regex_error& e) {
                throw ConfigError(fmt::format("filter regex '{}': {}", rule.pattern, e.what()));
            }
        }
    }
}

PreprocessConfig PreprocessConfig::defaults() {
    PreprocessConfig cfg;
    cfg.negative_expansions = {
        {"didn't", "did not"},     {"don't", "do not"},         {"doesn't", "does not"},
        {"isn't", "is not"},       {"aren't", "are not"},       {"wasn't", "was not"},
        {"weren't", "were not"},   {"haven't", "have not"},     {"hasn't", "has not"},
        {"hadn't", "had not"},     {"won't", "will not"},       {"wouldn't", "would not"},
        {"can't", "cannot"},       {"couldn't", "could not"},   {"shouldn't", "should not"},
        {"mustn't", "must not"},   {"needn't", "need not"},     {"mightn't", "might not"},
    };
    cfg.clitic_removals = {
        {"would've", "would"}, {"could've", "could"}, {"should've", "should"},
        {"might've", "might"}, {"must've", "must"},   {"I've", "I"},
        {"you've", "you"},     {"we've", "we"},       {"they've", "they"},
        {"I'd", "I"},          {"you'd", "you"},      {"he'd", "he"},
        {"she'd", "she"},      {"we'd", "we"},        {"they'd", "they"},
        {"I'll", "I"},         {"you'll", "you"},     {"he'll", "he"},
        {"she'll", "she"},     {"we'll", "we"},       {"they'll", "they"},
        {"I'm", "I"},          {"you're", "you"},     {"we're", "we"},
        {"they're", "they"},
    };
    cfg.filler_list = {"um",  "umm",   "uh",       "uhm",      "hmm",     "mm",      "mhm",
                       "er",  "ah",    "oh",       "you know", "kind of", "sort of", "like",
                       "basically", "actually", "anyway", "okay", "yeah", "well", "so"};
    return cfg;
}

namespace {

std::vector<std::pair<std::string, std::string>> pairs_from_json(const json& j) {
    std::vector<std::pair<std::string, std::string>> out;
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), it.value().get<std::string>());
    } else {
        for (const auto& p : j) out.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    return out;
}

}  // namespace

void from_json(const json& j, PreprocessConfig& cfg) {
    cfg = PreprocessConfig::defaults();
    if (j.contains("speaker_pronoun_rewrite")) cfg.speaker_pronoun_rewrite = j["speaker_pronoun_rewrite"];
    if (j.contains("clitic_removals")) cfg.clitic_removals = pairs_from_json(j["clitic_removals"]);
    if (j.contains("negative_expansions")) cfg.negative_expansions = pairs_from_json(j["negative_expansions"]);
    if (j.contains("proper_nouns")) cfg.proper_nouns = j["proper_nouns"].get<std::vector<std::string>>();
    if (j.contains("filler_removal")) cfg.filler_removal = j["filler_removal"];
    if (j.contains("fillers")) cfg.filler_list = j["fillers"].get<std::vector<std::string>>();
    if (j.contains("opening_filters")) {
        cfg.opening_filters.clear();
        for (const auto& f : j["opening_filters"]) {
            FilterRule rule;
            std::string kind = f.value("kind", "prefix");
            if (kind == "prefix")
                rule.kind = FilterRule::Kind::Prefix;
            else if (kind == "regex")
                rule.kind = FilterRule::Kind::Regex;
            else
                throw ConfigError("opening filter kind must be 'prefix' or 'regex', got '" + kind + "'");
            rule.pattern = f.at("pattern").get<std::string>();
            if (f.contains("episodes")) rule.episodes = f["episodes"].get<std::vector<int>>();
            cfg.opening_filters.push_back(std::move(rule));
        }
    }
    cfg.validate();
}

void to_json(json& j, const PreprocessConfig& cfg) {
    json filters = json::array();
    for (const auto& r : cfg.opening_filters) {
        filters.push_back({{"kind", r.kind == FilterRule::Kind::Regex ? "regex" : "prefix"},
                           {"pattern", r.pattern},
                           {"episodes", r.episodes}});
    }
    j = json{{"speaker_pronoun_rewrite", cfg.speaker_pronoun_rewrite},
             {"clitic_removals", cfg.clitic_removals},
             {"negative_expansions", cfg.negative_expansions},
             {"proper_nouns", cfg.proper_nouns},
             {"opening_filters", filters},
             {"filler_removal", cfg.filler_removal},
             {"fillers", cfg.filler_list}};
}

void from_json(const json& j, ColumnMapping& cols) {
    cols.sequence = j.value("sequence", cols.sequence);
    cols.episode = j.value("episode", cols.episode);
    cols.episode_title = j.value("episode_title", cols.episode_title);
    cols.start_time = j.value("start_time", cols.start_time);
    cols.end_time = j.value("end_time", cols.end_time);
    cols.text = j.value("text", cols.text);
    cols.speaker = j.value("speaker", cols.speaker);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

double parse_timestamp(std::string_view raw) {
    std::string s = text::trim(raw);
    if (s.empty()) throw ParseError("empty timestamp");
    double total = 0.0;
    std::size_t parts = 0;
    for (const auto& piece : text::split(s, ':')) {
        if (piece.empty()) throw ParseError("bad timestamp '" + s + "'");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(piece, &used);
        } catch (const std::exception&) {
            throw ParseError("bad timestamp '" + s + "'");
        }
        if (used != piece.size() || !std::isfinite(v) || v < 0) throw ParseError("bad timestamp '" + s + "'");
        total = total * 60.0 + v;
        ++parts;
    }
    if (parts > 3) throw ParseError("bad timestamp '" + s + "'");
    return total;
}

namespace {

template <typename Int>
Int parse_int(const std::string& raw) {
    auto s = text::trim(raw);
    Int v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("not an integer: '" + s + "'");
    return v;
}

}  // namespace

std::vector<TranscriptSegment> parse_transcript(std::istream& in, const ColumnMapping& schema) {
    auto records = csv::read(in);
    if (records.empty()) throw ParseError("transcript is empty");
    const auto& header = records.front().fields;

    auto column = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (text::trim(header[i]) == name) return i;
        throw ParseError(fmt::format("transcript header has no column '{}'", name));
    };
    const std::size_t c_seq = column(schema.sequence), c_ep = column(schema.episode),
                      c_title = column(schema.episode_title), c_start = column(schema.start_time),
                      c_end = column(schema.end_time), c_text = column(schema.text),
                      c_speaker = column(schema.speaker);

    if (records.size() == 1) throw ParseError("transcript has a header but no data rows");

    std::vector<TranscriptSegment> out;
    out.reserve(records.size() - 1);
    std::set<std::int64_t> seen;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        auto field = [&](std::size_t idx, const std::string& name) -> const std::string& {
            if (idx >= rec.fields.size())
                throw ParseError(fmt::format("row {} (line {}): missing column '{}'", r, rec.line, name));
            return rec.fields[idx];
        };
        auto fail = [&](const std::string& name, const std::string& why) {
            return ParseError(fmt::format("row {} (line {}): column '{}': {}", r, rec.line, name, why));
        };
        TranscriptSegment seg;
        try {
            seg.sequence = parse_int<std::int64_t>(field(c_seq, schema.sequence));
        } catch (const ParseError& e) {
            if (c_seq >= rec.fields.size()) throw;
            throw fail(schema.sequence, e.what());
        }
        if (seg.sequence < 0) throw fail(schema.sequence, "must be >= 0");
        try {
            seg.episode = parse_int<int>(field(c_ep, schema.episode));
        } catch (const ParseError& e) {
            if (c_ep >= rec.fields.size()) throw;
            throw fail(schema.episode, e.what());
        }
        if (seg.episode < 1) throw fail(schema.episode, "must be >= 1");
        seg.episode_title = field(c_title, schema.episode_title);
        try {
            seg.start_time = parse_timestamp(field(c_start, schema.start_time));
        } catch (const ParseError& e) {
            if (c_start >= rec.fields.size()) throw;
            throw fail(schema.start_time, e.what());
        }
        try {
            seg.end_time = parse_timestamp(field(c_end, schema.end_time));
        } catch (const ParseError& e) {
            if (c_end >= rec.fields.size()) throw;
            throw fail(schema.end_time, e.what());
        }
        if (seg.end_time < seg.start_time) throw fail(schema.end_time, "end_time precedes start_time");
        seg.text = field(c_text, schema.text);
        seg.speaker = text::trim(field(c_speaker, schema.speaker));
        if (seg.speaker.empty()) throw fail(schema.speaker, "speaker is empty");
        if (!seen.insert(seg.sequence).second)
            throw fail(schema.sequence, fmt::format("duplicate sequence number {}", seg.sequence));
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<TranscriptSegment> parse_transcript(const std::filesystem::path& path,
                                                const ColumnMapping& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open transcript " + path.string());
    return parse_transcript(in, schema);
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

namespace {

bool is_word_byte(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u >= 0x80;
}

// Right single quotation mark, as Whisper sometimes emits it.
constexpr std::string_view kCurlyApostrophe = "\xE2\x80\x99";

std::string normalize_key(std::string_view word) {
    std::string out;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (word.substr(i, kCurlyApostrophe.size()) == kCurlyApostrophe) {
            out += '\'';
            i += kCurlyApostrophe.size() - 1;
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(word[i])));
        }
    }
    return out;
}

bool all_upper(std::string_view w) {
    bool alpha = false;
    for (char c : w) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalpha(u)) {
            alpha = true;
            if (!std::isupper(u)) return false;
        }
    }
    return alpha;
}

/// Carries the capitalisation of `original` over to `replacement`.
std::string match_case(std::string_view original, const std::string& replacement) {
    std::string out = replacement;
    if (original.size() > 1 && all_upper(original)) {
        for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return out;
    }
    if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0])) && !out.empty())
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

using RewriteMap = std::unordered_map<std::string, std::string>;

RewriteMap build_map(const std::vector<std::pair<std::string, std::string>>& pairs) {
    RewriteMap m;
    for (const auto& [from, to] : pairs) m.emplace(normalize_key(from), to);
    return m;
}

std::string rewrite_core(const std::string& core, const RewriteMap& negatives, const RewriteMap& clitics,
                         const std::string& speaker_token) {
    std::string word = core;
    auto key = normalize_key(word);
    if (auto it = negatives.find(key); it != negatives.end()) {
        word = match_case(core, it->second);
    } else if (auto it2 = clitics.find(key); it2 != clitics.end()) {
        // The base of "I'd" is the pronoun itself; keep it capitalised.
        word = it2->second == "I" ? std::string("I") : match_case(core, it2->second);
    }
    if (!speaker_token.empty() && word == "I") word = speaker_token;
    return word;
}

std::string join_proper_nouns(std::string s, std::vector<std::string> names) {
    std::sort(names.begin(), names.end(),
              [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    for (const auto& raw : names) {
        auto name = text::collapse_spaces(raw);
        if (name.find(' ') == std::string::npos) continue;
        std::string joined;
        for (char c : name)
            if (c != ' ') joined += c;
        std::size_t pos = 0;
        while ((pos = s.find(name, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !is_word_byte(s[pos - 1]);
            std::size_t end = pos + name.size();
            bool right_ok = end == s.size() || !is_word_byte(s[end]);
            if (left_ok && right_ok) {
                s.replace(pos, name.size(), joined);
                pos += joined.size();
            } else {
                pos += 1;
            }
        }
    }
    return s;
}

}  // namespace

TranscriptSegment preprocess_segment(const TranscriptSegment& segment, const PreprocessConfig& config) {
    const RewriteMap negatives = build_map(config.negative_expansions);
    const RewriteMap clitics = build_map(config.clitic_removals);
    std::string speaker_token;
    if (config.speaker_pronoun_rewrite)
        for (char c : segment.speaker)
            if (!std::isspace(static_cast<unsigned char>(c))) speaker_token += c;

    const std::string& in = segment.text;
    std::string out;
    out.reserve(in.size() + 16);
    std::size_t i = 0;
    while (i < in.size()) {
        if (std::isspace(static_cast<unsigned char>(in[i]))) {
            out += in[i++];
            continue;
        }
        std::size_t start = i;
        while (i < in.size() && !std::isspace(static_cast<unsigned char>(in[i]))) ++i;
        std::string_view token(in.data() + start, i - start);
        std::size_t b = 0, e = token.size();
        while (b < e && !is_word_byte(token[b])) ++b;
        while (e > b && !is_word_byte(token[e - 1])) --e;
        if (b == e) {
            out += token;
            continue;
        }
        out += token.substr(0, b);
        out += rewrite_core(std::string(token.substr(b, e - b)), negatives, clitics, speaker_token);
        out += token.substr(e);
    }

    TranscriptSegment result = segment;
    result.text = join_proper_nouns(std::move(out), config.proper_nouns);
    return result;
}

std::string strip_fillers(std::string_view input, const std::vector<std::string>& fillers) {
    std::vector<std::vector<std::string>> phrases;
    for (const auto& f : fillers) {
        auto words = text::split_whitespace(text::to_lower(f));
        if (!words.empty()) phrases.push_back(std::move(words));
    }
    std::sort(phrases.begin(), phrases.end(),
              [](const auto& a, const auto& b) { return a.size() > b.size(); });

    auto tokens = text::split_whitespace(input);
    auto bare = [](const std::string& tok) {
        std::size_t b = 0, e = tok.size();
        while (b < e && !is_word_byte(tok[b])) ++b;
        while (e > b && !is_word_byte(tok[e - 1])) --e;
        return text::to_lower(tok.substr(b, e - b));
    };

    std::vector<std::string> kept;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t matched = 0;
        for (const auto& ph : phrases) {
            if (i + ph.size() > tokens.size()) continue;
            bool ok = true;
            for (std::size_t k = 0; k < ph.size() && ok; ++k) ok = bare(tokens[i + k]) == ph[k];
            if (ok) {
                matched = ph.size();
                break;
            }
        }
        if (matched == 0) {
            kept.push_back(tokens[i++]);
            continue;
        }
        // Keep sentence-final punctuation carried by the dropped filler.
        const std::string& last = tokens[i + matched - 1];
        std::size_t e = last.size();
        while (e > 0 && !is_word_byte(last[e - 1])) --e;
        std::string trail = last.substr(e);
        if (!trail.empty() && trail.find_first_of(".?!") != std::string::npos && !kept.empty()) {
            auto& prev = kept.back();
            while (!prev.empty() && prev.back() == ',') prev.pop_back();
            prev += trail.substr(trail.find_first_of(".?!"));
        }
        i += matched;
    }
    // Drop commas left dangling at the start.
    while (!kept.empty()) {
        auto& first = kept.front();
        std::size_t b = 0;
        while (b < first.size() && (first[b] == ',' || first[b] == ';')) ++b;
        if (b == 0) break;
        first.erase(0, b);
        if (first.empty())
            kept.erase(kept.begin());
        else
            break;
    }
    bool has_word = std::any_of(kept.begin(), kept.end(), [](const std::string& t) {
        return std::any_of(t.begin(), t.end(), is_word_byte);
    });
    if (!has_word) return {};
    return text::join(kept, " ");
}

std::vector<LabeledSegment> label_and_filter(const std::vector<TranscriptSegment>& segments,
                                             const PreprocessConfig& config) {
    struct Compiled {
        const FilterRule* rule;
        std::regex re;
    };
    std::vector<Compiled> filters;
    for (const auto& r : config.opening_filters) {
        Compiled c{&r, {}};
        if (r.kind == FilterRule::Kind::Regex) c.re = std::regex(r.pattern);
        filters.push_back(std::move(c));
    }
    auto dropped_by_filter = [&](const TranscriptSegment& s) {
        auto body = text::trim(s.text);
        for (const auto& f : filters) {
            const auto& eps = f.rule->episodes;
            if (!eps.empty() && std::find(eps.begin(), eps.end(), s.episode) == eps.end()) continue;
            if (f.rule->kind == FilterRule::Kind::Prefix) {
                if (body.rfind(f.rule->pattern, 0) == 0) return true;
            } else if (std::regex_search(body, f.re)) {
                return true;
            }
        }
        return false;
    };

    std::map<int, std::vector<const TranscriptSegment*>> by_episode;
    for (const auto& s : segments) by_episode[s.episode].push_back(&s);

    std::vector<LabeledSegment> out;
    for (auto& [episode, list] : by_episode) {
        std::stable_sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
            if (a->start_time != b->start_time) return a->start_time < b->start_time;
            return a->sequence < b->sequence;
        });
        int ordinal = 0;
        for (const auto* s : list) {
            if (dropped_by_filter(*s)) continue;
            TranscriptSegment kept = *s;
            if (config.filler_removal) {
                kept.text = strip_fillers(kept.text, config.filler_list);
                if (kept.text.empty()) continue;
            }
            out.push_back({SegmentLabel{episode, ++ordinal}, std::move(kept)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

std::vector<Chunk> chunk_segments(const std::vector<LabeledSegment>& labeled, int chunk_size) {
    if (chunk_size <= 0) throw ConfigError(fmt::format("chunk_size must be positive, got {}", chunk_size));
    const auto limit = static_cast<std::size_t>(chunk_size);

    struct Open {
        std::vector<std::string> lines;
        std::size_t tokens = 0;
        std::vector<SegmentLabel> labels;
    };
    std::vector<Open> built;
    Open cur;
    auto flush = [&] {
        if (cur.tokens > 0) built.push_back(std::move(cur));
        cur = Open{};
    };
    auto append = [&](const SegmentLabel& label, std::vector<std::string>::const_iterator b,
                      std::vector<std::string>::const_iterator e) {
        std::vector<std::string> words(b, e);
        cur.tokens += words.size();
        cur.lines.push_back(text::join(words, " "));
        if (cur.labels.empty() || cur.labels.back() != label) cur.labels.push_back(label);
    };

    for (const auto& ls : labeled) {
        auto words = text::split_whitespace(ls.segment.text);
        if (words.empty()) continue;
        if (words.size() <= limit) {
            if (cur.tokens + words.size() > limit) flush();
            append(ls.label, words.begin(), words.end());
            continue;
        }
        flush();
        auto it = words.begin();
        while (static_cast<std::size_t>(words.end() - it) > limit) {
            append(ls.label, it, it + static_cast<std::ptrdiff_t>(limit));
            flush();
            it += static_cast<std::ptrdiff_t>(limit);
        }
        append(ls.label, it, words.end());
    }
    flush();

    std::size_t width = std::max<std::size_t>(4, std::to_string(built.size()).size());
    std::vector<Chunk> chunks;
    chunks.reserve(built.size());
    for (std::size_t i = 0; i < built.size(); ++i) {
        Chunk c;
        c.id = fmt::format("chunk_{:0{}}", i + 1, width);
        c.text = text::join(built[i].lines, "\n");
        c.token_count = static_cast<int>(built[i].tokens);
        c.source_labels = std::move(built[i].labels);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// ---------------------------------------------------------------------------
// Stores
// ---------------------------------------------------------------------------

void write_labeled_csv(std::ostream& out, const std::vector<LabeledSegment>& segments) {
    csv::write_row(out, {"label", "sequence", "episode", "episode_title", "start_time", "end_time", "speaker",
                         "text"});
    for (const auto& ls : segments) {
        const auto& s = ls.segment;
        csv::write_row(out, {ls.label.render(), std::to_string(s.sequence), std::to_string(s.episode),
                             s.episode_title, fmt::format("{:.3f}", s.start_time),
                             fmt::format("{:.3f}", s.end_time), s.speaker, s.text});
    }
}

std::vector<LabeledSegment> read_labeled_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing artifact " + path.string());
    auto records = csv::read(in);
    std::vector<LabeledSegment> out;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& f = records[r].fields;
        if (f.size() < 8) throw ParseError(fmt::format("{} row {}: expected 8 columns", path.string(), r));
        LabeledSegment ls;
        ls.label = SegmentLabel::parse(f[0]);
        ls.segment.sequence = parse_int<std::int64_t>(f[1]);
        ls.segment.episode = parse_int<int>(f[2]);
        ls.segment.episode_title = f[3];
        ls.segment.start_time = parse_timestamp(f[4]);
        ls.segment.end_time = parse_timestamp(f[5]);
        ls.segment.speaker = f[6];
        ls.segment.text = f[7];
        out.push_back(std::move(ls));
    }
    return out;
}

void to_json(json& j, const Chunk& c) {
    std::vector<std::string> labels;
    for (const auto& l : c.source_labels) labels.push_back(l.render());
    j = json{{"id", c.id}, {"text", c.text}, {"token_count", c.token_count}, {"source_labels", labels}};
}

void from_json(const json& j, Chunk& c) {
    c.id = j.at("id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.token_count = j.at("token_count").get<int>();
    c.source_labels.clear();
    for (const auto& l : j.at("source_labels")) c.source_labels.push_back(SegmentLabel::parse(l.get<std::string>()));
}

void write_chunks(std::ostream& out, const std::vector<Chunk>& chunks) {
    for (const auto& c : chunks) out << json(c).dump() << '\n';
}

std::vector<Chunk> read_chunks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("missing artifact " + path.string());
    std::vector<Chunk> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line).get<Chunk>());
        } catch (const json::exception& e) {
            throw ParseError(fmt::format("{} line {}: {}", path.string(), n, e.what()));
        }
    }
    return out;
}

}  // namespace narrative::ingest
