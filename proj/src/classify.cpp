#include <algorithm>
#include <cmath>
#include <ostream>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "narrative/analytics.hpp"
#include "narrative/csv.hpp"
#include "narrative/error.hpp"
#include "narrative/parallel.hpp"
#include "narrative/templates.hpp"
#include "narrative/text.hpp"

namespace narrative::analytics {

using json = nlohmann::json;

namespace {

// Curly double quotes become straight ones.
std::string straighten_quotes(std::string_view s) {
    std::string out(s);
    for (const char* q : {"\xE2\x80\x9C", "\xE2\x80\x9D"}) {
        for (auto p = out.find(q); p != std::string::npos; p = out.find(q, p)) out.replace(p, 3, "\"");
    }
    return out;
}

std::string strip_chars(std::string_view s, std::string_view chars) {
    std::size_t b = 0, e = s.size();
    while (b < e && chars.find(s[b]) != std::string_view::npos) ++b;
    while (e > b && chars.find(s[e - 1]) != std::string_view::npos) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

// ---- Sentiment classes -------------------------------------------------------

std::string sentiment_class_name(SentimentClass c) {
    switch (c) {
        case SentimentClass::VeryNegative: return "very_negative";
        case SentimentClass::Negative: return "negative";
        case SentimentClass::Neutral: return "neutral";
        case SentimentClass::Positive: return "positive";
        case SentimentClass::VeryPositive: return "very_positive";
    }
    return "?";
}

SentimentClass parse_sentiment_class(std::string_view response) {
    std::string norm;
    for (unsigned char c : text::to_lower(response)) norm += std::isalnum(c) ? static_cast<char>(c) : ' ';
    norm = text::collapse_spaces(norm);
    if (norm == "very negative") return SentimentClass::VeryNegative;
    if (norm == "negative") return SentimentClass::Negative;
    if (norm == "neutral") return SentimentClass::Neutral;
    if (norm == "positive") return SentimentClass::Positive;
    if (norm == "very positive") return SentimentClass::VeryPositive;
    throw StructuredOutputError("unknown sentiment label '" + text::trim(response) + "'", std::string(response));
}

// ---- Hearsay -----------------------------------------------------------------

HearsayVerdict parse_hearsay(std::string_view response) {
    const std::string s = straighten_quotes(response);
    std::vector<std::string> quoted;
    for (std::size_t p = s.find('"'); p != std::string::npos;) {
        auto q = s.find('"', p + 1);
        if (q == std::string::npos) break;
        quoted.push_back(s.substr(p + 1, q - p - 1));
        p = s.find('"', q + 1);
    }
    if (!quoted.empty()) {
        auto flag = text::to_lower(strip_chars(text::trim(quoted[0]), ".,;: "));
        if (flag == "true" || flag == "false") {
            HearsayVerdict v{flag == "true", ""};
            if (quoted.size() > 1) v.explanation = text::trim(quoted[1]);
            if (!v.explanation.empty()) return v;
        }
    }
    // Lenient path: first bare true/false, the rest is the explanation.
    static const std::regex flag_re(R"(\b(true|false)\b)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(s, m, flag_re)) {
        HearsayVerdict v{text::to_lower(m.str(1)) == "true", ""};
        v.explanation = strip_chars(text::trim(m.suffix().str()), "\"', \n\t");
        if (!v.explanation.empty()) return v;
    }
    throw StructuredOutputError("hearsay response has no true/false classification with an explanation",
                                std::string(response));
}

void to_json(json& j, const HearsayRecord& r) {
    j = json{{"chunk_id", r.chunk_id},
             {"is_hearsay", r.is_hearsay},
             {"explanation", r.explanation},
             {"sentiment_class", sentiment_class_name(r.sentiment_class)}};
}

void from_json(const json& j, HearsayRecord& r) {
    r.chunk_id = j.at("chunk_id").get<std::string>();
    r.is_hearsay = j.at("is_hearsay").get<bool>();
    r.explanation = j.at("explanation").get<std::string>();
    r.sentiment_class = parse_sentiment_class(j.at("sentiment_class").get<std::string>());
}

HearsayVerdict classify_hearsay(const ingest::Chunk& chunk, llm::Gateway& gateway) {
    return with_context("hearsay " + chunk.id,
                        [&] { return parse_hearsay(gateway.complete(llm::tmpl::kHearsay, {{"text", chunk.text}})); });
}

SentimentClass classify_sentiment_5(const ingest::Chunk& chunk, llm::Gateway& gateway) {
    return with_context("sentiment " + chunk.id, [&] {
        return parse_sentiment_class(gateway.complete(llm::tmpl::kSentiment5, {{"text", chunk.text}}));
    });
}

std::vector<HearsayRecord> analyze_hearsay(const std::vector<ingest::Chunk>& chunks, llm::Gateway& gateway) {
    std::vector<HearsayRecord> out(chunks.size());
    parallel_for(chunks.size(), gateway.config().max_in_flight, [&](std::size_t i) {
        auto v = classify_hearsay(chunks[i], gateway);
        out[i] = {chunks[i].id, v.is_hearsay, v.explanation, classify_sentiment_5(chunks[i], gateway)};
    });
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.chunk_id < b.chunk_id; });
    return out;
}

double hearsay_rate(const std::vector<HearsayRecord>& records) {
    if (records.empty()) return 0.0;
    auto n = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.is_hearsay; });
    return static_cast<double>(n) / static_cast<double>(records.size());
}

// ---- Cross-tab ---------------------------------------------------------------

CrossTab crosstab_hearsay_sentiment(const std::vector<HearsayRecord>& records) {
    CrossTab t;
    for (const auto& r : records) {
        int row = r.is_hearsay ? 0 : 1;
        ++t.counts[row][static_cast<int>(r.sentiment_class)];
        ++t.totals[row];
    }
    // Largest-remainder rounding in tenths of a percent so rows sum to 100.0.
    for (int row = 0; row < 2; ++row) {
        if (t.totals[row] == 0) continue;
        std::array<long long, 5> tenths{};
        std::array<long long, 5> rem{};
        long long given = 0;
        for (int c = 0; c < 5; ++c) {
            long long scaled = 1000LL * t.counts[row][c];
            tenths[c] = scaled / t.totals[row];
            rem[c] = scaled % t.totals[row];
            given += tenths[c];
        }
        std::array<int, 5> order = {0, 1, 2, 3, 4};
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
        for (int k = 0; given < 1000; ++k, ++given) ++tenths[order[k]];
        for (int c = 0; c < 5; ++c) t.percent[row][c] = static_cast<double>(tenths[c]) / 10.0;
    }
    return t;
}

namespace {
constexpr const char* kRowNames[2] = {"hearsay", "not_hearsay"};
constexpr const char* kColumnTitles[5] = {"Very Neg", "Negative", "Neutral", "Positive", "Very Pos"};
}  // namespace

void write_crosstab_csv(std::ostream& out, const CrossTab& t) {
    csv::Row header{"group"};
    for (auto c : kSentimentClasses) header.push_back(sentiment_class_name(c) + "_pct");
    for (auto c : kSentimentClasses) header.push_back(sentiment_class_name(c) + "_count");
    header.push_back("total");
    csv::write_row(out, header);
    for (int row = 0; row < 2; ++row) {
        csv::Row r{kRowNames[row]};
        for (int c = 0; c < 5; ++c) r.push_back(fmt::format("{:.1f}", t.percent[row][c]));
        for (int c = 0; c < 5; ++c) r.push_back(std::to_string(t.counts[row][c]));
        r.push_back(std::to_string(t.totals[row]));
        csv::write_row(out, r);
    }
}

std::string render_crosstab(const CrossTab& t) {
    std::string s = fmt::format("{:<12}", "");
    for (auto* h : kColumnTitles) s += fmt::format("{:>10}", h);
    s += fmt::format("{:>8}\n", "n");
    const char* rows[2] = {"Hearsay", "Not Hearsay"};
    for (int row = 0; row < 2; ++row) {
        s += fmt::format("{:<12}", rows[row]);
        for (int c = 0; c < 5; ++c) s += fmt::format("{:>9.1f}%", t.percent[row][c]);
        s += fmt::format("{:>8}\n", t.totals[row]);
    }
    return s;
}

// ---- Keywords ----------------------------------------------------------------

void to_json(json& j, const KeywordReport& r) {
    j = json{{"community_id", r.community_id}, {"keywords", r.keywords}, {"uniqueness_note", r.uniqueness_note}};
}

void from_json(const json& j, KeywordReport& r) {
    r.community_id = j.at("community_id").get<int>();
    r.keywords = j.at("keywords").get<std::vector<std::string>>();
    r.uniqueness_note = j.value("uniqueness_note", "");
}

namespace {

std::string clean_keyword(std::string_view s) {
    std::string k = text::collapse_spaces(s);
    for (auto p = k.find("**"); p != std::string::npos; p = k.find("**")) k.erase(p, 2);
    return strip_chars(text::trim(k), " .,;:\"'`*");
}

}  // namespace

KeywordReport parse_keywords(std::string_view response) {
    std::string s(response);
    std::erase(s, '\r');
    KeywordReport r;

    static const std::regex note_re(R"((?:community\s+)?uniqueness\s*:)", std::regex::icase);
    std::smatch nm;
    std::string body = s;
    bool has_note = false;
    if (std::regex_search(s, nm, note_re)) {
        body = nm.prefix().str();
        r.uniqueness_note = text::trim(nm.suffix().str());
        has_note = true;
    }

    static const std::regex num_re(R"((?:^|\s)\d{1,2}[.)]\s+)");
    std::vector<std::pair<std::size_t, std::size_t>> marks;  // (match start, item start)
    for (auto it = std::sregex_iterator(body.begin(), body.end(), num_re); it != std::sregex_iterator(); ++it)
        marks.emplace_back(static_cast<std::size_t>(it->position()),
                           static_cast<std::size_t>(it->position() + it->length()));
    std::size_t tail = std::string::npos;
    if (!marks.empty()) {
        for (std::size_t i = 0; i < marks.size(); ++i) {
            std::size_t end = i + 1 < marks.size() ? marks[i + 1].first : body.size();
            std::size_t nl = body.find('\n', marks[i].second);
            if (nl != std::string::npos && nl < end) end = nl;
            auto k = clean_keyword(std::string_view(body).substr(marks[i].second, end - marks[i].second));
            if (!k.empty()) r.keywords.push_back(k);
            tail = end;
        }
    } else {
        auto lines = text::split(body, '\n');
        bool bullets = false;
        for (const auto& line : lines) {
            auto t = text::trim(line);
            if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0 || t.rfind("\xE2\x80\xA2", 0) == 0) {
                bullets = true;
                auto k = clean_keyword(t.substr(t[0] == '\xE2' ? 3 : 2));
                if (!k.empty()) r.keywords.push_back(k);
            }
        }
        if (!bullets) {
            std::size_t pos = 0;
            for (const auto& line : lines) {
                pos += line.size() + 1;
                if (line.find(',') == std::string::npos) continue;
                auto t = line;
                if (auto colon = t.rfind(':'); colon != std::string::npos) t = t.substr(colon + 1);
                for (const auto& part : text::split(t, ',')) {
                    auto k = clean_keyword(part);
                    if (!k.empty()) r.keywords.push_back(k);
                }
                tail = std::min(pos, body.size());
                break;
            }
        }
    }
    if (!has_note && tail != std::string::npos && tail < body.size()) r.uniqueness_note = text::trim(body.substr(tail));
    return r;
}

namespace {

bool valid_keywords(const KeywordReport& r) {
    if (r.keywords.size() != 10) return false;
    std::set<std::string> seen;
    for (const auto& k : r.keywords)
        if (!seen.insert(text::to_lower(k)).second) return false;
    return true;
}

}  // namespace

KeywordReport extract_keywords(const builder::CommunityReport& report, llm::Gateway& gateway) {
    std::string body = report.title + "\n\n" + report.summary;
    for (const auto& f : report.key_findings) body += "\n- " + f;
    const std::string ctx = fmt::format("keywords, community {}", report.community_id);

    auto first = with_context(ctx, [&] { return gateway.complete(llm::tmpl::kKeywords, {{"text", body}}); });
    auto r = parse_keywords(first);
    if (!valid_keywords(r)) {
        auto second = with_context(ctx, [&] {
            return gateway.complete(llm::tmpl::kKeywordsReprompt, {{"previous", first}, {"text", body}});
        });
        r = parse_keywords(second);
        if (!valid_keywords(r))
            throw StructuredOutputError(
                fmt::format("{}: expected 10 distinct keywords, got {}", ctx, r.keywords.size()), second);
    }
    r.community_id = report.community_id;
    return r;
}

}  // namespace narrative::analytics
