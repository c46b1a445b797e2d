#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "narrative/analytics.hpp"
#include "narrative/csv.hpp"
#include "narrative/error.hpp"
#include "narrative/text.hpp"

namespace narrative::analytics {

SentimentLexicon::SentimentLexicon()
    : boosters_up{"absolutely", "amazingly",   "awfully",      "completely", "considerably", "decidedly",
                  "deeply",     "enormously",  "entirely",     "especially", "exceptionally", "extremely",
                  "fabulously", "fully",       "greatly",      "highly",     "hugely",       "incredibly",
                  "intensely",  "majorly",     "more",         "most",       "particularly", "purely",
                  "quite",      "really",      "remarkably",   "so",         "substantially", "thoroughly",
                  "totally",    "tremendously", "unbelievably", "unusually", "utterly",      "very"},
      boosters_down{"almost",   "barely",    "hardly", "kinda",    "less",     "little", "marginally",
                    "occasionally", "partly", "scarcely", "slightly", "somewhat", "sorta"},
      negators{"aint",    "arent",   "cannot",   "cant",     "couldnt", "darent", "didnt",   "doesnt", "dont",
               "hadnt",   "hasnt",   "havent",   "isnt",     "mightnt", "mustnt", "neither", "neednt", "never",
               "none",    "nope",    "nor",      "not",      "nothing", "nowhere", "oughtnt", "shant", "shouldnt",
               "wasnt",   "werent",  "without",  "wont",     "wouldnt", "rarely", "seldom",  "despite"} {}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("sentiment lexicon not found: " + path.string());
    SentimentLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = text::split(line, '\t');
        if (fields.size() < 2) throw ConfigError(fmt::format("{}:{}: expected token<TAB>valence", path.string(), lineno));
        try {
            lex.set(fields[0], std::stod(fields[1]));
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("{}:{}: bad valence '{}'", path.string(), lineno, fields[1]));
        }
    }
    return lex;
}

std::optional<double> SentimentLexicon::valence(std::string_view lower_token) const {
    auto it = valence_.find(std::string(lower_token));
    if (it == valence_.end()) return std::nullopt;
    return it->second;
}

namespace {

struct Token {
    std::string raw;
    std::string lower;
    bool caps = false;
};

std::string strip_edges(std::string_view w) {
    std::size_t b = 0, e = w.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
    return std::string(w.substr(b, e - b));
}

bool all_caps(const std::string& w) {
    bool letter = false;
    for (unsigned char c : w) {
        if (std::islower(c)) return false;
        if (std::isupper(c)) letter = true;
    }
    return letter;
}

bool is_negator(const SentimentLexicon& lex, const std::string& lower) {
    if (lex.negators.count(lower)) return true;
    return lower.find("n't") != std::string::npos;
}

}  // namespace

double sentiment_score(std::string_view input, const SentimentLexicon& lex, const SentimentRules& rules) {
    std::vector<Token> toks;
    for (const auto& w : text::split_whitespace(input)) {
        auto s = strip_edges(w);
        if (s.size() <= 1) continue;
        toks.push_back({s, text::to_lower(s), all_caps(s)});
    }
    if (toks.empty()) return 0.0;
    // Caps only count as emphasis when the text is not shouted throughout.
    std::size_t caps = std::count_if(toks.begin(), toks.end(), [](const Token& t) { return t.caps; });
    const bool caps_differ = caps > 0 && caps < toks.size();

    double sum = 0.0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (lex.boosters_up.count(t.lower) || lex.boosters_down.count(t.lower)) continue;
        auto v = lex.valence(t.lower);
        if (!v || *v == 0.0) continue;
        double valence = *v;
        const double sign = valence > 0 ? 1.0 : -1.0;
        if (t.caps && caps_differ) valence += sign * rules.caps_increment;

        for (int d = 1; d <= rules.negation_window && static_cast<std::size_t>(d) <= i; ++d) {
            const auto& prev = toks[i - d];
            double scalar = 0.0;
            if (lex.boosters_up.count(prev.lower)) scalar = rules.booster_increment;
            else if (lex.boosters_down.count(prev.lower)) scalar = -rules.booster_increment;
            if (scalar != 0.0) {
                if (prev.caps && caps_differ) scalar += scalar > 0 ? rules.caps_increment : -rules.caps_increment;
                if (d == 2) scalar *= 0.95;
                if (d == 3) scalar *= 0.9;
                valence += sign * scalar;
            }
        }
        for (int d = 1; d <= rules.negation_window && static_cast<std::size_t>(d) <= i; ++d)
            if (is_negator(lex, toks[i - d].lower)) valence *= rules.negation_scalar;
        sum += valence;
    }
    if (sum == 0.0) return 0.0;

    auto bangs = std::min<std::size_t>(std::count(input.begin(), input.end(), '!'),
                                       static_cast<std::size_t>(rules.max_exclamations));
    sum += (sum > 0 ? 1.0 : -1.0) * static_cast<double>(bangs) * rules.exclamation_increment;

    double score = sum / std::sqrt(sum * sum + rules.alpha);
    return std::clamp(score, -1.0, 1.0);
}

std::vector<double> SentimentSeries::raw() const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.score);
    return out;
}

SentimentSeries score_segments(const std::vector<ingest::LabeledSegment>& segments, const SentimentLexicon& lexicon,
                               const SentimentRules& rules) {
    SentimentSeries s;
    for (const auto& seg : segments) s.points.push_back({seg.label, sentiment_score(seg.segment.text, lexicon, rules)});
    return s;
}

std::vector<double> rolling_average(const std::vector<double>& series, int window) {
    if (window < 1) throw ValidationError("rolling window must be >= 1");
    const std::size_t n = series.size();
    if (static_cast<std::size_t>(window) > n)
        throw ValidationError(fmt::format("rolling window {} exceeds series length {}", window, n));
    const std::size_t left = static_cast<std::size_t>(window) / 2;
    const std::size_t right = static_cast<std::size_t>(window) - 1 - left;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t l = left, r = right;
        if (i < left || n - 1 - i < right) l = r = std::min({i, n - 1 - i, right});
        out[i] = (prefix[i + r + 1] - prefix[i - l]) / static_cast<double>(l + r + 1);
    }
    return out;
}

double segment_cost(const std::vector<double>& series, std::size_t begin, std::size_t end) {
    if (end <= begin) return 0.0;
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += series[i];
    mean /= static_cast<double>(end - begin);
    double c = 0.0;
    for (std::size_t i = begin; i < end; ++i) c += (series[i] - mean) * (series[i] - mean);
    return c;
}

ChangePointSet pelt_changepoints(const std::vector<double>& series, double penalty) {
    if (!(penalty > 0.0)) throw ValidationError("PELT penalty must be positive");
    const std::size_t n = series.size();
    if (n < 2) throw ValidationError("PELT needs at least 2 values");

    // Prefix sums about the overall mean keep the subtraction well conditioned.
    const double shift = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    std::vector<long double> s1(n + 1, 0.0L), s2(n + 1, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
        long double x = series[i] - shift;
        s1[i + 1] = s1[i] + x;
        s2[i + 1] = s2[i] + x * x;
    }
    auto cost = [&](std::size_t a, std::size_t b) -> double {
        long double sum = s1[b] - s1[a];
        long double c = (s2[b] - s2[a]) - sum * sum / static_cast<long double>(b - a);
        return static_cast<double>(std::max(c, 0.0L));
    };

    std::vector<double> F(n + 1, 0.0);
    std::vector<std::size_t> last(n + 1, 0);
    F[0] = -penalty;
    std::vector<std::size_t> candidates{0};
    for (std::size_t t = 1; t <= n; ++t) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        std::vector<double> partial(candidates.size());
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            std::size_t tau = candidates[j];
            partial[j] = F[tau] + cost(tau, t);
            if (partial[j] + penalty < best) {
                best = partial[j] + penalty;
                arg = tau;
            }
        }
        F[t] = best;
        last[t] = arg;
        // A start that is already worse than the optimum can never recover.
        std::vector<std::size_t> kept;
        for (std::size_t j = 0; j < candidates.size(); ++j)
            if (partial[j] <= F[t]) kept.push_back(candidates[j]);
        kept.push_back(t);
        candidates = std::move(kept);
    }

    ChangePointSet out;
    out.penalty = penalty;
    for (std::size_t t = n; t > 0; t = last[t])
        if (last[t] > 0) out.indices.push_back(last[t]);
    std::reverse(out.indices.begin(), out.indices.end());
    return out;
}

double default_penalty(const std::vector<double>& series) {
    const std::size_t n = series.size();
    if (n < 3) return 1.0;
    std::vector<double> d(n - 1);
    for (std::size_t i = 1; i < n; ++i) d[i - 1] = series[i] - series[i - 1];
    double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    var /= static_cast<double>(d.size() - 1);
    double p = 2.0 * (var / 2.0) * std::log(static_cast<double>(n));
    return p > 1e-9 ? p : 1e-9;
}

void write_sentiment_csv(std::ostream& out, const SentimentSeries& series, const ChangePointSet& cps) {
    csv::write_row(out, {"label", "raw", "smoothed", "is_changepoint"});
    std::vector<bool> mark(series.points.size(), false);
    for (auto i : cps.indices)
        if (i < mark.size()) mark[i] = true;
    for (std::size_t i = 0; i < series.points.size(); ++i) {
        std::string smooth = i < series.smoothed.size() ? fmt::format("{:.6f}", series.smoothed[i]) : "";
        csv::write_row(out, {series.points[i].label.render(), fmt::format("{:.6f}", series.points[i].score), smooth,
                             mark[i] ? "1" : "0"});
    }
}

void write_sentiment_svg(std::ostream& out, const SentimentSeries& series, const ChangePointSet& cps) {
    constexpr double W = 1000, H = 320, pad = 30;
    const auto& ys = series.smoothed.empty() ? series.raw() : series.smoothed;
    const std::size_t n = ys.size();
    auto x_of = [&](std::size_t i) { return pad + (n > 1 ? (W - 2 * pad) * i / static_cast<double>(n - 1) : 0.0); };
    auto y_of = [&](double v) { return H / 2 - v * (H / 2 - pad); };
    out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)", W, H, W, H)
        << "\n";
    out << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4"/>)", pad, y_of(0),
                       W - pad, y_of(0))
        << "\n";
    out << R"(<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points=")";
    for (std::size_t i = 0; i < n; ++i) out << (i ? " " : "") << fmt::format("{:.2f},{:.2f}", x_of(i), y_of(ys[i]));
    out << "\"/>\n";
    for (auto i : cps.indices) {
        if (i >= n) continue;
        out << fmt::format(R"(<line x1="{0:.2f}" y1="{1}" x2="{0:.2f}" y2="{2}" stroke="#d62728"/>)", x_of(i), pad, H - pad)
            << "\n";
        out << fmt::format(R"(<text x="{:.2f}" y="{}" font-size="10" fill="#d62728">{}</text>)", x_of(i) + 2, pad - 4,
                           series.points[i].label.render())
            << "\n";
    }
    out << "</svg>\n";
}

}  // namespace narrative::analytics
