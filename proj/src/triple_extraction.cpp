#include "narrative/triple_extraction.hpp"

#include <cctype>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "narrative/error.hpp"
#include "narrative/text.hpp"

namespace narrative::extraction {

using nlohmann::json;

namespace {

// Regular verbs: base form. -s, -ed and -ing forms are derived.
const char* const kRegularVerbs[] = {
    "accuse", "admit",   "answer",  "arrest",  "ask",     "attend",  "believe", "borrow",  "bury",
    "call",   "change",  "charge",  "check",   "claim",   "confess", "confirm", "contact", "convict",
    "cry",    "date",    "decide",  "deny",    "describe", "discover", "drop",   "email",   "end",
    "explain", "follow", "help",    "hate",    "identify", "insist", "interview", "investigate", "join",
    "kill",   "kiss",    "like",    "lie",     "live",    "look",    "love",    "marry",   "mention",
    "miss",   "move",    "murder",  "need",    "note",    "notice",  "page",    "park",    "pick",
    "plan",   "play",    "point",   "question", "receive", "recall", "remember", "report", "represent",
    "ask",    "seem",    "search",  "share",   "show",    "sign",    "start",   "stay",    "stop",
    "strangle", "suggest", "suspect", "talk", "testify", "text",    "track",   "trust",   "try",
    "turn",   "use",     "visit",   "wait",    "walk",    "want",    "watch",   "work",    "worry",
    "appeal", "argue",   "assume",  "collect", "defend",  "doubt",   "drive",   "guess",   "inform",
    "handle", "locate",  "mark",    "open",    "prove",   "phone",   "pray",    "record",  "reveal",
};

// Irregular verbs: base, past, participle.
const char* const kIrregularVerbs[][3] = {
    {"break", "broke", "broken"}, {"bring", "brought", "brought"}, {"buy", "bought", "bought"},
    {"catch", "caught", "caught"}, {"come", "came", "come"},      {"drive", "drove", "driven"},
    {"eat", "ate", "eaten"},       {"fall", "fell", "fallen"},    {"feel", "felt", "felt"},
    {"find", "found", "found"},    {"forget", "forgot", "forgotten"}, {"get", "got", "gotten"},
    {"give", "gave", "given"},     {"go", "went", "gone"},        {"hear", "heard", "heard"},
    {"hide", "hid", "hidden"},     {"hit", "hit", "hit"},         {"hold", "held", "held"},
    {"keep", "kept", "kept"},      {"know", "knew", "known"},     {"leave", "left", "left"},
    {"lend", "lent", "lent"},      {"lose", "lost", "lost"},      {"make", "made", "made"},
    {"mean", "meant", "meant"},    {"meet", "met", "met"},        {"pay", "paid", "paid"},
    {"put", "put", "put"},         {"read", "read", "read"},      {"ride", "rode", "ridden"},
    {"run", "ran", "run"},         {"say", "said", "said"},       {"see", "saw", "seen"},
    {"sell", "sold", "sold"},      {"send", "sent", "sent"},      {"sit", "sat", "sat"},
    {"sleep", "slept", "slept"},   {"speak", "spoke", "spoken"},  {"spend", "spent", "spent"},
    {"steal", "stole", "stolen"},  {"take", "took", "taken"},     {"teach", "taught", "taught"},
    {"tell", "told", "told"},      {"think", "thought", "thought"}, {"throw", "threw", "thrown"},
    {"understand", "understood", "understood"}, {"wake", "woke", "woken"}, {"wear", "wore", "worn"},
    {"win", "won", "won"},         {"write", "wrote", "written"}, {"become", "became", "become"},
    {"begin", "began", "begun"},   {"choose", "chose", "chosen"}, {"dig", "dug", "dug"},
    {"feed", "fed", "fed"},        {"fight", "fought", "fought"}, {"fly", "flew", "flown"},
    {"grow", "grew", "grown"},     {"hang", "hung", "hung"},      {"lead", "led", "led"},
    {"light", "lit", "lit"},       {"shoot", "shot", "shot"},     {"shut", "shut", "shut"},
    {"sing", "sang", "sung"},      {"stand", "stood", "stood"},   {"swear", "swore", "sworn"},
};

std::string ends_s(const std::string& base) {
    if (base.size() > 1 && base.back() == 'y' && std::string_view("aeiou").find(base[base.size() - 2]) == std::string_view::npos)
        return base.substr(0, base.size() - 1) + "ies";
    if (base.ends_with("s") || base.ends_with("sh") || base.ends_with("ch") || base.ends_with("x") ||
        base.ends_with("o"))
        return base + "es";
    return base + "s";
}

std::string ends_ed(const std::string& base) {
    if (base.ends_with("e")) return base + "d";
    if (base.size() > 1 && base.back() == 'y' && std::string_view("aeiou").find(base[base.size() - 2]) == std::string_view::npos)
        return base.substr(0, base.size() - 1) + "ied";
    if (base == "drop" || base == "stop" || base == "plan") return base + base.back() + "ed";
    return base + "ed";
}

std::string ends_ing(const std::string& base) {
    if (base.ends_with("ie")) return base.substr(0, base.size() - 2) + "ying";
    if (base.ends_with("e") && base != "see" && !base.ends_with("ee")) return base.substr(0, base.size() - 1) + "ing";
    if (base == "drop" || base == "stop" || base == "plan" || base == "run" || base == "sit" || base == "hit" ||
        base == "dig" || base == "win" || base == "put" || base == "shut" || base == "begin" || base == "forget")
        return base + base.back() + "ing";
    return base + "ing";
}

std::set<std::string> verb_forms() {
    std::set<std::string> out;
    for (const char* v : kRegularVerbs) {
        std::string b = v;
        out.insert(b);
        out.insert(ends_s(b));
        out.insert(ends_ed(b));
        out.insert(ends_ing(b));
    }
    for (const auto& row : kIrregularVerbs) {
        std::string b = row[0];
        out.insert(b);
        out.insert(ends_s(b));
        out.insert(ends_ing(b));
        out.insert(row[1]);
        out.insert(row[2]);
    }
    return out;
}

std::set<std::string> set_from(const json& j, const char* key, const std::set<std::string>& fallback) {
    if (!j.contains(key)) return fallback;
    std::set<std::string> out;
    for (const auto& w : j[key]) out.insert(text::to_lower(w.get<std::string>()));
    return out;
}

struct Word {
    std::string text;   // as written, punctuation stripped
    std::string lower;
    bool boundary = false;  // clause punctuation (, ; : --)
};

bool is_word_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u >= 0x80 || c == '\'' || c == '-' || c == '.';
}

std::vector<Word> tokenize(std::string_view sentence, const ExtractionLexicon& lx) {
    std::vector<Word> out;
    for (const auto& raw : text::split_whitespace(sentence)) {
        std::size_t b = 0, e = raw.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b])) &&
               static_cast<unsigned char>(raw[b]) < 0x80)
            ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1])) &&
               static_cast<unsigned char>(raw[e - 1]) < 0x80 && raw[e - 1] != '.')
            --e;
        // A trailing period survives only on abbreviations like "Mr.".
        std::string core = raw.substr(b, e - b);
        while (!core.empty() && core.back() == '.') {
            auto stem = text::to_lower(std::string_view(core).substr(0, core.size() - 1));
            if (lx.abbreviations.count(stem)) break;
            core.pop_back();
        }
        bool leading_break = b > 0 && std::string_view(raw).substr(0, b).find_first_of(";:") != std::string::npos;
        if (leading_break && !out.empty()) out.back().boundary = true;
        if (!core.empty()) {
            bool all_word = true;
            for (char c : core) all_word = all_word && is_word_char(c);
            if (all_word) out.push_back({core, text::to_lower(core), false});
        }
        std::string tail = raw.substr(e);
        if (tail.find_first_of(",;:") != std::string::npos || raw == "--" || raw == "-") {
            if (!out.empty()) out.back().boundary = true;
        }
    }
    return out;
}

}  // namespace

ExtractionLexicon ExtractionLexicon::defaults() {
    ExtractionLexicon lx;
    lx.determiners = {"the", "a", "an", "this", "that", "these", "those", "his", "her", "their", "its", "my",
                      "our", "your", "some", "any", "every", "each", "no", "another", "all", "both"};
    lx.pronouns = {"i",  "he",  "she",  "they",   "it",      "we",       "you",      "him",    "her",
                   "them", "us", "me", "someone", "somebody", "everyone", "everybody", "nobody", "something",
                   "anyone", "anything", "everything", "nothing", "this", "that"};
    lx.auxiliaries = {"am",    "is",    "are", "was",  "were",  "be",     "been",  "being", "have",
                      "has",   "had",   "do",  "does", "did",   "will",   "would", "shall", "should",
                      "can",   "could", "may", "might", "must", "cannot", "gonna"};
    lx.do_support = {"do", "does", "did"};
    lx.negators = {"not", "never", "n't"};
    lx.particles = {"up", "down", "out", "off", "back", "away", "over", "around"};
    lx.prepositions = {"to",     "at",    "in",      "on",     "with",  "from",    "for",    "about",
                       "into",   "onto",  "by",      "of",     "after", "before",  "during", "through",
                       "near",   "under", "behind",  "across", "toward", "towards", "against", "without",
                       "inside", "outside", "between", "like",  "since", "until"};
    lx.clause_breaks = {"and",  "but",   "or",   "so",    "because", "although", "though", "while", "whereas",
                        "that", "which", "who",  "whom",  "whose",   "where",    "if",     "then",  "when",
                        "unless", "whether", "yet"};
    lx.discourse = {"well", "so", "now", "then", "also", "just", "actually", "really", "basically", "anyway",
                    "okay", "ok", "yeah", "um", "uh", "like", "oh", "still", "even", "only", "apparently"};
    lx.verbs = verb_forms();
    lx.non_verbs = {"need", "red", "bed", "shed", "hundred", "seed", "feed", "speed", "bleed", "indeed",
                    "wed", "fed", "led", "ted", "ned", "ed", "fred", "reed", "greed", "weed", "sled", "steed",
                    "breed", "wicked", "naked", "sacred", "rugged", "ragged", "beloved", "crooked", "dogged",
                    "interested", "tired", "scared", "worried", "used", "supposed", "married"};
    lx.abbreviations = {"mr", "mrs", "ms", "dr", "st", "jr", "sr", "det", "lt", "sgt", "prof", "vs", "no"};
    return lx;
}

ExtractionLexicon ExtractionLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open extraction lexicon " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("extraction lexicon " + path.string() + ": " + e.what());
    }
    auto d = defaults();
    ExtractionLexicon lx;
    lx.determiners = set_from(j, "determiners", d.determiners);
    lx.pronouns = set_from(j, "pronouns", d.pronouns);
    lx.auxiliaries = set_from(j, "auxiliaries", d.auxiliaries);
    lx.do_support = set_from(j, "do_support", d.do_support);
    lx.negators = set_from(j, "negators", d.negators);
    lx.particles = set_from(j, "particles", d.particles);
    lx.prepositions = set_from(j, "prepositions", d.prepositions);
    lx.clause_breaks = set_from(j, "clause_breaks", d.clause_breaks);
    lx.discourse = set_from(j, "discourse", d.discourse);
    lx.verbs = d.verbs;
    if (j.contains("extra_verbs"))
        for (const auto& v : j["extra_verbs"]) lx.verbs.insert(text::to_lower(v.get<std::string>()));
    lx.non_verbs = set_from(j, "non_verbs", d.non_verbs);
    lx.abbreviations = set_from(j, "abbreviations", d.abbreviations);
    return lx;
}

PatternExtractor::PatternExtractor(ExtractionLexicon lexicon) : lexicon_(std::move(lexicon)) {}

namespace {

struct ClauseContext {
    const ExtractionLexicon& lx;

    bool is_function(const std::string& w) const {
        return lx.determiners.count(w) || lx.auxiliaries.count(w) || lx.negators.count(w) ||
               lx.prepositions.count(w) || lx.clause_breaks.count(w);
    }

    bool is_verb(const std::string& w) const {
        if (lx.non_verbs.count(w)) return false;
        if (lx.verbs.count(w)) return true;
        return w.size() > 4 && w.ends_with("ed") && !is_function(w);
    }

    bool is_negator(const std::string& w) const { return lx.negators.count(w) > 0 || w.ends_with("n't"); }

    /// Content word usable inside a noun phrase.
    bool is_np_word(const Word& w) const {
        const auto& l = w.lower;
        if (lx.pronouns.count(l)) return true;
        if (is_function(l) || lx.discourse.count(l)) return false;
        if (is_verb(l) && !std::isupper(static_cast<unsigned char>(w.text[0]))) return false;
        return true;
    }

    void run(const std::vector<Word>& words, std::vector<kg::Triple>& out) const {
        const std::size_t n = words.size();
        // Locate the verb group: first verb or auxiliary preceded by a noun-phrase word.
        std::size_t v = n;
        for (std::size_t i = 1; i < n; ++i) {
            const auto& l = words[i].lower;
            bool verbish = lx.auxiliaries.count(l) || is_verb(l) || is_negator(l);
            if (!verbish) continue;
            if (!is_np_word(words[i - 1])) continue;
            if (lx.determiners.count(words[i - 1].lower) && !lx.pronouns.count(words[i - 1].lower)) continue;
            v = i;
            break;
        }
        if (v == n) return;

        // Subject: maximal run of NP words (with determiners) ending at v-1.
        std::size_t s = v;
        while (s > 0) {
            const auto& w = words[s - 1];
            if (is_np_word(w) || lx.determiners.count(w.lower)) {
                --s;
                if (lx.determiners.count(w.lower) && !lx.pronouns.count(w.lower)) break;
            } else {
                break;
            }
        }
        while (s < v && lx.determiners.count(words[s].lower) && s + 1 == v) ++s;
        if (s == v) return;
        std::vector<std::string> subject;
        for (std::size_t i = s; i < v; ++i) subject.push_back(words[i].text);

        // Verb group.
        std::vector<std::string> aux;
        bool negated = false;
        std::size_t i = v;
        std::string main_verb;
        while (i < n) {
            const auto& l = words[i].lower;
            if (is_negator(l) && !lx.auxiliaries.count(l)) {
                negated = true;
                ++i;
                continue;
            }
            if (lx.auxiliaries.count(l) || l.ends_with("n't")) {
                if (l.ends_with("n't")) negated = true;
                aux.push_back(words[i].text);
                ++i;
                continue;
            }
            break;
        }
        if (i < n && is_verb(words[i].lower)) {
            main_verb = words[i].text;
            ++i;
        } else if (!aux.empty()) {
            main_verb = aux.back();
            aux.pop_back();
        } else {
            return;
        }
        if (!main_verb.empty() && lx.do_support.count(text::to_lower(main_verb)) == 0) {
            // Drop do-support ("did not kill" -> "kill").
            std::vector<std::string> kept;
            for (const auto& a : aux)
                if (!lx.do_support.count(text::to_lower(a))) kept.push_back(a);
            aux = std::move(kept);
        }
        std::vector<std::string> predicate = aux;
        predicate.push_back(main_verb);
        while (i < n && lx.particles.count(words[i].lower) && !words[i - 1].boundary) {
            predicate.push_back(words[i].text);
            ++i;
        }
        if (i < n && lx.prepositions.count(words[i].lower) && !words[i - 1].boundary) {
            predicate.push_back(words[i].text);
            ++i;
        }
        if (i > 0 && words[i - 1].boundary) return;

        // Object noun phrase.
        std::size_t o = i;
        if (o < n && lx.determiners.count(words[o].lower) && !words[o].boundary) {
            // "her" alone is an object pronoun, "her car" a determiner.
            bool bare_pronoun = lx.pronouns.count(words[o].lower) && (o + 1 == n || !is_np_word(words[o + 1]));
            if (!bare_pronoun) ++o;
        }
        std::size_t e = o;
        while (e < n && is_np_word(words[e])) {
            if (e > o && lx.pronouns.count(words[e].lower) && !lx.determiners.count(words[e].lower)) break;
            ++e;
            if (words[e - 1].boundary) break;
        }
        if (e == o) return;

        // "told police AdnanSyed killed HaeMinLee": an embedded clause follows.
        if (e < n && (is_verb(words[e].lower) || lx.auxiliaries.count(words[e].lower)) && !words[e - 1].boundary) {
            std::vector<Word> rest(words.begin() + static_cast<std::ptrdiff_t>(o), words.end());
            run(rest, out);
            return;
        }

        std::vector<std::string> object;
        for (std::size_t k = i; k < e; ++k) object.push_back(words[k].text);

        kg::Triple t;
        t.head = text::join(subject, " ");
        t.relation = (negated ? "negated:" : "") + text::join(predicate, " ");
        t.tail = text::join(object, " ");
        t.weight = 1.0;
        out.push_back(std::move(t));
    }
};

}  // namespace

std::vector<kg::Triple> PatternExtractor::extract(std::string_view sentence) const {
    std::vector<kg::Triple> out;
    auto words = tokenize(sentence, lexicon_);
    ClauseContext ctx{lexicon_};

    // Split into clauses at coordinators, subordinators and clause punctuation.
    std::vector<Word> clause;
    auto flush = [&] {
        while (!clause.empty() && lexicon_.discourse.count(clause.front().lower)) clause.erase(clause.begin());
        if (clause.size() >= 2) ctx.run(clause, out);
        clause.clear();
    };
    for (const auto& w : words) {
        if (lexicon_.clause_breaks.count(w.lower)) {
            flush();
            continue;
        }
        clause.push_back(w);
        if (w.boundary) flush();
    }
    flush();
    return out;
}

std::vector<std::string> split_sentences(std::string_view input, const ExtractionLexicon& lexicon) {
    std::vector<std::string> out;
    std::string cur;
    auto push = [&] {
        auto t = text::trim(cur);
        if (!t.empty()) out.push_back(std::move(t));
        cur.clear();
    };
    for (std::size_t i = 0; i < input.size(); ++i) {
        char c = input[i];
        if (c == '\n') {
            push();
            continue;
        }
        cur += c;
        if (c == '!' || c == '?') {
            push();
        } else if (c == '.') {
            bool at_end = i + 1 == input.size() || std::isspace(static_cast<unsigned char>(input[i + 1]));
            if (!at_end) continue;
            // Look back at the word ending in this period.
            std::size_t b = cur.size() - 1;
            while (b > 0 && !std::isspace(static_cast<unsigned char>(cur[b - 1]))) --b;
            std::string word = text::to_lower(cur.substr(b, cur.size() - 1 - b));
            bool abbrev = lexicon.abbreviations.count(word) > 0 || (word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0])));
            if (!abbrev) push();
        }
    }
    push();
    return out;
}

std::vector<kg::Triple> extract_triples(std::string_view sentence) {
    static const PatternExtractor extractor;
    return extractor.extract(sentence);
}

kg::KnowledgeGraph build_traditional_kg(const std::vector<ingest::Chunk>& chunks, const TripleExtractor& extractor) {
    kg::KnowledgeGraph graph;
    ExtractionLexicon lx;
    if (auto* pe = dynamic_cast<const PatternExtractor*>(&extractor)) lx = pe->lexicon();
    else lx = ExtractionLexicon::defaults();
    for (const auto& chunk : chunks) {
        for (const auto& sentence : split_sentences(chunk.text, lx)) {
            try {
                for (auto t : extractor.extract(sentence)) {
                    t.evidence = {chunk.id};
                    graph.upsert_triple(t);
                }
            } catch (const std::exception& e) {
                spdlog::warn("skipping sentence in {}: {}", chunk.id, e.what());
            }
        }
    }
    return graph;
}

kg::KnowledgeGraph build_traditional_kg(const std::vector<ingest::Chunk>& chunks) {
    return build_traditional_kg(chunks, PatternExtractor{});
}

}  // namespace narrative::extraction
