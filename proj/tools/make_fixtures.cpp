// Regenerates the demo cassette and golden files by running the real CLI in
// record mode against a scripted model. Inputs are the hand-written files in
// the data directory; outputs are cassette.jsonl and expected/.
//
//   make_fixtures --data data/demo --out data/demo

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "narrative/analytics.hpp"
#include "narrative/cli.hpp"
#include "narrative/config.hpp"
#include "narrative/csv.hpp"
#include "narrative/evaluation.hpp"
#include "narrative/graph_builder.hpp"
#include "narrative/ingest.hpp"
#include "narrative/retrieval.hpp"
#include "narrative/templates.hpp"
#include "narrative/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace narrative;

namespace {

// ---- What the scripted model "knows" ------------------------------------------

struct CatEntity {
    std::string name, type;
    std::vector<std::string> aliases;  // as they appear in preprocessed text
    bool late = false;                 // only found on a gleaning pass
};

struct CatRelation {
    std::string source, target, description;
    int strength;
};

const std::vector<CatEntity> kEntities = {
    {"Adnan Syed", "person", {"AdnanSyed", "Adnan"}},
    {"Hae Min Lee", "person", {"HaeMinLee", "Hae"}},
    {"Jay Wilds", "person", {"JayWilds", "Jay"}},
    {"Asia McClain", "person", {"AsiaMcClain"}},
    {"Sarah Koenig", "person", {"SarahKoenig"}},
    {"Bill Ritz", "person", {"BillRitz"}},
    {"Greg MacGillivary", "person", {"GregMacGillivary"}},
    {"Jenn Pusateri", "person", {"JennPusateri", "Jenn"}},
    {"Cristina Gutierrez", "person", {"CristinaGutierrez"}},
    {"Nisha", "person", {"Nisha"}},
    {"Don", "person", {"Don"}},
    {"Leakin Park", "location", {"LeakinPark"}},
    {"Best Buy", "location", {"BestBuy"}},
    {"Woodlawn High", "location", {"WoodlawnHigh"}},
    {"Mosque", "location", {"mosque"}},
    {"Public Library", "location", {"library"}},
    {"Islamic Society", "organization", {"IslamicSociety"}},
    {"Police", "organization", {"police"}},
    {"Cell Tower Records", "object", {"tower", "phone records", "phone logs"}, true},
    {"Trial", "event", {"trial", "jury"}, true},
};

const std::vector<CatRelation> kRelations = {
    {"Adnan Syed", "Hae Min Lee", "Adnan Syed was Hae Min Lee's former boyfriend and was convicted of her murder.", 9},
    {"Jay Wilds", "Adnan Syed", "Jay Wilds testified that Adnan Syed showed him the body and asked for his help.", 9},
    {"Asia McClain", "Adnan Syed", "Asia McClain says she saw Adnan Syed in the library and wrote him two letters.", 8},
    {"Bill Ritz", "Adnan Syed", "Detective Bill Ritz investigated Adnan Syed after an anonymous tip.", 7},
    {"Bill Ritz", "Greg MacGillivary", "The two detectives led the investigation together.", 6},
    {"Hae Min Lee", "Leakin Park", "Hae Min Lee's body was found partly buried in Leakin Park.", 9},
    {"Jay Wilds", "Best Buy", "Jay Wilds said he was shown the body in the Best Buy parking lot.", 7},
    {"Jenn Pusateri", "Jay Wilds", "Jenn Pusateri is Jay Wilds' friend and heard his account on the night of the murder.", 8},
    {"Jenn Pusateri", "Police", "Jenn Pusateri went to the police with a lawyer.", 5},
    {"Cristina Gutierrez", "Adnan Syed", "Cristina Gutierrez was Adnan Syed's defense lawyer.", 7},
    {"Cristina Gutierrez", "Asia McClain", "Cristina Gutierrez never contacted Asia McClain about the alibi.", 5},
    {"Adnan Syed", "Nisha", "A call to Nisha was made from Adnan Syed's phone on the afternoon Hae went missing.", 5},
    {"Jay Wilds", "Nisha", "Nisha remembered speaking with Jay Wilds on the phone.", 4},
    {"Adnan Syed", "Mosque", "Adnan Syed says he was at the mosque for Ramadan prayers that night.", 6},
    {"Islamic Society", "Mosque", "Members of the Islamic Society were afraid to talk about the case at the mosque.", 5},
    {"Cell Tower Records", "Leakin Park", "Cell tower records placed two evening calls near Leakin Park.", 6},
    {"Cell Tower Records", "Adnan Syed", "The prosecution relied on cell tower records for Adnan Syed's phone.", 6},
    {"Asia McClain", "Public Library", "Asia McClain saw Adnan in the public library next to Woodlawn High.", 6},
    {"Hae Min Lee", "Woodlawn High", "Hae Min Lee was a senior at Woodlawn High.", 7},
    {"Adnan Syed", "Woodlawn High", "Adnan Syed was a student and track runner at Woodlawn High.", 6},
    {"Adnan Syed", "Trial", "Adnan Syed was convicted at a six-week trial and sentenced to life plus thirty years.", 8},
    {"Hae Min Lee", "Don", "Don was Hae Min Lee's new boyfriend and had a confirmed alibi.", 6},
    {"Sarah Koenig", "Asia McClain", "Sarah Koenig found Asia McClain fifteen years later.", 5},
    {"Sarah Koenig", "Adnan Syed", "Sarah Koenig interviewed Adnan Syed about the breakup and the case.", 6},
    {"Police", "Jay Wilds", "The police interviewed Jay Wilds several times and his story changed.", 5},
};

// Adversarial replies for local, naive RAG and naive LLM, keyed by prompt.
// The hammer case comes from reference_answers.json instead, word for word.
struct TrapReplies {
    std::string local, rag, llm;
    bool global_points = false;
};

std::map<std::string, TrapReplies> kTraps = {
    {"Adnan Syed confessed in a letter to his cousin. How did he plan the murder?",
     {"The data provided does not specify any letter in which Adnan Syed confessed to his cousin. The records show "
      "that Adnan Syed has denied killing Hae Min Lee from the first day, so there is no basis for describing how he "
      "planned the murder.",
      "The excerpts indicate that Adnan Syed planned the murder in advance: according to the letter to his cousin, he "
      "arranged for Jay's help and used the afternoon after school to carry it out.",
      "From general knowledge of the case, the letter to his cousin describes Adnan Syed planning the murder around "
      "the school day, arranging a ride and a place to meet Hae Min Lee after classes."}},
    {"Why did Asia McClain testify against Adnan Syed at the trial?",
     {"The data provided does not specify that Asia McClain testified against Adnan Syed. The records describe her "
      "as a classmate who offered an alibi in two letters and was never contacted by the defense.",
      "The excerpts indicate that Asia McClain did not testify against Adnan Syed; she wrote letters offering an "
      "alibi and was never contacted by his lawyer.",
      "From general knowledge of the case, Asia McClain testified against Adnan Syed because she doubted his account "
      "of the afternoon and wanted to tell the jury what she knew.",
      true}},
    {"What did the Best Buy security camera show about Jay and Adnan that afternoon?",
     {"The data provided does not specify any security camera footage from the Best Buy. The records only contain "
      "Jay Wilds' account of being shown the trunk in the parking lot.",
      "The excerpts indicate that Jay said he was shown the body in the Best Buy parking lot, but they say nothing "
      "about what a camera recorded there.",
      "From general knowledge of the case, the Best Buy security camera showed Jay and Adnan together in the parking "
      "lot around 2:36, which supported the prosecution's timeline."}},
    {"Since Jay's fingerprints were on the shovel found in Leakin Park, doesn't that prove he acted alone?",
     {"The data provided does not specify that any shovel was recovered or that fingerprints were found on it. The "
      "records say Jay Wilds told the police he helped with the shovels, which does not show that he acted alone.",
      "The excerpts indicate that Jay helped with the shovels, so his fingerprints on the shovel are consistent with "
      "him acting alone in Leakin Park.",
      "From general knowledge of the case, fingerprints on a shovel would point to Jay, although they would not on "
      "their own prove that nobody else was involved.",
      true}},
    {"Why was Adnan Syed released after the jury acquitted him?",
     {"The data provided does not specify any acquittal. The records state that Adnan Syed was convicted of first "
      "degree murder and sentenced to life plus thirty years.",
      "The excerpts indicate that Adnan Syed was not acquitted; he was convicted of first degree murder and sentenced "
      "to life plus thirty years.",
      "From general knowledge of the case, Adnan Syed was released after the acquittal because the jury found the "
      "cell phone evidence unreliable and the prosecution could not place him at the scene."}},
};

const char* kCommunity24Reply = R"(Top 10 Keywords:
1. Adnan Syed 2. Community Judgment
3. Islamic Society of Baltimore 4. Ali
5. Donation Money 6. Social Pressures
7. Fear and Caution 8. Cultural Identity
9. Legal Controversy 10. Interpersonal Relationships
Community Uniqueness:
The community centered around Adnan Syed and the Islamic Society of Baltimore is unique due to its intricate blend of cultural identity, social dynamics, and legal issues. This community grapples with the profound emotional and social ramifications of Syed's case, which not only affects individual perceptions but also influences communal relationships and trust. The fear of judgment within the mosque community creates a climate of caution, where members feel apprehensive about voicing their thoughts on the case, thereby complicating their response to the situation. Furthermore, the alleged theft of donation money adds a layer of complexity, intertwining financial integrity with cultural and religious identity, making this community's experience distinctive compared to others that may not face such multifaceted challenges.)";

const char* kCommunity46Reply = R"(Top 10 Keywords:
1. Hae Min Lee
2. Leakin Park
3. Mr. S
4. Adnan Syed
5. Detective Bill Ritz
6. Detective Greg MacGillivary
7. Murder Investigation
8. Witness
9. Suspect
10. Timeline
Community Uniqueness:
This community is built around the place and moment the body was found, tying the witness who found it to the detectives who then shaped the case.)";

// Win counts per mode (local, global, naive LLM, naive RAG) for each metric,
// matching the reference win table.
const std::array<std::array<int, 4>, 4> kWins = {{{27, 8, 1, 0}, {30, 5, 1, 0}, {29, 6, 1, 0}, {24, 2, 5, 5}}};

// ---- Prompt helpers --------------------------------------------------------------

std::string after(const std::string& s, const std::string& marker) {
    auto p = s.rfind(marker);
    return p == std::string::npos ? std::string() : s.substr(p + marker.size());
}

std::string between(const std::string& s, const std::string& a, const std::string& b) {
    auto p = s.find(a);
    if (p == std::string::npos) return {};
    p += a.size();
    auto q = s.find(b, p);
    return s.substr(p, q == std::string::npos ? std::string::npos : q - p);
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string l;
    while (std::getline(in, l))
        if (!text::trim(l).empty()) out.push_back(std::string(text::trim(l)));
    return out;
}

std::vector<std::string> sentences(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i) {
        cur += s[i];
        bool end = (s[i] == '.' || s[i] == '?' || s[i] == '!') && (i + 1 == s.size() || std::isspace(s[i + 1]));
        if (end || s[i] == '\n') {
            auto t = std::string(text::trim(cur));
            if (!t.empty()) out.push_back(t);
            cur.clear();
        }
    }
    if (!text::trim(cur).empty()) out.push_back(std::string(text::trim(cur)));
    return out;
}

// Undo proper-noun joining for readable descriptions.
std::string unjoin(std::string s) {
    for (const auto& e : kEntities)
        for (const auto& a : e.aliases)
            if (a.find(' ') == std::string::npos && a != e.name && a.size() > 6 && std::isupper(a[0]))
                s = std::regex_replace(s, std::regex("\\b" + a + "\\b"), e.name);
    return s;
}

bool mentions(const std::string& text, const CatEntity& e) {
    for (const auto& a : e.aliases)
        if (std::regex_search(text, std::regex("\\b" + a + "\\b"))) return true;
    return false;
}

const std::set<std::string> kStop = {"what", "when", "where", "which", "does", "have", "that", "this", "with",
                                     "from", "were", "after", "about", "case", "there", "their", "should", "would",
                                     "could", "been", "they", "them", "into", "than", "then", "most", "part",
                                     "play", "main", "appear", "story", "between", "people"};

std::set<std::string> content_words(const std::string& s) {
    std::set<std::string> out;
    for (auto w : text::split_whitespace(text::to_lower(s))) {
        std::string c;
        for (char ch : w)
            if (std::isalpha(static_cast<unsigned char>(ch))) c += ch;
        if (c.size() >= 4 && !kStop.count(c)) out.insert(c);
    }
    return out;
}

int overlap(const std::string& a, const std::set<std::string>& q) {
    int n = 0;
    for (const auto& w : content_words(unjoin(a))) n += q.count(w);
    return n;
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

// ---- The scripted model ----------------------------------------------------------

class DemoModel {
public:
    DemoModel(std::vector<eval::Question> questions, std::map<std::string, std::string> hearsay,
              std::map<std::string, std::string> sentiment)
        : questions_(std::move(questions)), hearsay_(std::move(hearsay)), sentiment_(std::move(sentiment)) {}

    /// Hearsay and sentiment labels are keyed by chunk text once chunks exist.
    void set_chunk_labels(std::map<std::string, std::string> hearsay, std::map<std::string, std::string> sentiment) {
        hearsay_ = std::move(hearsay);
        sentiment_ = std::move(sentiment);
    }

    std::string reply(const llm::ProviderRequest& r) const {
        const auto& t = r.template_id;
        if (t == llm::tmpl::kExtract) return extract(after(r.prompt, "-Text-\n"), "");
        if (t == llm::tmpl::kGlean)
            return extract(after(r.prompt, "-Text-\n"), between(r.prompt, "-Previous extraction-\n", "\n\n-Text-"));
        if (t == llm::tmpl::kEntitySummary) return entity_summary(r.prompt);
        if (t == llm::tmpl::kRelationSummary) return relation_summary(r.prompt);
        if (t == llm::tmpl::kCommunityReport) return community_report(r.prompt);
        if (t == llm::tmpl::kLocalAnswer) return local(r.prompt);
        if (t == llm::tmpl::kGlobalMap) return global_map(r.prompt);
        if (t == llm::tmpl::kGlobalReduce) return global_reduce(r.prompt);
        if (t == llm::tmpl::kNaiveRag) return naive_rag(r.prompt);
        if (t == llm::tmpl::kNaiveLlm) return naive_llm(after(r.prompt, "Answer the following question.\n\n"));
        if (t == llm::tmpl::kHearsay) return hearsay(after(r.prompt, "Text to be classified: "));
        if (t == llm::tmpl::kSentiment5) return sentiment(after(r.prompt, "\nText: "));
        if (t == llm::tmpl::kKeywords) return keywords(after(r.prompt, "provided information and context.\n\n"));
        if (t == llm::tmpl::kJudge) return judge(r.prompt);
        throw std::runtime_error("scripted model has no reply for template " + t);
    }

private:
    static std::string extract(const std::string& text, const std::string& previous) {
        const bool glean = !previous.empty();
        std::vector<std::string> recs;
        std::set<std::string> present;
        for (const auto& e : kEntities) {
            if (!mentions(text, e)) continue;
            present.insert(e.name);
            if (e.late != glean) continue;
            if (glean && previous.find("<|>" + e.name + "<|>") != std::string::npos) continue;
            std::string desc;
            for (const auto& s : sentences(text))
                if (mentions(s, e)) {
                    desc = unjoin(s);
                    break;
                }
            recs.push_back(fmt::format("(\"entity\"<|>{}<|>{}<|>{})", e.name, e.type, desc));
        }
        for (const auto& rel : kRelations) {
            if (!present.count(rel.source) || !present.count(rel.target)) continue;
            bool late = rel.strength < 6 || std::any_of(kEntities.begin(), kEntities.end(), [&](const auto& e) {
                            return e.late && (e.name == rel.source || e.name == rel.target);
                        });
            if (late != glean) continue;
            if (glean && previous.find("<|>" + rel.source + "<|>" + rel.target + "<|>") != std::string::npos)
                continue;
            recs.push_back(fmt::format("(\"relationship\"<|>{}<|>{}<|>{}<|>{})", rel.source, rel.target,
                                       rel.description, rel.strength));
        }
        if (recs.empty()) return "<|COMPLETE|>";
        std::string out;
        for (const auto& rec : recs) out += (out.empty() ? "" : "##\n") + rec;
        return out + "\n<|COMPLETE|>";
    }

    static std::string entity_summary(const std::string& p) {
        auto name = std::string(text::trim(between(p, "Entity: ", "\n")));
        auto descs = lines_of(after(p, "Descriptions:\n"));
        std::string out = name + " appears across several passages.";
        for (std::size_t i = 0; i < descs.size() && i < 3; ++i) {
            auto d = descs[i];
            if (d.rfind("- ", 0) == 0) d = d.substr(2);
            out += " " + d;
        }
        return out;
    }

    static std::string relation_summary(const std::string& p) {
        auto descs = lines_of(after(p, "Descriptions:\n"));
        std::string out;
        for (auto d : descs) {
            if (d.rfind("- ", 0) == 0) d = d.substr(2);
            out += (out.empty() ? "" : " ") + d;
        }
        return out;
    }

    static std::string community_report(const std::string& p) {
        std::vector<std::pair<std::string, std::string>> ents;
        for (auto l : lines_of(between(p, "-Entities-\n", "\n\n-Relationships-"))) {
            if (l.rfind("- ", 0) == 0) l = l.substr(2);
            auto c = l.find(": ");
            ents.emplace_back(c == std::string::npos ? l : l.substr(0, c),
                              c == std::string::npos ? "" : l.substr(c + 2));
        }
        std::vector<std::string> rels;
        for (auto l : lines_of(after(p, "-Relationships-\n"))) {
            if (l == "(none)") continue;
            if (l.rfind("- ", 0) == 0) l = l.substr(2);
            auto c = l.find(": ");
            rels.push_back(c == std::string::npos ? l : l.substr(c + 2));
        }
        json j;
        if (ents.empty()) ents.emplace_back("Unnamed", "");
        j["title"] = ents.size() > 1 ? ents[0].first + " and " + ents[1].first : ents[0].first;
        std::string summary = "This community centres on " + ents[0].first;
        if (ents.size() > 1) {
            summary += ", together with";
            for (std::size_t i = 1; i < ents.size() && i < 5; ++i) summary += (i > 1 ? ", " : " ") + ents[i].first;
        }
        summary += ".";
        if (!ents[0].second.empty()) summary += " " + sentences(ents[0].second).back();
        j["summary"] = summary;
        std::vector<std::string> findings;
        for (const auto& r : rels)
            if (findings.size() < 4) findings.push_back(r);
        for (std::size_t i = 0; i < ents.size() && findings.size() < 3; ++i)
            if (!ents[i].second.empty()) findings.push_back(sentences(ents[i].second).back());
        if (findings.empty()) findings.push_back(ents[0].first + " has no recorded relationships in this community.");
        j["findings"] = findings;
        return j.dump(2);
    }

    static const TrapReplies* trap(const std::string& question) {
        auto it = kTraps.find(question);
        return it == kTraps.end() ? nullptr : &it->second;
    }

    static std::string local(const std::string& p) {
        auto q = after(p, "-Question-\n");
        if (auto* t = trap(q)) return t->local;
        auto qw = content_words(q);
        std::string best;
        int best_score = -1;
        for (const auto& l : lines_of(between(p, "-----Entities-----\nid|entity|description\n", "-----"))) {
            auto parts = text::split(l, '|');
            if (parts.size() < 3) continue;
            int s = overlap(parts[2], qw);
            if (s > best_score) best_score = s, best = parts[2];
        }
        std::string out = "According to the records, " + (best.empty() ? std::string("nothing is recorded.") : best);
        auto rels = lines_of(between(p, "-----Relationships-----\nsource|target|description|weight\n", "-----"));
        if (!rels.empty()) {
            auto parts = text::split(rels.front(), '|');
            if (parts.size() >= 3) out += " The records also note: " + parts[2];
        }
        return one_line(out);
    }

    static std::string global_map(const std::string& p) {
        auto q = after(p, "-Question-\n");
        json pts = json::array();
        if (auto* t = trap(q); !t || t->global_points) {
            auto qw = content_words(q);
            auto report = between(p, "-Report-\n", "\n\n-Question-");
            for (const auto& l : lines_of(report)) {
                if (l.rfind("# ", 0) == 0) continue;
                auto d = l.rfind("- ", 0) == 0 ? l.substr(2) : l;
                int s = overlap(d, qw);
                if (s > 0) pts.push_back({{"description", d}, {"score", std::min(100, 25 * s)}});
            }
        }
        return json{{"points", pts}}.dump();
    }

    static std::string global_reduce(const std::string& p) {
        std::vector<std::string> descs;
        for (const auto& l : lines_of(between(p, "-Points-\n", "\n\n-Question-")))
            if (l.rfind("----", 0) != 0 && l.rfind("Importance Score:", 0) != 0) descs.push_back(l);
        std::string out = "Across the community reports:";
        for (std::size_t i = 0; i < descs.size() && i < 2; ++i) out += " " + descs[i];
        return one_line(out);
    }

    static std::string naive_rag(const std::string& p) {
        auto q = after(p, "-Question-\n");
        if (auto* t = trap(q)) return t->rag;
        auto qw = content_words(q);
        std::string best;
        int best_score = -1;
        for (const auto& s : sentences(between(p, "-Excerpts-\n", "\n\n-Question-"))) {
            if (s.front() == '[') continue;
            int sc = overlap(s, qw);
            if (sc > best_score) best_score = sc, best = s;
        }
        return one_line("The excerpts indicate: " + unjoin(best));
    }

    static std::string naive_llm(const std::string& q) {
        if (auto* t = trap(q)) return t->llm;
        std::string topic = std::string(text::trim(q));
        if (!topic.empty() && topic.back() == '?') topic.pop_back();
        if (!topic.empty()) topic[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(topic[0])));
        return "From general knowledge of the case, the question of " + topic +
               " is usually told as part of the disputed timeline around Hae Min Lee's death, and accounts of it "
               "vary.";
    }

    std::string hearsay(const std::string& text) const {
        auto it = hearsay_.find(text);
        if (it == hearsay_.end()) throw std::runtime_error("no hearsay label for chunk text");
        return it->second;
    }

    std::string sentiment(const std::string& text) const {
        auto it = sentiment_.find(text);
        if (it == sentiment_.end()) throw std::runtime_error("no sentiment label for chunk text");
        return it->second;
    }

    static std::string keywords(const std::string& body) {
        if (body.find("Adnan Syed and the Islamic Society of Baltimore") != std::string::npos) return kCommunity24Reply;
        if (body.find("Discovery of the body in Leakin Park") != std::string::npos) return kCommunity46Reply;
        static const std::set<std::string> skip = {"This", "The", "A", "An", "In", "It", "He", "She", "They",
                                                   "Community", "No", "Six", "Two", "Some", "Members", "If"};
        static const std::set<std::string> filler = {"centres", "together", "community", "appears", "several",
                                                     "passages", "nobody", "interviewed"};
        std::vector<std::string> kws;
        std::set<std::string> seen;
        auto add = [&](const std::string& k) {
            auto low = text::to_lower(k);
            if (kws.size() >= 10 || skip.count(k) || filler.count(low)) return;
            for (const auto& s : seen)
                if (s.find(low) != std::string::npos) return;
            seen.insert(low);
            kws.push_back(k);
        };
        static const std::regex cap(R"(\b[A-Z][A-Za-z]+(?: [A-Z][A-Za-z]+)*)");
        for (auto it = std::sregex_iterator(body.begin(), body.end(), cap); it != std::sregex_iterator(); ++it)
            add(it->str());
        for (const auto& w : text::split_whitespace(body)) {
            std::string c;
            for (char ch : w)
                if (std::isalpha(static_cast<unsigned char>(ch))) c += ch;
            if (c.size() >= 7) {
                c[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(c[0])));
                add(c);
            }
        }
        for (const char* f : {"Timeline", "Evidence", "Witness", "Investigation", "Testimony", "Alibi", "Verdict",
                              "Motive", "Records", "Suspect"})
            add(f);
        std::string out = "Top 10 Keywords:\n";
        for (std::size_t i = 0; i < kws.size(); ++i) out += fmt::format("{}. {}\n", i + 1, kws[i]);
        out += "Community Uniqueness:\nThis community stands apart because it centres on " + kws[0] + " and " +
               kws[1] + ", which play a smaller role elsewhere in the narrative.";
        return out;
    }

    static retrieval::QueryMode mode_of(const std::string& answer) {
        if (answer.rfind("According to the records", 0) == 0) return retrieval::QueryMode::Local;
        if (answer.rfind("Across the community reports", 0) == 0 || answer == retrieval::kGlobalNoData)
            return retrieval::QueryMode::Global;
        if (answer.rfind("The excerpts indicate", 0) == 0) return retrieval::QueryMode::NaiveRag;
        if (answer.rfind("From general knowledge", 0) == 0) return retrieval::QueryMode::NaiveLlm;
        throw std::runtime_error("judge cannot tell which mode wrote: " + answer.substr(0, 60));
    }

    std::string judge(const std::string& p) const {
        auto metric = eval::parse_metric(std::string(text::trim(between(p, "Metric: ", "\n"))));
        auto question = std::string(text::trim(between(p, "\nQuestion: ", "\n")));
        auto qi = std::find_if(questions_.begin(), questions_.end(), [&](const auto& q) { return q.text == question; });
        if (qi == questions_.end()) throw std::runtime_error("judge prompt for unknown question: " + question);
        const auto col = static_cast<std::size_t>(metric);
        // Winners per metric laid out in table order, rotated so columns differ.
        std::vector<retrieval::QueryMode> winners;
        for (std::size_t row = 0; row < 4; ++row)
            for (int k = 0; k < kWins[col][row]; ++k) winners.push_back(eval::kAllModes[row]);
        std::rotate(winners.begin(), winners.begin() + static_cast<long>(7 * col % winners.size()), winners.end());
        auto want = winners[static_cast<std::size_t>(qi - questions_.begin()) % winners.size()];

        static const std::regex block(R"(Answer ([A-Z]):\n([^\n]*))");
        for (auto it = std::sregex_iterator(p.begin(), p.end(), block); it != std::sregex_iterator(); ++it)
            if (mode_of(it->str(2)) == want)
                return fmt::format("Winner: Answer {}\nReason: Answer {} is the strongest on {}.", it->str(1),
                                   it->str(1), eval::metric_name(metric));
        throw std::runtime_error("judge prompt lacks the answer it should pick");
    }

    std::vector<eval::Question> questions_;
    std::map<std::string, std::string> hearsay_, sentiment_;
};

// ---- Driver ---------------------------------------------------------------------

void step(const std::vector<std::string>& args, const std::shared_ptr<llm::Provider>& provider) {
    std::cerr << "narrative";
    for (const auto& a : args) std::cerr << ' ' << a;
    std::cerr << '\n';
    if (int rc = cli::run(args, provider); rc != 0)
        throw std::runtime_error(fmt::format("step failed with exit {}", rc));
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Reply styles rotate so the replay exercises every accepted hearsay format.
std::string hearsay_reply(bool flag, const std::string& why, std::size_t i) {
    switch (i % 3) {
        case 0: return fmt::format("\"{}\", \"{}\"", flag ? "true" : "false", why);
        case 1: return fmt::format("“{}”, “{}”", flag ? "true" : "false", why);
        default: return fmt::format("{}. {}", flag ? "True" : "False", why);
    }
}

std::string sentiment_reply(const std::string& cls, std::size_t i) {
    std::string label = cls;
    std::replace(label.begin(), label.end(), '_', ' ');
    if (i % 2 == 1) label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    return i % 3 == 2 ? label + "." : label;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regenerate the demo cassette and golden files."};
    std::string data = "data/demo", out_dir;
    app.add_option("--data", data, "directory with the hand-written inputs")->check(CLI::ExistingDirectory);
    app.add_option("--out", out_dir, "where to write cassette.jsonl and expected/ (default: --data)");
    CLI11_PARSE(app, argc, argv);
    if (out_dir.empty()) out_dir = data;

    try {
        const fs::path in(data), out(out_dir);
        const fs::path run = out / "_run";
        const fs::path cassette = out / "cassette.jsonl";
        fs::create_directories(out);
        fs::remove_all(run);
        fs::remove(cassette);

        const auto refs = json::parse(read_file(in / "reference_answers.json"));
        for (const auto& [id, r] : refs.items())
            kTraps[r.at("question").get<std::string>()] = {r.at("local"), r.at("naive_rag"), r.at("naive_llm")};

        auto corpus = eval::QuestionCorpus::load(in / "questions.jsonl");
        auto model = std::make_shared<DemoModel>(corpus.questions, std::map<std::string, std::string>{},
                                                 std::map<std::string, std::string>{});
        auto provider = std::make_shared<llm::ScriptedProvider>(
            [model](const llm::ProviderRequest& r) { return model->reply(r); });

        const std::vector<std::string> base = {"--config", (in / "config.json").string(), "--run-dir", run.string(),
                                               "--cassette", cassette.string(), "--record"};
        auto with = [&](std::vector<std::string> rest) {
            auto a = base;
            a.insert(a.end(), rest.begin(), rest.end());
            return a;
        };

        step(with({"ingest", "--input", (in / "transcript.csv").string()}), provider);

        // Hand labels become the recorded hearsay and sentiment replies.
        auto chunks = ingest::read_chunks(run / "chunks.jsonl");
        std::ifstream lf(in / "hearsay_labels.csv", std::ios::binary);
        auto rows = csv::read(lf);
        std::map<std::string, std::string> hs, sent;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& f = rows[r].fields;
            auto c = std::find_if(chunks.begin(), chunks.end(), [&](const auto& ch) { return ch.id == f.at(0); });
            if (c == chunks.end()) throw std::runtime_error("label for unknown chunk " + f.at(0));
            hs[c->text] = hearsay_reply(f.at(1) == "true", f.at(3), r - 1);
            sent[c->text] = sentiment_reply(f.at(2), r - 1);
        }
        model->set_chunk_labels(std::move(hs), std::move(sent));

        step(with({"build", "graphrag"}), provider);
        for (const char* m : {"local", "global", "naive-rag", "naive-llm"})
            step(with({"query", "--mode", m, "Who found the body?"}), provider);
        step(with({"analyze", "sentiment"}), provider);
        step(with({"analyze", "hearsay"}), provider);
        step(with({"analyze", "keywords"}), provider);
        step(with({"eval", "corpus", "--questions", (in / "questions.jsonl").string()}), provider);
        step(with({"eval", "adversarial", "--cases", (in / "adversarial.json").string(), "--grades",
                   (in / "grades.csv").string()}),
             provider);

        // Stand-alone keyword fixtures for two hand-written community reports.
        {
            auto cfg = Config::load(in / "config.json");
            cfg.cassette = cassette;
            llm::Gateway gw(cfg.gateway(llm::Mode::Record), provider);
            std::ifstream rf(in / "keyword_reports.jsonl");
            std::string line;
            while (std::getline(rf, line))
                if (!line.empty()) analytics::extract_keywords(json::parse(line).get<builder::CommunityReport>(), gw);
            gw.save();
        }

        fs::create_directories(out / "expected");
        for (const char* f : {"preprocessed.csv", "chunks.jsonl"})
            fs::copy_file(run / f, out / "expected" / f, fs::copy_options::overwrite_existing);
        fs::copy_file(run / "eval" / "win_table.csv", out / "expected" / "win_table.csv",
                      fs::copy_options::overwrite_existing);
        fs::remove_all(run);
        std::cerr << "wrote " << cassette.string() << " and " << (out / "expected").string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
