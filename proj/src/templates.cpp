#include "narrative/templates.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "narrative/error.hpp"

namespace narrative::llm {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the placeholder starting at text[i] == '{', or 0 if it is a literal brace.
std::size_t placeholder_len(std::string_view text, std::size_t i) {
    if (i + 2 >= text.size() || !ident_start(text[i + 1])) return 0;
    std::size_t j = i + 1;
    while (j < text.size() && ident_char(text[j])) ++j;
    return (j < text.size() && text[j] == '}') ? j - i + 1 : 0;
}

// Fixed wording; must not be edited.
constexpr const char* kHearsayText = R"TXT(For the following text, determine whether it is hearsay or not. Provide the classification in the following format: "true or false", "two sentence explanation". Make sure to provide the classification in quotation marks first, followed by a comma and a space, and then provide the explanation in quotation marks.
Criteria:
- Hearsay: A statement made outside of court that is used to prove the truth of the matter asserted in the statement. Example: A witness testifies that they heard someone else say, "I saw the defendant at the scene of the crime."
- Not Hearsay: A statement based on the witness's own observations or knowledge, and not used to prove the truth of another person's statement. Example: A witness says, "I saw the defendant at the scene of the crime." This is not hearsay because the witness is providing testimony based on their direct observations, rather than relaying statements made by others.

Text to be classified: {text})TXT";

// Fixed wording; the community text follows the instructions.
constexpr const char* kKeywordsText = R"TXT(Generate the top 10 keywords based on the following text:
Instructions:
- Pay attention to critical locations and time information, and avoid irrelevant keywords.
- Do not include any keywords related to the Serial Podcast.
- Ensure that the keywords are distinct from each other and are suitable for various communities with different focuses.
After listing the 10 keywords, briefly describe how that community is unique compared to the others based on the provided information and context.

{text})TXT";

constexpr const char* kKeywordsRepromptText = R"TXT(Your previous answer did not list exactly 10 distinct keywords. List exactly 10 distinct keywords as a numbered list, then write "Community Uniqueness:" followed by the description.

Previous answer:
{previous}

Text:
{text})TXT";

constexpr const char* kSentiment5Text = R"TXT(Classify the overall sentiment of the text below as exactly one of: very negative, negative, neutral, positive, very positive. Reply with the label only.

Text: {text})TXT";

constexpr const char* kExtractText = R"TXT(-Goal-
Given a text document and a list of entity types, identify all entities of those types in the text and all relationships among the identified entities.

-Steps-
1. For each entity, output ("entity"<|>NAME<|>TYPE<|>DESCRIPTION). NAME is the entity name as written in the text, TYPE is one of [{entity_types}], DESCRIPTION covers the entity's attributes and activities.
2. For each pair of clearly related entities, output ("relationship"<|>SOURCE<|>TARGET<|>DESCRIPTION<|>STRENGTH). DESCRIPTION says how they are related and STRENGTH is an integer from 1 to 10.
3. Separate records with ## and finish with <|COMPLETE|>.

-Text-
{text})TXT";

constexpr const char* kGleanText = R"TXT(Some entities and relationships were missed in the previous extraction. Using the same record format, list only the additional entities and relationships found in the text, then finish with <|COMPLETE|>. If nothing was missed, output only <|COMPLETE|>.

-Entity types-
{entity_types}

-Previous extraction-
{previous}

-Text-
{text})TXT";

constexpr const char* kExtractReparseText = R"TXT(The response below could not be parsed. Rewrite it strictly as records of the form ("entity"<|>NAME<|>TYPE<|>DESCRIPTION) and ("relationship"<|>SOURCE<|>TARGET<|>DESCRIPTION<|>STRENGTH), separated by ## and ending with <|COMPLETE|>. Output nothing else.

-Response-
{previous}

-Text-
{text})TXT";

constexpr const char* kEntitySummaryText = R"TXT(Write one coherent description of the entity below that merges all of the given descriptions. Resolve contradictions where you can, write in the third person and mention the entity name.

Entity: {name}
Descriptions:
{descriptions})TXT";

constexpr const char* kRelationSummaryText = R"TXT(Write one coherent description of the relationship between the two entities below that merges all of the given descriptions.

Source: {head}
Target: {tail}
Descriptions:
{descriptions})TXT";

constexpr const char* kCommunityReportText = R"TXT(Write a report about the community of entities described below, using only the information given. Return a JSON object with the keys "title" (a short name for the community), "summary" (one paragraph on its structure and significance) and "findings" (a list of 3 to 5 key findings, one or two sentences each).

Community: {community_id} (level {level})

-Entities-
{entities}

-Relationships-
{relations})TXT";

constexpr const char* kLocalAnswerText = R"TXT(Answer the question using only the data tables below. If the data does not contain the answer, say that the data provided does not specify it and do not make anything up. Do not use outside knowledge.

-Data-
{context}

-Question-
{question})TXT";

constexpr const char* kGlobalMapText = R"TXT(Using only the community report below, list the points that help answer the question. Return JSON of the form {"points": [{"description": "...", "score": 50}]} where score (0 to 100) says how helpful the point is. If the report is not relevant, return {"points": []}.

-Report-
{report}

-Question-
{question})TXT";

constexpr const char* kGlobalReduceText = R"TXT(Answer the question by combining the analyst points below, which are ranked by importance. Use only these points. If they do not answer the question, say that you are unable to answer this question given the provided data.

-Points-
{points}

-Question-
{question})TXT";

constexpr const char* kNaiveRagText = R"TXT(Answer the question using the transcript excerpts below. If they do not contain the answer, say so.

-Excerpts-
{context}

-Question-
{question})TXT";

constexpr const char* kNaiveLlmText = R"TXT(Answer the following question.

{question})TXT";

constexpr const char* kJudgeText = R"TXT(You are comparing several answers to the same question on one metric only.

Metric: {metric}
Definition: {definition}

Question: {question}

{answers}

Which answer is best on this metric? Choose exactly one; ties are not allowed. Reply in the form
Winner: Answer <letter>
Reason: <one or two sentences>)TXT";

constexpr const char* kJudgeRepromptText = R"TXT(Your previous reply could not be matched to one of the answers. Reply again in the form
Winner: Answer <letter>
Reason: <one or two sentences>
where <letter> is one of {labels}.

Previous reply:
{previous})TXT";

TemplateCatalog make_builtin() {
    TemplateCatalog c;
    c.put({tmpl::kHearsay, kHearsayText, true});
    c.put({tmpl::kKeywords, kKeywordsText, true});
    c.put({tmpl::kKeywordsReprompt, kKeywordsRepromptText, false});
    c.put({tmpl::kSentiment5, kSentiment5Text, false});
    c.put({tmpl::kExtract, kExtractText, false});
    c.put({tmpl::kGlean, kGleanText, false});
    c.put({tmpl::kExtractReparse, kExtractReparseText, false});
    c.put({tmpl::kEntitySummary, kEntitySummaryText, false});
    c.put({tmpl::kRelationSummary, kRelationSummaryText, false});
    c.put({tmpl::kCommunityReport, kCommunityReportText, false});
    c.put({tmpl::kLocalAnswer, kLocalAnswerText, false});
    c.put({tmpl::kGlobalMap, kGlobalMapText, false});
    c.put({tmpl::kGlobalReduce, kGlobalReduceText, false});
    c.put({tmpl::kNaiveRag, kNaiveRagText, false});
    c.put({tmpl::kNaiveLlm, kNaiveLlmText, false});
    c.put({tmpl::kJudge, kJudgeText, false});
    c.put({tmpl::kJudgeReprompt, kJudgeRepromptText, false});
    return c;
}

}  // namespace

const TemplateCatalog& TemplateCatalog::builtin() {
    static const TemplateCatalog catalog = make_builtin();
    return catalog;
}

void TemplateCatalog::put(PromptTemplate t) {
    if (t.id.empty()) throw ValidationError("template id must be nonempty");
    auto id = t.id;
    templates_[id] = std::move(t);
}

bool TemplateCatalog::has(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& TemplateCatalog::get(std::string_view id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw NotFoundError("unknown template '" + std::string(id) + "'");
    return it->second;
}

std::vector<std::string> TemplateCatalog::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

void TemplateCatalog::load_overrides(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        auto body = ss.str();
        if (body.ends_with('\n')) body.pop_back();
        put({entry.path().stem().string(), body, false});
    }
}

std::string TemplateCatalog::render(std::string_view id, const Variables& vars) const {
    return render_text(get(id).text, vars, id);
}

std::vector<std::string> placeholders(std::string_view text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        if (auto len = placeholder_len(text, i)) {
            std::string name(text.substr(i + 1, len - 2));
            if (seen.insert(name).second) out.push_back(name);
            i += len - 1;
        }
    }
    return out;
}

std::string render_text(std::string_view text, const Variables& vars, std::string_view id) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            if (auto len = placeholder_len(text, i)) {
                std::string name(text.substr(i + 1, len - 2));
                auto it = vars.find(name);
                if (it == vars.end()) {
                    std::string where = id.empty() ? "" : " in template '" + std::string(id) + "'";
                    throw ValidationError("unbound placeholder '" + name + "'" + where);
                }
                out += it->second;
                i += len - 1;
                continue;
            }
        }
        out += text[i];
    }
    return out;
}

std::string render_template(std::string_view id, const Variables& vars) {
    return TemplateCatalog::builtin().render(id, vars);
}

}  // namespace narrative::llm
