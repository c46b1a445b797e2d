#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace narrative::llm {

using Variables = std::map<std::string, std::string>;

struct PromptTemplate {
    std::string id;
    std::string text;
    /// True for the fixed-wording prompts (hearsay, keywords).
    bool canonical = false;
};

/// Placeholders are `{identifier}`; any other brace is literal text.
/// Substitution is single pass, so variable values are never rescanned.
class TemplateCatalog {
public:
    static const TemplateCatalog& builtin();

    void put(PromptTemplate t);
    bool has(std::string_view id) const;
    const PromptTemplate& get(std::string_view id) const;
    std::vector<std::string> ids() const;

    /// Every `<id>.txt` in `dir` replaces (or adds) a template; overrides are non-canonical.
    void load_overrides(const std::filesystem::path& dir);

    std::string render(std::string_view id, const Variables& vars) const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

std::vector<std::string> placeholders(std::string_view text);
std::string render_text(std::string_view text, const Variables& vars, std::string_view id = "");

/// Renders with the built-in catalog.
std::string render_template(std::string_view id, const Variables& vars);

namespace tmpl {
inline constexpr const char* kHearsay = "hearsay";
inline constexpr const char* kKeywords = "keywords";
inline constexpr const char* kKeywordsReprompt = "keywords_reprompt";
inline constexpr const char* kSentiment5 = "sentiment5";
inline constexpr const char* kExtract = "extract";
inline constexpr const char* kGlean = "glean";
inline constexpr const char* kExtractReparse = "extract_reparse";
inline constexpr const char* kEntitySummary = "entity_summary";
inline constexpr const char* kRelationSummary = "relation_summary";
inline constexpr const char* kCommunityReport = "community_report";
inline constexpr const char* kLocalAnswer = "local_answer";
inline constexpr const char* kGlobalMap = "global_map";
inline constexpr const char* kGlobalReduce = "global_reduce";
inline constexpr const char* kNaiveRag = "naive_rag";
inline constexpr const char* kNaiveLlm = "naive_llm";
inline constexpr const char* kJudge = "judge";
inline constexpr const char* kJudgeReprompt = "judge_reprompt";
}  // namespace tmpl

}  // namespace narrative::llm
