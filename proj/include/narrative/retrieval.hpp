#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "narrative/graph_builder.hpp"
#include "narrative/ingest.hpp"
#include "narrative/llm_gateway.hpp"

namespace narrative::retrieval {

enum class QueryMode { Local, Global, NaiveRag, NaiveLlm };

QueryMode parse_query_mode(std::string_view s);
std::string query_mode_name(QueryMode m);

struct ContextRefs {
    std::vector<std::string> entities;
    std::vector<int> communities;
    std::vector<std::string> chunks;
    bool empty() const { return entities.empty() && communities.empty() && chunks.empty(); }
    bool operator==(const ContextRefs&) const = default;
};

struct Answer {
    std::string question;
    QueryMode mode = QueryMode::NaiveLlm;
    std::string text;
    ContextRefs context_refs;
    bool declined = false;
    bool operator==(const Answer&) const = default;
};

void to_json(nlohmann::json& j, const Answer& a);
void from_json(const nlohmann::json& j, Answer& a);

/// Recognises the "not in the data" replies the grounded prompts ask for.
bool is_refusal(std::string_view text);

/// Text sent back when the global map stage finds nothing.
inline constexpr const char* kGlobalNoData =
    "I am sorry but I am unable to answer this question given the provided data.";

/// Embedding index over named items. Ranking ties break by ascending id.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;
    EmbeddingIndex(std::vector<std::string> ids, const std::vector<std::string>& texts, llm::Gateway& gateway);

    struct Hit {
        std::size_t index;
        double score;
    };
    std::vector<Hit> top_k(const llm::Embedding& query, std::size_t k) const;
    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }

private:
    std::vector<std::string> ids_;
    std::vector<llm::Embedding> vectors_;
};

struct LocalOptions {
    int k = 10;
    /// Word-count proxy for the context token budget.
    int budget = 8000;
    int max_chunks = 3;
};

struct GlobalOptions {
    /// 1-based hierarchy level; 0 picks the coarsest level present.
    int level = 0;
    int budget = 8000;
};

/// Read-only view over one build plus the chunks it came from. Embeddings are
/// computed once at construction.
class Retriever {
public:
    Retriever(const builder::GraphRagBuild& build, const std::vector<ingest::Chunk>& chunks, llm::Gateway& gateway);

    Answer query_local(const std::string& question, const LocalOptions& opts = {}) const;
    Answer query_global(const std::string& question, const GlobalOptions& opts = {}) const;
    Answer query_naive_rag(const std::string& question, int k) const;
    Answer query_naive_llm(const std::string& question) const;
    Answer query(QueryMode mode, const std::string& question, const LocalOptions& local = {},
                 const GlobalOptions& global = {}) const;

private:
    const builder::GraphRagBuild& build_;
    const std::vector<ingest::Chunk>& chunks_;
    llm::Gateway& gateway_;
    EmbeddingIndex entity_index_;
    EmbeddingIndex chunk_index_;
};

/// Chunks only; no graph needed.
Answer query_naive_rag(const std::string& question, const std::vector<ingest::Chunk>& chunks,
                       const EmbeddingIndex& index, int k, llm::Gateway& gateway);
Answer query_naive_llm(const std::string& question, llm::Gateway& gateway);

/// Map-reduce over the reports at one level.
Answer query_global(const std::string& question, const std::vector<builder::CommunityReport>& reports,
                    const GlobalOptions& opts, llm::Gateway& gateway);

struct MapPoint {
    int community_id = 0;
    std::string description;
    int score = 0;
};

/// Reads `{"points": [...]}` from a map reply; anything unreadable yields no points.
std::vector<MapPoint> parse_map_points(std::string_view response, int community_id);

/// Highest score first (ties: community id, then input order), dropping
/// zero scores and whatever no longer fits `budget` words.
std::vector<MapPoint> select_points(std::vector<MapPoint> points, int budget);

}  // namespace narrative::retrieval
