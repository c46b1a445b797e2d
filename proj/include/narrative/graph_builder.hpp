#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "narrative/ingest.hpp"
#include "narrative/kg_model.hpp"
#include "narrative/llm_gateway.hpp"

namespace narrative::builder {

struct ExtractedEntity {
    std::string name;
    std::string kind;
    std::string description;
    bool operator==(const ExtractedEntity&) const = default;
};

struct ExtractedRelation {
    std::string head;
    std::string tail;
    std::string description;
    double strength = 1.0;
    bool operator==(const ExtractedRelation&) const = default;
};

struct ExtractionRecord {
    std::string chunk_id;
    std::vector<ExtractedEntity> entities;
    std::vector<ExtractedRelation> relations;
    int gleaning_round = 0;
    bool operator==(const ExtractionRecord&) const = default;
};

void to_json(nlohmann::json& j, const ExtractionRecord& r);
void from_json(const nlohmann::json& j, ExtractionRecord& r);

struct ParsedExtraction {
    std::vector<ExtractedEntity> entities;
    std::vector<ExtractedRelation> relations;
    bool complete = false;
    /// At least one record or the completion marker was found.
    bool parseable() const { return complete || !entities.empty() || !relations.empty(); }
};

/// Reads `("entity"<|>...)` and `("relationship"<|>...)` records separated by
/// `##`, ignoring any prose around them. Malformed records are skipped.
ParsedExtraction parse_extraction(std::string_view response);

struct BuildConfig {
    int max_gleanings = 2;
    std::vector<double> resolution_schedule = {1.0, 0.5};
    int max_levels = 2;
    int min_mentions = 2;
    std::uint64_t seed = 42;
    std::vector<std::string> entity_types = {"person", "organization", "location", "event", "object"};
    /// Word budget for the entity and relation lines of one community prompt.
    int report_context_words = 4000;
};

/// Round 0 extraction plus up to `max_gleanings` follow-ups; stops after a
/// round that adds no new entity and no new (head, tail) pair.
std::vector<ExtractionRecord> extract_with_gleaning(const ingest::Chunk& chunk, int max_gleanings,
                                                    llm::Gateway& gateway,
                                                    const std::vector<std::string>& entity_types);

/// All chunks, fanned out over threads; the gateway bounds in-flight calls.
std::vector<ExtractionRecord> extract_all(const std::vector<ingest::Chunk>& chunks, const BuildConfig& cfg,
                                          llm::Gateway& gateway);

/// Merges records into a graph. One triple per directed (head, tail) pair:
/// relation = sorted distinct descriptions joined by newlines, weight = number
/// of mentions, evidence = chunk ids. Entity description = sorted distinct
/// descriptions joined by newlines; kind = most frequent (ties: smallest).
/// Relation-free entities with fewer than `min_mentions` mentions are dropped.
kg::KnowledgeGraph assemble_graph(const std::vector<ExtractionRecord>& records, int min_mentions = 2);

struct CommunityReport {
    int community_id = 0;
    int level = 1;
    std::vector<std::string> members;
    std::string title;
    std::string summary;
    std::vector<std::string> key_findings;
    bool operator==(const CommunityReport&) const = default;
};

void to_json(nlohmann::json& j, const CommunityReport& r);
void from_json(const nlohmann::json& j, CommunityReport& r);

/// Parses a `{title, summary, findings}` object, tolerating surrounding prose.
CommunityReport parse_community_report(std::string_view response);

struct Reports {
    std::map<std::string, std::string> entity_summaries;
    std::map<kg::KnowledgeGraph::TripleKey, std::string> relation_summaries;
    std::vector<CommunityReport> communities;
};

/// Community ids run 0.. from the coarsest level down, blocks in canonical order.
Reports generate_reports(const kg::KnowledgeGraph& graph, const kg::Hierarchy& hierarchy, llm::Gateway& gateway,
                         const BuildConfig& cfg = {});

/// Everything `build graphrag` produces.
struct GraphRagBuild {
    kg::KnowledgeGraph graph;  // carries the hierarchy
    std::vector<ExtractionRecord> records;
    Reports reports;
    std::uint64_t seed = 0;
};

GraphRagBuild build_graphrag(const std::vector<ingest::Chunk>& chunks, const BuildConfig& cfg,
                             llm::Gateway& gateway);

void save_build(const GraphRagBuild& build, const std::filesystem::path& dir);
GraphRagBuild load_build(const std::filesystem::path& dir);

}  // namespace narrative::builder
