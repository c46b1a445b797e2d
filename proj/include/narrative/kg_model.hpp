#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace narrative::kg {

/// The single entity-identity authority: case-folded, trimmed, internal
/// whitespace collapsed. Every module routes names through this.
std::string canonicalize(std::string_view name);

struct Entity {
    std::string id;
    std::string display_name;
    std::optional<std::string> kind;
    std::optional<std::string> description;

    bool operator==(const Entity&) const = default;
};

/// Directed (head, relation, tail) fact. `weight` counts occurrences;
/// `evidence` holds the chunk ids or segment labels it came from, sorted and unique.
struct Triple {
    std::string head;
    std::string relation;
    std::string tail;
    double weight = 1.0;
    std::vector<std::string> evidence;

    bool operator==(const Triple&) const = default;
};

using Block = std::vector<std::string>;
using Partition = std::vector<Block>;

/// levels[0] is P_1, the finest partition; levels.back() is P_h, the coarsest.
/// Each P_{l-1} refines P_l.
struct Hierarchy {
    std::vector<Partition> levels;

    std::size_t depth() const { return levels.size(); }
    /// Sorts members inside blocks and blocks by their smallest member.
    void normalize();
    /// Index of the block holding `entity_id` at 1-based `level`, or -1.
    int block_of(std::size_t level, const std::string& entity_id) const;

    bool operator==(const Hierarchy&) const = default;
};

struct RefinementCheck {
    bool ok = true;
    Block violation;
    std::string reason;
};

/// True iff each level partitions the entity set and every level refines the
/// one above it. With no explicit entity set, the union of P_1 is used.
RefinementCheck check_refinement(const Hierarchy& hierarchy);
RefinementCheck check_refinement(const Hierarchy& hierarchy, const std::set<std::string>& entities);

struct GraphStats {
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    std::vector<std::pair<std::string, double>> top_by_degree;
};

class KnowledgeGraph {
public:
    using TripleKey = std::tuple<std::string, std::string, std::string>;

    /// Adds the entity if absent and returns its id. Among competing display
    /// names the lexicographically smallest wins, so insertion order is irrelevant.
    std::string add_entity(std::string_view name, std::optional<std::string> kind = std::nullopt,
                           std::optional<std::string> description = std::nullopt);
    /// Inserts or replaces an entity record as-is (used by importers).
    void put_entity(Entity entity);
    void set_description(const std::string& id, std::string description);

    /// Merges an identical (head, relation, tail) by summing weights and
    /// unioning evidence; otherwise inserts it with any missing endpoints.
    /// Endpoint names are canonicalised here.
    void upsert_triple(const Triple& triple);

    const Entity* find_entity(std::string_view id) const;
    bool has_entity(std::string_view id) const { return find_entity(id) != nullptr; }
    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::map<TripleKey, Triple>& triples() const { return triples_; }
    std::set<std::string> entity_ids() const;

    const std::optional<Hierarchy>& hierarchy() const { return hierarchy_; }
    /// Normalises the hierarchy and requires it to cover exactly the entity set.
    void set_hierarchy(Hierarchy hierarchy);
    void clear_hierarchy() { hierarchy_.reset(); }

    /// Removes entities (and every triple touching them).
    void remove_entities(const std::set<std::string>& ids);

    /// Weighted degree (in + out) per entity.
    std::map<std::string, double> weighted_degrees() const;
    /// Triples incident on `id`, in either direction.
    std::vector<const Triple*> incident(const std::string& id) const;

    /// Throws ValidationError on a dangling endpoint or a hierarchy mismatch.
    void validate() const;

    bool empty() const { return entities_.empty(); }

    bool operator==(const KnowledgeGraph&) const = default;

private:
    std::map<std::string, Entity> entities_;
    std::map<TripleKey, Triple> triples_;
    std::optional<Hierarchy> hierarchy_;
};

/// Returns a copy with the triple merged in.
KnowledgeGraph upsert_triple(KnowledgeGraph graph, const Triple& triple);

/// Entities within `radius` undirected hops of `entity_id` plus every triple
/// among them. Any hierarchy is restricted to the kept entities.
KnowledgeGraph induced_neighborhood(const KnowledgeGraph& graph, std::string_view entity_id, int radius);

/// Ties in weighted degree break by ascending id.
GraphStats graph_stats(const KnowledgeGraph& graph, std::size_t top_k = 10);

/// weight / max weight for every triple; the stored counts stay raw.
std::map<KnowledgeGraph::TripleKey, double> max_normalized_weights(const KnowledgeGraph& graph);

}  // namespace narrative::kg
