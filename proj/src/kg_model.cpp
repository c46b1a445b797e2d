#include "narrative/kg_model.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "narrative/error.hpp"
#include "narrative/text.hpp"

namespace narrative::kg {

std::string canonicalize(std::string_view name) { return text::to_lower(text::collapse_spaces(name)); }

// ---------------------------------------------------------------------------
// Hierarchy
// ---------------------------------------------------------------------------

void Hierarchy::normalize() {
    for (auto& level : levels) {
        for (auto& block : level) std::sort(block.begin(), block.end());
        level.erase(std::remove_if(level.begin(), level.end(), [](const Block& b) { return b.empty(); }),
                    level.end());
        std::sort(level.begin(), level.end());
    }
}

int Hierarchy::block_of(std::size_t level, const std::string& entity_id) const {
    if (level < 1 || level > levels.size()) return -1;
    const auto& part = levels[level - 1];
    for (std::size_t b = 0; b < part.size(); ++b)
        if (std::find(part[b].begin(), part[b].end(), entity_id) != part[b].end()) return static_cast<int>(b);
    return -1;
}

RefinementCheck check_refinement(const Hierarchy& hierarchy) {
    std::set<std::string> universe;
    if (!hierarchy.levels.empty())
        for (const auto& block : hierarchy.levels.front()) universe.insert(block.begin(), block.end());
    return check_refinement(hierarchy, universe);
}

RefinementCheck check_refinement(const Hierarchy& hierarchy, const std::set<std::string>& entities) {
    auto fail = [](Block block, std::string reason) {
        RefinementCheck r;
        r.ok = false;
        r.violation = std::move(block);
        r.reason = std::move(reason);
        return r;
    };

    std::vector<std::unordered_map<std::string, std::size_t>> owner(hierarchy.levels.size());
    for (std::size_t l = 0; l < hierarchy.levels.size(); ++l) {
        std::set<std::string> covered;
        for (std::size_t b = 0; b < hierarchy.levels[l].size(); ++b) {
            const auto& block = hierarchy.levels[l][b];
            if (block.empty()) return fail(block, fmt::format("level {} has an empty block", l + 1));
            for (const auto& id : block) {
                if (!entities.count(id))
                    return fail(block, fmt::format("level {} block holds unknown entity '{}'", l + 1, id));
                if (!covered.insert(id).second)
                    return fail(block, fmt::format("level {} assigns '{}' to more than one block", l + 1, id));
                owner[l][id] = b;
            }
        }
        if (covered.size() != entities.size()) {
            Block missing;
            std::set_difference(entities.begin(), entities.end(), covered.begin(), covered.end(),
                                std::back_inserter(missing));
            return fail(missing, fmt::format("level {} does not cover every entity", l + 1));
        }
    }
    for (std::size_t l = 1; l < hierarchy.levels.size(); ++l) {
        for (const auto& block : hierarchy.levels[l - 1]) {
            std::size_t parent = owner[l].at(block.front());
            for (const auto& id : block)
                if (owner[l].at(id) != parent)
                    return fail(block, fmt::format("level {} block straddles two blocks of level {}", l, l + 1));
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// KnowledgeGraph
// ---------------------------------------------------------------------------

std::string KnowledgeGraph::add_entity(std::string_view name, std::optional<std::string> kind,
                                       std::optional<std::string> description) {
    std::string id = canonicalize(name);
    if (id.empty()) throw ValidationError("entity name is empty");
    std::string display = text::collapse_spaces(name);
    auto [it, inserted] = entities_.try_emplace(id);
    Entity& e = it->second;
    if (inserted) {
        e.id = id;
        e.display_name = display;
    } else if (display < e.display_name) {
        e.display_name = display;
    }
    if (kind && !kind->empty() && (!e.kind || *kind < *e.kind)) e.kind = std::move(kind);
    if (description && !e.description) e.description = std::move(description);
    return id;
}

void KnowledgeGraph::put_entity(Entity entity) {
    if (entity.id.empty()) throw ValidationError("entity id is empty");
    std::string id = entity.id;
    entities_[id] = std::move(entity);
}

void KnowledgeGraph::set_description(const std::string& id, std::string description) {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw NotFoundError("unknown entity '" + id + "'");
    it->second.description = std::move(description);
}

void KnowledgeGraph::upsert_triple(const Triple& triple) {
    std::string relation = text::trim(triple.relation);
    if (relation.empty()) throw ValidationError("triple relation text is empty");
    if (!(triple.weight > 0)) throw ValidationError("triple weight must be positive");
    std::string head = add_entity(triple.head);
    std::string tail = add_entity(triple.tail);

    TripleKey key{head, relation, tail};
    auto [it, inserted] = triples_.try_emplace(key);
    Triple& t = it->second;
    if (inserted) {
        t.head = head;
        t.relation = relation;
        t.tail = tail;
        t.weight = triple.weight;
    } else {
        t.weight += triple.weight;
    }
    std::vector<std::string> merged;
    std::vector<std::string> incoming = triple.evidence;
    std::sort(incoming.begin(), incoming.end());
    std::set_union(t.evidence.begin(), t.evidence.end(), incoming.begin(), incoming.end(),
                   std::back_inserter(merged));
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    t.evidence = std::move(merged);
}

const Entity* KnowledgeGraph::find_entity(std::string_view id) const {
    auto it = entities_.find(std::string(id));
    return it == entities_.end() ? nullptr : &it->second;
}

std::set<std::string> KnowledgeGraph::entity_ids() const {
    std::set<std::string> ids;
    for (const auto& [id, _] : entities_) ids.insert(id);
    return ids;
}

void KnowledgeGraph::set_hierarchy(Hierarchy hierarchy) {
    hierarchy.normalize();
    auto check = check_refinement(hierarchy, entity_ids());
    if (!check.ok) throw ValidationError("hierarchy rejected: " + check.reason);
    hierarchy_ = std::move(hierarchy);
}

void KnowledgeGraph::remove_entities(const std::set<std::string>& ids) {
    for (const auto& id : ids) entities_.erase(id);
    for (auto it = triples_.begin(); it != triples_.end();) {
        if (ids.count(it->second.head) || ids.count(it->second.tail))
            it = triples_.erase(it);
        else
            ++it;
    }
    if (hierarchy_) {
        for (auto& level : hierarchy_->levels)
            for (auto& block : level)
                block.erase(std::remove_if(block.begin(), block.end(), [&](const auto& m) { return ids.count(m) > 0; }),
                            block.end());
        hierarchy_->normalize();
    }
}

std::map<std::string, double> KnowledgeGraph::weighted_degrees() const {
    std::map<std::string, double> deg;
    for (const auto& [id, _] : entities_) deg[id] = 0.0;
    for (const auto& [_, t] : triples_) {
        deg[t.head] += t.weight;
        deg[t.tail] += t.weight;
    }
    return deg;
}

std::vector<const Triple*> KnowledgeGraph::incident(const std::string& id) const {
    std::vector<const Triple*> out;
    for (const auto& [_, t] : triples_)
        if (t.head == id || t.tail == id) out.push_back(&t);
    return out;
}

void KnowledgeGraph::validate() const {
    for (const auto& [_, t] : triples_) {
        if (!entities_.count(t.head) || !entities_.count(t.tail))
            throw ValidationError(fmt::format("dangling triple ({}, {}, {})", t.head, t.relation, t.tail));
        if (t.relation.empty()) throw ValidationError("triple with empty relation");
    }
    if (hierarchy_) {
        auto check = check_refinement(*hierarchy_, entity_ids());
        if (!check.ok) throw ValidationError("hierarchy invalid: " + check.reason);
    }
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

KnowledgeGraph upsert_triple(KnowledgeGraph graph, const Triple& triple) {
    graph.upsert_triple(triple);
    return graph;
}

KnowledgeGraph induced_neighborhood(const KnowledgeGraph& graph, std::string_view entity_id, int radius) {
    if (radius < 1) throw ValidationError("radius must be >= 1");
    std::string start = canonicalize(entity_id);
    if (!graph.has_entity(start)) throw NotFoundError(fmt::format("unknown entity '{}'", entity_id));

    std::unordered_map<std::string, std::vector<std::string>> adj;
    for (const auto& [_, t] : graph.triples()) {
        adj[t.head].push_back(t.tail);
        adj[t.tail].push_back(t.head);
    }
    std::map<std::string, int> dist{{start, 0}};
    std::deque<std::string> queue{start};
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop_front();
        if (dist[cur] == radius) continue;
        for (const auto& next : adj[cur]) {
            if (dist.count(next)) continue;
            dist[next] = dist[cur] + 1;
            queue.push_back(next);
        }
    }

    KnowledgeGraph sub;
    for (const auto& [id, _] : dist) sub.put_entity(*graph.find_entity(id));
    for (const auto& [_, t] : graph.triples())
        if (dist.count(t.head) && dist.count(t.tail)) sub.upsert_triple(t);
    if (graph.hierarchy()) {
        Hierarchy h;
        for (const auto& level : graph.hierarchy()->levels) {
            Partition p;
            for (const auto& block : level) {
                Block kept;
                for (const auto& m : block)
                    if (dist.count(m)) kept.push_back(m);
                if (!kept.empty()) p.push_back(std::move(kept));
            }
            h.levels.push_back(std::move(p));
        }
        sub.set_hierarchy(std::move(h));
    }
    return sub;
}

GraphStats graph_stats(const KnowledgeGraph& graph, std::size_t top_k) {
    GraphStats stats;
    stats.node_count = graph.entities().size();
    stats.edge_count = graph.triples().size();
    auto deg = graph.weighted_degrees();
    std::vector<std::pair<std::string, double>> ranked(deg.begin(), deg.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    stats.top_by_degree = std::move(ranked);
    return stats;
}

std::map<KnowledgeGraph::TripleKey, double> max_normalized_weights(const KnowledgeGraph& graph) {
    double max_w = 0.0;
    for (const auto& [_, t] : graph.triples()) max_w = std::max(max_w, t.weight);
    std::map<KnowledgeGraph::TripleKey, double> out;
    for (const auto& [key, t] : graph.triples()) out[key] = max_w > 0 ? t.weight / max_w : 0.0;
    return out;
}

}  // namespace narrative::kg
