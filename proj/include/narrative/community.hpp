#pragma once

#include <cstdint>
#include <vector>

#include "narrative/kg_model.hpp"

namespace narrative::community {

/// Undirected weighted graph on nodes 0..n-1. A self-loop of weight w adds
/// 2w to its node's degree and w to the internal weight of its community.
class WeightedGraph {
public:
    explicit WeightedGraph(int n = 0);

    int size() const { return static_cast<int>(adj_.size()); }
    void add_edge(int u, int v, double w);
    /// Neighbours excluding the node itself.
    const std::vector<std::pair<int, double>>& neighbors(int v) const { return adj_[v]; }
    double self_loop(int v) const { return self_[v]; }
    double degree(int v) const { return degree_[v]; }
    /// m, the total edge weight (each undirected edge once).
    double total_weight() const { return total_; }

private:
    std::vector<std::vector<std::pair<int, double>>> adj_;
    std::vector<double> self_;
    std::vector<double> degree_;
    double total_ = 0.0;
};

/// Q = sum_c [ L_c / m - gamma * (K_c / 2m)^2 ]; zero for an edgeless graph.
double modularity(const WeightedGraph& g, const std::vector<int>& membership, double resolution = 1.0);

/// Portable splitmix-style generator so partitions match across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform in [0, n).
    std::size_t below(std::size_t n);
    /// Uniform in [0, 1).
    double unit();
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::uint64_t state_;
};

struct LeidenOptions {
    double resolution = 1.0;
    double randomness = 0.01;  // theta in the refinement step
    std::uint64_t seed = 42;
    int max_iterations = 64;
};

/// Leiden modularity optimisation (fast local moving, refinement,
/// aggregation). With `constraint`, nodes only ever share a community with
/// nodes carrying the same constraint label. Returns labels 0..k-1 numbered
/// by first appearance.
std::vector<int> leiden(const WeightedGraph& g, const LeidenOptions& opts,
                        const std::vector<int>* constraint = nullptr);

/// Relation weights summed per unordered entity pair.
struct IndexedGraph {
    std::vector<std::string> ids;
    WeightedGraph graph;
};
IndexedGraph to_weighted_graph(const kg::KnowledgeGraph& kg);

/// Top-down: P_h uses resolution_schedule[h-1] unconstrained, then each
/// finer P_l uses resolution_schedule[l-1] constrained to P_{l+1}.
kg::Hierarchy cluster_hierarchy(const kg::KnowledgeGraph& kg, int max_levels,
                                const std::vector<double>& resolution_schedule, std::uint64_t seed);

}  // namespace narrative::community
