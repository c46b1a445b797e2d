#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "narrative/community.hpp"
#include "narrative/error.hpp"

using namespace narrative;
using namespace narrative::community;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Q = 1/(2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j), A symmetric.
double matrix_modularity(const Matrix& A, const std::vector<int>& c, double gamma) {
    const std::size_t n = A.size();
    std::vector<double> k(n, 0.0);
    double two_m = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            k[i] += A[i][j];
            two_m += A[i][j];
        }
    double q = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (c[i] == c[j]) q += A[i][j] - gamma * k[i] * k[j] / two_m;
    return q / two_m;
}

// Enumerates every set partition as a restricted growth string.
void for_each_partition(int n, const std::function<void(const std::vector<int>&)>& f) {
    std::vector<int> a(n, 0);
    std::function<void(int, int)> rec = [&](int i, int maxv) {
        if (i == n) {
            f(a);
            return;
        }
        for (int v = 0; v <= maxv + 1; ++v) {
            a[i] = v;
            rec(i + 1, std::max(maxv, v));
        }
    };
    a[0] = 0;
    rec(1, 0);
}

std::set<std::set<int>> blocks_of(const std::vector<int>& labels) {
    std::map<int, std::set<int>> m;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) m[labels[i]].insert(i);
    std::set<std::set<int>> out;
    for (auto& [_, b] : m) out.insert(b);
    return out;
}

Matrix two_cliques_with_bridge() {
    Matrix A(10, std::vector<double>(10, 0.0));
    for (int base : {0, 5})
        for (int i = base; i < base + 5; ++i)
            for (int j = base; j < base + 5; ++j)
                if (i != j) A[i][j] = 1;
    A[4][5] = A[5][4] = 1;
    return A;
}

WeightedGraph from_matrix(const Matrix& A) {
    WeightedGraph g(static_cast<int>(A.size()));
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = i + 1; j < A.size(); ++j)
            if (A[i][j] > 0) g.add_edge(static_cast<int>(i), static_cast<int>(j), A[i][j]);
    return g;
}

kg::KnowledgeGraph kg_from_matrix(const Matrix& A) {
    kg::KnowledgeGraph g;
    for (std::size_t i = 0; i < A.size(); ++i) g.add_entity("n" + std::to_string(i));
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = i + 1; j < A.size(); ++j)
            if (A[i][j] > 0) g.upsert_triple({"n" + std::to_string(i), "r", "n" + std::to_string(j), A[i][j], {}});
    return g;
}

}  // namespace

TEST(Modularity, MatchesMatrixDefinition) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 6 + static_cast<int>(rng() % 5);
        Matrix A(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng() % 3 == 0) A[i][j] = A[j][i] = 1 + rng() % 4;
        std::vector<int> c(n);
        for (int& x : c) x = static_cast<int>(rng() % 3);
        auto g = from_matrix(A);
        if (g.total_weight() == 0) continue;
        for (double gamma : {0.5, 1.0, 2.0})
            EXPECT_NEAR(modularity(g, c, gamma), matrix_modularity(A, c, gamma), 1e-12);
    }
}

TEST(Leiden, FourCliqueIsOneCommunity) {
    WeightedGraph g(4);
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) g.add_edge(i, j, 1);
    for (double gamma : {0.5, 1.0}) {
        LeidenOptions o;
        o.resolution = gamma;
        EXPECT_EQ(leiden(g, o), (std::vector<int>{0, 0, 0, 0}));
    }
}

TEST(Leiden, TwoCliquesMatchExhaustiveOptimum) {
    auto A = two_cliques_with_bridge();
    auto g = from_matrix(A);
    for (double gamma : {0.5, 1.0}) {
        double best = -1e9;
        std::vector<int> arg;
        int count = 0;
        for_each_partition(10, [&](const std::vector<int>& c) {
            ++count;
            double q = matrix_modularity(A, c, gamma);
            if (q > best + 1e-12) {
                best = q;
                arg = c;
            }
        });
        ASSERT_EQ(count, 115975);  // Bell(10)
        LeidenOptions o;
        o.resolution = gamma;
        auto got = leiden(g, o);
        EXPECT_EQ(blocks_of(got), blocks_of(arg));
        EXPECT_NEAR(modularity(g, got, gamma), best, 1e-12);
    }
}

TEST(Leiden, CommunitiesAreConnectedAndBeatSingletons) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 10 + static_cast<int>(rng() % 30);
        Matrix A(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng() % 6 == 0) A[i][j] = A[j][i] = 1 + rng() % 3;
        auto g = from_matrix(A);
        LeidenOptions o;
        o.seed = trial;
        auto c = leiden(g, o);
        std::vector<int> single(n);
        for (int i = 0; i < n; ++i) single[i] = i;
        EXPECT_GE(modularity(g, c) + 1e-12, modularity(g, single));
        // Each community induces a connected subgraph.
        for (const auto& block : blocks_of(c)) {
            std::set<int> seen{*block.begin()};
            std::vector<int> stack{*block.begin()};
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                for (int u : block)
                    if (A[v][u] > 0 && seen.insert(u).second) stack.push_back(u);
            }
            EXPECT_EQ(seen.size(), block.size());
        }
    }
}

TEST(Leiden, ConstraintKeepsNodesInsideParents) {
    auto g = from_matrix(two_cliques_with_bridge());
    std::vector<int> parent = {0, 0, 1, 1, 1, 1, 1, 0, 0, 0};
    auto c = leiden(g, {}, &parent);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            if (c[i] == c[j]) EXPECT_EQ(parent[i], parent[j]);
}

TEST(Leiden, EdgelessGraphGivesSingletons) {
    WeightedGraph g(3);
    EXPECT_EQ(leiden(g, {}), (std::vector<int>{0, 1, 2}));
}

TEST(Leiden, ValidatesOptions) {
    WeightedGraph g(2);
    LeidenOptions o;
    o.resolution = 0;
    EXPECT_THROW(leiden(g, o), ValidationError);
}

TEST(ClusterHierarchy, TopLevelSeparatesCliques) {
    auto kg = kg_from_matrix(two_cliques_with_bridge());
    auto h = cluster_hierarchy(kg, 2, {1.0, 0.5}, 42);
    ASSERT_EQ(h.depth(), 2u);
    kg::Partition expected = {{"n0", "n1", "n2", "n3", "n4"}, {"n5", "n6", "n7", "n8", "n9"}};
    EXPECT_EQ(h.levels[1], expected);
    EXPECT_TRUE(check_refinement(h, kg.entity_ids()).ok);
}

TEST(ClusterHierarchy, RandomGraphsRefineAndAreDeterministic) {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 25; ++trial) {
        int n = 5 + static_cast<int>(rng() % 40);
        Matrix A(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng() % 5 == 0) A[i][j] = A[j][i] = 1 + rng() % 3;
        auto kg = kg_from_matrix(A);
        auto h = cluster_hierarchy(kg, 3, {2.0, 1.0, 0.5}, trial);
        auto r = check_refinement(h, kg.entity_ids());
        EXPECT_TRUE(r.ok) << r.reason;
        EXPECT_EQ(h, cluster_hierarchy(kg, 3, {2.0, 1.0, 0.5}, trial));
    }
}

TEST(ClusterHierarchy, Errors) {
    EXPECT_THROW(cluster_hierarchy(kg::KnowledgeGraph{}, 2, {1.0, 0.5}, 1), ValidationError);
    auto kg = kg_from_matrix(two_cliques_with_bridge());
    EXPECT_THROW(cluster_hierarchy(kg, 3, {1.0, 0.5}, 1), ValidationError);
    EXPECT_THROW(cluster_hierarchy(kg, 0, {1.0}, 1), ValidationError);
}

TEST(ClusterHierarchy, IsolatedEntitiesBecomeSingletons) {
    kg::KnowledgeGraph g;
    g.upsert_triple({"a", "r", "b", 1, {}});
    g.add_entity("lonely");
    auto h = cluster_hierarchy(g, 2, {1.0, 0.5}, 7);
    for (const auto& p : h.levels)
        EXPECT_NE(std::find(p.begin(), p.end(), kg::Block{"lonely"}), p.end());
}
