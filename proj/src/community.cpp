#include "narrative/community.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include <fmt/format.h>

#include "narrative/error.hpp"

namespace narrative::community {

WeightedGraph::WeightedGraph(int n) : adj_(n), self_(n, 0.0), degree_(n, 0.0) {}

void WeightedGraph::add_edge(int u, int v, double w) {
    if (u < 0 || v < 0 || u >= size() || v >= size()) throw ValidationError("edge endpoint out of range");
    if (w < 0) throw ValidationError("negative edge weight");
    if (u == v) {
        self_[u] += w;
        degree_[u] += 2 * w;
    } else {
        adj_[u].emplace_back(v, w);
        adj_[v].emplace_back(u, w);
        degree_[u] += w;
        degree_[v] += w;
    }
    total_ += w;
}

double modularity(const WeightedGraph& g, const std::vector<int>& membership, double resolution) {
    const double m = g.total_weight();
    if (m <= 0) return 0.0;
    std::map<int, double> internal, degree;
    for (int v = 0; v < g.size(); ++v) {
        int c = membership[v];
        degree[c] += g.degree(v);
        internal[c] += g.self_loop(v);
        for (auto [u, w] : g.neighbors(v))
            if (u > v && membership[u] == c) internal[c] += w;
    }
    double q = 0;
    for (auto [c, k] : degree) q += internal[c] / m - resolution * (k / (2 * m)) * (k / (2 * m));
    return q;
}

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) return 0;
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

constexpr double kEps = 1e-12;

struct Pass {
    const WeightedGraph& g;
    double m2;  // 2m
    double gamma;
    Rng& rng;

    // Fast local moving. Community labels live in [0, n).
    void move_nodes(std::vector<int>& memb, const std::vector<int>& cons) const {
        const int n = g.size();
        std::vector<double> K(n, 0.0);
        std::vector<int> comm_cons(n, -1), count(n, 0);
        for (int v = 0; v < n; ++v) {
            K[memb[v]] += g.degree(v);
            comm_cons[memb[v]] = cons[v];
            ++count[memb[v]];
        }
        std::vector<int> empty;
        for (int c = n - 1; c >= 0; --c)
            if (count[c] == 0) empty.push_back(c);

        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        std::deque<int> queue(order.begin(), order.end());
        std::vector<char> queued(n, 1);
        std::vector<double> wto(n, 0.0);
        std::vector<int> touched;

        while (!queue.empty()) {
            int v = queue.front();
            queue.pop_front();
            queued[v] = 0;
            const int c = memb[v];
            const double kv = g.degree(v);

            touched.clear();
            for (auto [u, w] : g.neighbors(v)) {
                int d = memb[u];
                if (wto[d] == 0.0) touched.push_back(d);
                wto[d] += w;
            }
            K[c] -= kv;
            --count[c];

            int best = c;
            double best_gain = wto[c] - gamma * kv * K[c] / m2;
            for (int d : touched) {
                if (d == c || comm_cons[d] != cons[v]) continue;
                double gain = wto[d] - gamma * kv * K[d] / m2;
                if (gain > best_gain + kEps) {
                    best = d;
                    best_gain = gain;
                }
            }
            if (count[c] > 0 && 0.0 > best_gain + kEps && !empty.empty()) {
                best = empty.back();
                empty.pop_back();
                comm_cons[best] = cons[v];
            }
            for (int d : touched) wto[d] = 0.0;

            K[best] += kv;
            ++count[best];
            memb[v] = best;
            if (count[c] == 0) empty.push_back(c);
            if (best != c) {
                for (auto [u, w] : g.neighbors(v)) {
                    if (!queued[u] && memb[u] != best) {
                        queued[u] = 1;
                        queue.push_back(u);
                    }
                }
            }
        }
    }

    // Refinement: merge well-connected singletons inside each community of `memb`.
    std::vector<int> refine(const std::vector<int>& memb, double theta) const {
        const int n = g.size();
        std::vector<int> refined(n);
        for (int v = 0; v < n; ++v) refined[v] = v;
        std::vector<double> Kr(n), ext(n, 0.0);
        std::vector<int> size(n, 1);
        for (int v = 0; v < n; ++v) Kr[v] = g.degree(v);

        std::map<int, std::vector<int>> groups;
        for (int v = 0; v < n; ++v) groups[memb[v]].push_back(v);

        std::vector<double> wto(n, 0.0);
        std::vector<int> touched;
        for (auto& [label, S] : groups) {
            if (S.size() < 2) continue;
            double KS = 0;
            for (int v : S) KS += g.degree(v);
            for (int v : S) {
                double e = 0;
                for (auto [u, w] : g.neighbors(v))
                    if (memb[u] == label) e += w;
                ext[v] = e;
            }
            std::vector<int> R;
            for (int v : S)
                if (ext[v] + kEps >= gamma * g.degree(v) * (KS - g.degree(v)) / m2) R.push_back(v);
            rng.shuffle(R);

            for (int v : R) {
                const int own = refined[v];
                if (size[own] != 1) continue;
                const double kv = g.degree(v);
                touched.clear();
                for (auto [u, w] : g.neighbors(v)) {
                    if (memb[u] != label) continue;
                    int d = refined[u];
                    if (wto[d] == 0.0) touched.push_back(d);
                    wto[d] += w;
                }
                std::vector<std::pair<int, double>> cands{{own, 0.0}};
                for (int d : touched) {
                    if (d == own) continue;
                    bool well = ext[d] + kEps >= gamma * Kr[d] * (KS - Kr[d]) / m2;
                    if (!well) continue;
                    double gain = wto[d] - gamma * kv * Kr[d] / m2;
                    if (gain >= 0) cands.emplace_back(d, gain);
                }
                double top = 0;
                for (auto& [_, gain] : cands) top = std::max(top, gain);
                double total = 0;
                std::vector<double> weight;
                for (auto& [_, gain] : cands) {
                    weight.push_back(std::exp((gain - top) / theta));
                    total += weight.back();
                }
                double r = rng.unit() * total;
                int chosen = cands.back().first;
                for (std::size_t i = 0; i < cands.size(); ++i) {
                    if (r < weight[i]) {
                        chosen = cands[i].first;
                        break;
                    }
                    r -= weight[i];
                }
                if (chosen != own) {
                    double w_vc = wto[chosen];
                    ext[chosen] = ext[chosen] + ext[v] - 2 * w_vc;
                    Kr[chosen] += kv;
                    ++size[chosen];
                    Kr[own] = 0;
                    size[own] = 0;
                    refined[v] = chosen;
                }
                for (int d : touched) wto[d] = 0.0;
            }
        }
        return refined;
    }
};

// Renumbers labels 0..k-1 by first appearance; returns k.
int compact(std::vector<int>& labels) {
    std::map<int, int> remap;
    for (int& l : labels) {
        auto [it, _] = remap.emplace(l, static_cast<int>(remap.size()));
        l = it->second;
    }
    return static_cast<int>(remap.size());
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<int>& groups, int k) {
    WeightedGraph out(k);
    std::map<std::pair<int, int>, double> edges;
    std::vector<double> self(k, 0.0);
    for (int v = 0; v < g.size(); ++v) {
        self[groups[v]] += g.self_loop(v);
        for (auto [u, w] : g.neighbors(v)) {
            if (u <= v) continue;
            int a = groups[v], b = groups[u];
            if (a == b)
                self[a] += w;
            else
                edges[{std::min(a, b), std::max(a, b)}] += w;
        }
    }
    for (int c = 0; c < k; ++c)
        if (self[c] > 0) out.add_edge(c, c, self[c]);
    for (auto& [e, w] : edges) out.add_edge(e.first, e.second, w);
    return out;
}

}  // namespace

std::vector<int> leiden(const WeightedGraph& g, const LeidenOptions& opts, const std::vector<int>* constraint) {
    const int n = g.size();
    if (opts.resolution <= 0) throw ValidationError("resolution must be positive");
    if (opts.randomness <= 0) throw ValidationError("refinement randomness must be positive");
    if (constraint && static_cast<int>(constraint->size()) != n)
        throw ValidationError("constraint labels must cover every node");
    std::vector<int> result(n);
    for (int v = 0; v < n; ++v) result[v] = v;
    if (n == 0 || g.total_weight() <= 0) {
        compact(result);
        return result;
    }

    Rng rng(opts.seed);
    std::vector<int> cons(n, 0);
    if (constraint) cons = *constraint;

    WeightedGraph cur = g;
    std::vector<int> memb(n);
    for (int v = 0; v < n; ++v) memb[v] = v;
    std::vector<int> node_of(n);  // original node -> node of `cur`
    for (int v = 0; v < n; ++v) node_of[v] = v;

    for (int it = 0; it < opts.max_iterations; ++it) {
        Pass pass{cur, 2 * g.total_weight(), opts.resolution, rng};
        pass.move_nodes(memb, cons);
        std::vector<int> labels = memb;
        int communities = compact(labels);
        if (communities == cur.size()) break;

        std::vector<int> refined = pass.refine(memb, opts.randomness);
        int parts = compact(refined);
        if (parts == cur.size()) {
            // Refinement merged nothing; aggregate the unrefined partition instead.
            refined = labels;
            parts = communities;
        }
        std::vector<int> next_memb(parts), next_cons(parts);
        for (int v = 0; v < cur.size(); ++v) {
            next_memb[refined[v]] = labels[v];
            next_cons[refined[v]] = cons[v];
        }
        for (int v = 0; v < n; ++v) node_of[v] = refined[node_of[v]];
        cur = aggregate(cur, refined, parts);
        memb = std::move(next_memb);
        cons = std::move(next_cons);
    }
    for (int v = 0; v < n; ++v) result[v] = memb[node_of[v]];
    compact(result);
    return result;
}

IndexedGraph to_weighted_graph(const kg::KnowledgeGraph& kg) {
    IndexedGraph out;
    std::map<std::string, int> index;
    for (const auto& [id, _] : kg.entities()) {
        index[id] = static_cast<int>(out.ids.size());
        out.ids.push_back(id);
    }
    std::map<std::pair<int, int>, double> edges;
    for (const auto& [_, t] : kg.triples()) {
        int a = index.at(t.head), b = index.at(t.tail);
        edges[{std::min(a, b), std::max(a, b)}] += t.weight;
    }
    out.graph = WeightedGraph(static_cast<int>(out.ids.size()));
    for (auto& [e, w] : edges) out.graph.add_edge(e.first, e.second, w);
    return out;
}

kg::Hierarchy cluster_hierarchy(const kg::KnowledgeGraph& kg, int max_levels,
                                const std::vector<double>& resolution_schedule, std::uint64_t seed) {
    if (kg.empty()) throw ValidationError("cannot cluster an empty graph");
    if (max_levels < 1) throw ValidationError("max_levels must be at least 1");
    if (static_cast<int>(resolution_schedule.size()) < max_levels)
        throw ValidationError(fmt::format("resolution_schedule has {} entries but {} levels were requested",
                                          resolution_schedule.size(), max_levels));
    for (double r : resolution_schedule)
        if (!(r > 0)) throw ValidationError("resolutions must be positive");

    auto ig = to_weighted_graph(kg);
    const int n = ig.graph.size();
    std::vector<std::vector<int>> labels(max_levels);
    for (int level = max_levels; level >= 1; --level) {
        LeidenOptions opts;
        opts.resolution = resolution_schedule[level - 1];
        opts.seed = seed + static_cast<std::uint64_t>(level) * 0x9e3779b97f4a7c15ULL;
        const std::vector<int>* parent = level == max_levels ? nullptr : &labels[level];
        labels[level - 1] = leiden(ig.graph, opts, parent);
    }

    kg::Hierarchy h;
    for (int level = 0; level < max_levels; ++level) {
        std::map<int, kg::Block> blocks;
        for (int v = 0; v < n; ++v) blocks[labels[level][v]].push_back(ig.ids[v]);
        kg::Partition p;
        for (auto& [_, b] : blocks) p.push_back(std::move(b));
        h.levels.push_back(std::move(p));
    }
    h.normalize();
    return h;
}

}  // namespace narrative::community
