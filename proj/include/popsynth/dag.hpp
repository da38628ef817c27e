#ifndef POPSYNTH_DAG_HPP
#define POPSYNTH_DAG_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "popsynth/error.hpp"
#include "popsynth/random.hpp"

namespace popsynth {

using Edge = std::pair<std::size_t, std::size_t>;  // (parent, child)

/// Directed acyclic graph over attribute indices with a per-node in-degree cap.
/// Mutators reject self-loops, cycles and cap violations, so a Dag is always valid.
class Dag {
public:
    static constexpr std::size_t kUncapped = std::numeric_limits<std::size_t>::max();

    Dag() = default;
    explicit Dag(std::size_t node_count, std::size_t max_in_degree = kUncapped)
        : parents_(node_count), children_(node_count), max_in_degree_(max_in_degree) {}

    std::size_t node_count() const { return parents_.size(); }
    std::size_t max_in_degree() const { return max_in_degree_; }
    const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }
    const std::vector<std::size_t>& children(std::size_t v) const { return children_[v]; }
    std::size_t in_degree(std::size_t v) const { return parents_[v].size(); }

    bool has_edge(std::size_t from, std::size_t to) const {
        const auto& p = parents_[to];
        return std::find(p.begin(), p.end(), from) != p.end();
    }

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& p : parents_) n += p.size();
        return n;
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::size_t v = 0; v < node_count(); ++v)
            for (auto p : parents_[v]) out.emplace_back(p, v);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// True if a directed path from -> ... -> to exists (from == to counts).
    bool has_path(std::size_t from, std::size_t to) const {
        if (from == to) return true;
        std::vector<char> seen(node_count(), 0);
        std::vector<std::size_t> stack{from};
        seen[from] = 1;
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            for (auto c : children_[v]) {
                if (c == to) return true;
                if (!seen[c]) {
                    seen[c] = 1;
                    stack.push_back(c);
                }
            }
        }
        return false;
    }

    bool can_add_edge(std::size_t from, std::size_t to) const {
        return from != to && from < node_count() && to < node_count() && !has_edge(from, to) &&
               in_degree(to) < max_in_degree_ && !has_path(to, from);
    }

    void add_edge(std::size_t from, std::size_t to) {
        if (from >= node_count() || to >= node_count()) throw Error("edge endpoint out of range");
        if (from == to || has_path(to, from)) throw CyclicGraph();
        if (has_edge(from, to)) return;
        if (in_degree(to) >= max_in_degree_)
            throw Error("in-degree cap " + std::to_string(max_in_degree_) + " exceeded at node " +
                        std::to_string(to));
        insert_sorted(parents_[to], from);
        insert_sorted(children_[from], to);
    }

    void remove_edge(std::size_t from, std::size_t to) {
        erase_value(parents_[to], from);
        erase_value(children_[from], to);
    }

    /// Kahn's algorithm, smallest available index first.
    std::vector<std::size_t> topological_order() const {
        std::vector<std::size_t> indeg(node_count());
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t v = 0; v < node_count(); ++v)
            if ((indeg[v] = in_degree(v)) == 0) ready.push(v);
        std::vector<std::size_t> order;
        while (!ready.empty()) {
            auto v = ready.top();
            ready.pop();
            order.push_back(v);
            for (auto c : children_[v])
                if (--indeg[c] == 0) ready.push(c);
        }
        if (order.size() != node_count()) throw CyclicGraph();
        return order;
    }

    friend bool operator==(const Dag& a, const Dag& b) { return a.parents_ == b.parents_; }

private:
    static void insert_sorted(std::vector<std::size_t>& v, std::size_t x) {
        v.insert(std::lower_bound(v.begin(), v.end(), x), x);
    }
    static void erase_value(std::vector<std::size_t>& v, std::size_t x) {
        v.erase(std::remove(v.begin(), v.end(), x), v.end());
    }

    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
    std::size_t max_in_degree_ = kUncapped;
};

/// A permutation of attribute indices; position t holds the attribute generated t-th.
struct Ordering {
    std::vector<std::size_t> permutation;

    std::size_t size() const { return permutation.size(); }
    std::size_t operator[](std::size_t t) const { return permutation[t]; }
    friend bool operator==(const Ordering&, const Ordering&) = default;
};

inline bool is_permutation_of(const Ordering& o, std::size_t d) {
    if (o.size() != d) return false;
    std::vector<char> seen(d, 0);
    for (auto v : o.permutation) {
        if (v >= d || seen[v]) return false;
        seen[v] = 1;
    }
    return true;
}

/// Every edge parent -> child has the parent placed earlier.
inline bool respects_dag(const Ordering& o, const Dag& dag) {
    if (!is_permutation_of(o, dag.node_count())) return false;
    std::vector<std::size_t> pos(o.size());
    for (std::size_t t = 0; t < o.size(); ++t) pos[o[t]] = t;
    for (const auto& [p, c] : dag.edges())
        if (pos[p] >= pos[c]) return false;
    return true;
}

inline Ordering random_permutation(std::size_t d, Rng& rng) {
    Ordering o;
    o.permutation.resize(d);
    for (std::size_t i = 0; i < d; ++i) o.permutation[i] = i;
    for (std::size_t i = d; i > 1; --i) std::swap(o.permutation[i - 1], o.permutation[uniform_index(rng, i)]);
    return o;
}

enum class TraversalPolicy { Randomized, Deterministic };

/// Number of nodes on the longest directed path starting at each node.
inline std::vector<std::size_t> longest_chain_lengths(const Dag& dag) {
    const auto topo = dag.topological_order();
    std::vector<std::size_t> len(dag.node_count(), 1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        for (auto c : dag.children(*it)) len[*it] = std::max(len[*it], len[c] + 1);
    return len;
}

/// Root-to-leaf path traversal: start a path at an unvisited root, extend it
/// one child at a time while some unvisited child has all parents placed,
/// then move to the next root. Nodes never reached are appended in a
/// topological order of what remains.
///
/// Randomized: roots, children and leftover order drawn uniformly.
/// Deterministic: root with the longest descendant chain (ties to lower
/// index), lowest-index child, leftovers by lowest index.
inline Ordering sample_topological_order(const Dag& dag, TraversalPolicy policy, Rng& rng) {
    const auto d = dag.node_count();
    const bool randomized = policy == TraversalPolicy::Randomized;
    const auto chain = longest_chain_lengths(dag);  // throws CyclicGraph

    std::vector<char> placed(d, 0);
    std::vector<std::size_t> missing_parents(d);
    for (std::size_t v = 0; v < d; ++v) missing_parents[v] = dag.in_degree(v);

    Ordering out;
    out.permutation.reserve(d);
    auto place = [&](std::size_t v) {
        placed[v] = 1;
        out.permutation.push_back(v);
        for (auto c : dag.children(v)) --missing_parents[c];
    };
    auto pick = [&](const std::vector<std::size_t>& cands) {
        return randomized ? cands[uniform_index(rng, cands.size())] : cands.front();
    };

    std::vector<std::size_t> cands;
    for (;;) {
        cands.clear();
        for (std::size_t v = 0; v < d; ++v)
            if (!placed[v] && dag.in_degree(v) == 0) cands.push_back(v);
        if (cands.empty()) break;
        if (!randomized) {
            std::stable_sort(cands.begin(), cands.end(),
                             [&](std::size_t a, std::size_t b) { return chain[a] > chain[b]; });
        }
        auto v = pick(cands);
        place(v);
        for (;;) {
            cands.clear();
            for (auto c : dag.children(v))
                if (!placed[c] && missing_parents[c] == 0) cands.push_back(c);
            if (cands.empty()) break;
            v = pick(cands);
            place(v);
        }
    }

    while (out.size() < d) {
        cands.clear();
        for (std::size_t v = 0; v < d; ++v)
            if (!placed[v] && missing_parents[v] == 0) cands.push_back(v);
        if (cands.empty()) throw CyclicGraph();
        place(pick(cands));
    }
    return out;
}

inline Ordering sample_topological_order(const Dag& dag, TraversalPolicy policy, std::uint64_t seed) {
    Rng rng(seed);
    return sample_topological_order(dag, policy, rng);
}

inline nlohmann::json dag_to_json(const Dag& dag, const std::vector<std::string>& names) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [p, c] : dag.edges()) edges.push_back({names.at(p), names.at(c)});
    nlohmann::json j{{"nodes", names}, {"edges", edges}};
    if (dag.max_in_degree() != Dag::kUncapped) j["max_in_degree"] = dag.max_in_degree();
    return j;
}

/// Node names are resolved against `names`; the JSON node list must be a permutation of it.
inline Dag dag_from_json(const nlohmann::json& j, const std::vector<std::string>& names) {
    try {
        const auto& nodes = j.at("nodes");
        if (nodes.size() != names.size()) throw Error("DAG JSON node count does not match schema");
        auto index_of = [&](const std::string& n) {
            auto it = std::find(names.begin(), names.end(), n);
            if (it == names.end()) throw Error("DAG JSON references unknown node '" + n + "'");
            return static_cast<std::size_t>(it - names.begin());
        };
        for (const auto& n : nodes) index_of(n.get<std::string>());
        Dag dag(names.size(), j.value("max_in_degree", Dag::kUncapped));
        for (const auto& e : j.at("edges"))
            dag.add_edge(index_of(e.at(0).get<std::string>()), index_of(e.at(1).get<std::string>()));
        return dag;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed DAG JSON: ") + e.what());
    }
}

}  // namespace popsynth

#endif  // POPSYNTH_DAG_HPP
