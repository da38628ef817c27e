#ifndef POPSYNTH_BAYESNET_HPP
#define POPSYNTH_BAYESNET_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "popsynth/dag.hpp"
#include "popsynth/dataset.hpp"
#include "popsynth/random.hpp"

namespace popsynth {

namespace detail {

/// Mixed-radix index of the parents' values in `rec`.
inline std::uint64_t parent_config(RecordView rec, std::span<const std::size_t> parents,
                                   std::span<const std::size_t> cards) {
    std::uint64_t j = 0;
    for (auto p : parents) j = j * cards[p] + rec[p];
    return j;
}

}  // namespace detail

/// N_ijk counts of one family: for each observed parent configuration j, the
/// histogram of the child's categories.
inline std::unordered_map<std::uint64_t, std::vector<std::size_t>> family_counts(
    const Dataset& ds, std::size_t node, std::span<const std::size_t> parents) {
    const auto cards = ds.schema().cardinalities();
    const auto r = cards[node];
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> counts;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        auto rec = ds.record(n);
        auto& row = counts[detail::parent_config(rec, parents, cards)];
        if (row.empty()) row.assign(r, 0);
        ++row[rec[node]];
    }
    return counts;
}

/// Log K2 family score:
///   sum_j [ lgamma(r) - lgamma(N_ij + r) + sum_k lgamma(N_ijk + 1) ].
/// Unobserved parent configurations contribute zero and are skipped.
inline double k2_log_score(const Dataset& ds, std::size_t node, std::span<const std::size_t> parents) {
    const double r = static_cast<double>(ds.schema().cardinality(node));
    const double lg_r = std::lgamma(r);
    double score = 0.0;
    for (const auto& [cfg, row] : family_counts(ds, node, parents)) {
        std::size_t nij = 0;
        double s = lg_r;
        for (auto nijk : row) {
            nij += nijk;
            s += std::lgamma(static_cast<double>(nijk) + 1.0);
        }
        score += s - std::lgamma(static_cast<double>(nij) + r);
    }
    return score;
}

/// Memoized family scores, keyed by node and sorted parent set.
class K2ScoreCache {
public:
    explicit K2ScoreCache(const Dataset& ds) : ds_(ds) {}

    double family(std::size_t node, std::vector<std::size_t> parents) {
        std::sort(parents.begin(), parents.end());
        auto key = std::make_pair(node, parents);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        double s = k2_log_score(ds_, node, parents);
        cache_.emplace(std::move(key), s);
        return s;
    }

    double total(const Dag& dag) {
        double s = 0.0;
        for (std::size_t v = 0; v < dag.node_count(); ++v) s += family(v, dag.parents(v));
        return s;
    }

private:
    const Dataset& ds_;
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> cache_;
};

struct HillClimbOptions {
    std::size_t max_in_degree = 1;
    std::size_t restarts = 4;
    std::uint64_t seed = 0;
};

struct StructureSearchResult {
    Dag dag;
    double score = 0.0;
    std::size_t restart = 0;  // which restart produced the winner
    std::size_t moves = 0;    // moves applied in that restart
};

/// Best-improvement greedy search over single-edge add/delete/reverse moves
/// from the empty graph, scored by K2. Each restart shuffles the order in
/// which moves are evaluated, which decides ties between equal-gain moves.
/// Gains equal to a relative 1e-6 count as tied: K2 is nearly score
/// equivalent, so the two orientations of an edge differ only in the last
/// digits, and without the tolerance every restart would orient edges
/// identically and end in the same local optimum.
inline StructureSearchResult hill_climb_search(const Dataset& ds, const HillClimbOptions& opt) {
    if (opt.max_in_degree < 1) throw ConfigError("max_in_degree must be >= 1");
    if (opt.restarts < 1) throw ConfigError("restarts must be >= 1");
    constexpr double kMinGain = 1e-9;
    constexpr double kTieTolerance = 1e-6;
    const auto d = ds.schema().size();
    K2ScoreCache scores(ds);
    Rng rng(opt.seed);

    std::vector<Edge> pairs;
    for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = 0; v < d; ++v)
            if (u != v) pairs.emplace_back(u, v);

    auto with = [](std::vector<std::size_t> ps, std::size_t x) {
        ps.push_back(x);
        return ps;
    };
    auto without = [](std::vector<std::size_t> ps, std::size_t x) {
        ps.erase(std::remove(ps.begin(), ps.end(), x), ps.end());
        return ps;
    };

    // Strictly better than the incumbent by more than the tie tolerance.
    auto beats = [](double gain, double incumbent) {
        return gain > incumbent + kTieTolerance * std::max(1.0, std::abs(incumbent));
    };

    StructureSearchResult best;
    bool have_best = false;
    for (std::size_t restart = 0; restart < opt.restarts; ++restart) {
        for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[uniform_index(rng, i)]);

        Dag dag(d, opt.max_in_degree);
        double total = scores.total(dag);
        std::size_t moves = 0;
        for (;;) {
            enum class Move { None, Add, Delete, Reverse } best_move = Move::None;
            double best_gain = kMinGain;
            Edge best_edge{};
            for (const auto& [u, v] : pairs) {
                const auto& pv = dag.parents(v);
                const double cur_v = scores.family(v, pv);
                if (dag.has_edge(u, v)) {
                    const double drop = scores.family(v, without(pv, u)) - cur_v;
                    if (beats(drop, best_gain)) {
                        best_gain = drop;
                        best_move = Move::Delete;
                        best_edge = {u, v};
                    }
                    if (dag.in_degree(u) < opt.max_in_degree) {
                        dag.remove_edge(u, v);
                        const bool acyclic = !dag.has_path(u, v);
                        dag.add_edge(u, v);
                        if (acyclic) {
                            const auto& pu = dag.parents(u);
                            const double gain = drop + scores.family(u, with(pu, v)) - scores.family(u, pu);
                            if (beats(gain, best_gain)) {
                                best_gain = gain;
                                best_move = Move::Reverse;
                                best_edge = {u, v};
                            }
                        }
                    }
                } else if (dag.can_add_edge(u, v)) {
                    const double gain = scores.family(v, with(pv, u)) - cur_v;
                    if (beats(gain, best_gain)) {
                        best_gain = gain;
                        best_move = Move::Add;
                        best_edge = {u, v};
                    }
                }
            }
            if (best_move == Move::None) break;
            const auto [u, v] = best_edge;
            switch (best_move) {
                case Move::Add: dag.add_edge(u, v); break;
                case Move::Delete: dag.remove_edge(u, v); break;
                case Move::Reverse:
                    dag.remove_edge(u, v);
                    dag.add_edge(v, u);
                    break;
                case Move::None: break;
            }
            total += best_gain;
            ++moves;
            assert(std::abs(total - scores.total(dag)) <= 1e-6 * std::max(1.0, std::abs(total)));
        }
        total = scores.total(dag);
        if (!have_best || total > best.score) {
            best = {dag, total, restart, moves};
            have_best = true;
        }
    }
    return best;
}

inline Dag hill_climb(const Dataset& ds, std::size_t max_in_degree, std::size_t restarts, std::uint64_t seed) {
    return hill_climb_search(ds, {max_in_degree, restarts, seed}).dag;
}

/// Conditional table of one node: rows indexed by parent configuration (mixed
/// radix over parents in ascending index order), each a distribution over the
/// node's categories.
struct NodeCpt {
    std::vector<std::size_t> parents;
    std::size_t cardinality = 0;
    std::size_t config_count = 1;
    std::vector<double> table;  // config_count * cardinality

    std::span<const double> row(std::uint64_t config) const {
        return {table.data() + config * cardinality, cardinality};
    }
    std::span<double> row(std::uint64_t config) { return {table.data() + config * cardinality, cardinality}; }
};

/// A DAG with fitted conditionals. `marginals` holds each node's unconditional
/// distribution estimated from the same data and smoothing, used when a node
/// must be drawn without its parents.
struct BayesNet {
    Dag dag;
    std::vector<std::size_t> cardinalities;
    std::vector<NodeCpt> cpts;
    std::vector<std::vector<double>> marginals;
    double alpha = 0.0;
    SchemaPtr schema;  // may be null for purely numeric networks

    std::size_t node_count() const { return cardinalities.size(); }

    std::uint64_t config_of(std::size_t node, RecordView assignment) const {
        return detail::parent_config(assignment, cpts[node].parents, cardinalities);
    }
    std::span<const double> conditional(std::size_t node, RecordView assignment) const {
        return cpts[node].row(config_of(node, assignment));
    }
};

/// Allocates uniform tables for every node of `dag`.
inline BayesNet make_uniform_bayesnet(const Dag& dag, std::vector<std::size_t> cards, SchemaPtr schema = {}) {
    if (cards.size() != dag.node_count()) throw Error("cardinality count does not match DAG");
    BayesNet bn;
    bn.dag = dag;
    bn.cardinalities = std::move(cards);
    bn.schema = std::move(schema);
    for (std::size_t v = 0; v < dag.node_count(); ++v) {
        NodeCpt cpt;
        cpt.parents = dag.parents(v);
        cpt.cardinality = bn.cardinalities[v];
        for (auto p : cpt.parents) cpt.config_count *= bn.cardinalities[p];
        cpt.table.assign(cpt.config_count * cpt.cardinality, 1.0 / static_cast<double>(cpt.cardinality));
        bn.cpts.push_back(std::move(cpt));
        bn.marginals.emplace_back(bn.cardinalities[v], 1.0 / static_cast<double>(bn.cardinalities[v]));
    }
    return bn;
}

/// Add-alpha estimates (N_ijk + a) / (N_ij + a r). Configurations never seen
/// with alpha = 0 get the uniform row.
inline BayesNet fit_cpts(const Dataset& ds, const Dag& dag, double alpha) {
    if (dag.node_count() != ds.schema().size()) throw Error("DAG node count does not match dataset");
    if (!(alpha >= 0.0)) throw ConfigError("smoothing alpha must be non-negative");
    BayesNet bn = make_uniform_bayesnet(dag, ds.schema().cardinalities(), ds.schema_ptr());
    bn.alpha = alpha;

    auto normalize = [alpha](std::span<const std::size_t> counts, std::span<double> out) {
        const double r = static_cast<double>(counts.size());
        const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
        const double denom = n + alpha * r;
        for (std::size_t k = 0; k < counts.size(); ++k)
            out[k] = denom > 0.0 ? (static_cast<double>(counts[k]) + alpha) / denom : 1.0 / r;
    };

    for (std::size_t v = 0; v < dag.node_count(); ++v) {
        auto& cpt = bn.cpts[v];
        std::vector<std::size_t> counts(cpt.config_count * cpt.cardinality, 0);
        std::vector<std::size_t> marginal(cpt.cardinality, 0);
        for (std::size_t n = 0; n < ds.size(); ++n) {
            auto rec = ds.record(n);
            ++counts[bn.config_of(v, rec) * cpt.cardinality + rec[v]];
            ++marginal[rec[v]];
        }
        for (std::size_t j = 0; j < cpt.config_count; ++j)
            normalize(std::span<const std::size_t>(counts.data() + j * cpt.cardinality, cpt.cardinality), cpt.row(j));
        normalize(marginal, bn.marginals[v]);
    }
    return bn;
}

/// Draws every record along the DAG's smallest-index topological order from one seeded stream.
inline Dataset bn_ancestral_sample(const BayesNet& bn, std::size_t count, std::uint64_t seed) {
    if (!bn.schema) throw Error("ancestral sampling needs a schema-bound network");
    if (count < 1) throw ConfigError("sample count must be >= 1");
    const auto order = bn.dag.topological_order();
    Rng rng(seed);
    Dataset out(bn.schema, "generated");
    out.reserve(count);
    Record rec(bn.node_count(), 0);
    for (std::size_t n = 0; n < count; ++n) {
        for (auto v : order) rec[v] = static_cast<CategoryId>(sample_categorical(bn.conditional(v, rec), rng));
        out.add_unchecked(rec);
    }
    return out;
}

namespace detail {

inline std::string join_labels(const AttributeSchema& s, std::span<const std::size_t> parents, std::uint64_t config) {
    std::vector<std::string> labels(parents.size());
    for (std::size_t i = parents.size(); i-- > 0;) {
        const auto card = s.cardinality(parents[i]);
        labels[i] = s.attribute(parents[i]).categories[config % card].label;
        config /= card;
    }
    std::string key;
    for (std::size_t i = 0; i < labels.size(); ++i) key += (i ? "," : "") + labels[i];
    return key;
}

}  // namespace detail

/// DAG JSON plus "alpha" and per-node tables. Rows are keyed by the parents'
/// category labels joined with commas (labels never contain commas); a
/// parentless node has the single key "".
inline nlohmann::json bayesnet_to_json(const BayesNet& bn) {
    if (!bn.schema) throw Error("BayesNet JSON needs a schema-bound network");
    const auto& s = *bn.schema;
    auto j = dag_to_json(bn.dag, s.names());
    j["alpha"] = bn.alpha;
    nlohmann::json cpts = nlohmann::json::object();
    for (std::size_t v = 0; v < bn.node_count(); ++v) {
        const auto& cpt = bn.cpts[v];
        nlohmann::json parents = nlohmann::json::array();
        for (auto p : cpt.parents) parents.push_back(s.attribute(p).name);
        nlohmann::json cats = nlohmann::json::array();
        for (const auto& c : s.attribute(v).categories) cats.push_back(c.label);
        nlohmann::json rows = nlohmann::json::object();
        for (std::size_t cfg = 0; cfg < cpt.config_count; ++cfg) {
            auto row = cpt.row(cfg);
            rows[detail::join_labels(s, cpt.parents, cfg)] = std::vector<double>(row.begin(), row.end());
        }
        cpts[s.attribute(v).name] = {
            {"parents", parents}, {"categories", cats}, {"rows", rows}, {"marginal", bn.marginals[v]}};
    }
    j["cpts"] = cpts;
    return j;
}

inline BayesNet bayesnet_from_json(const nlohmann::json& j, SchemaPtr schema) {
    const auto& s = *schema;
    Dag dag = dag_from_json(j, s.names());
    BayesNet bn = make_uniform_bayesnet(dag, s.cardinalities(), schema);
    try {
        bn.alpha = j.value("alpha", 0.0);
        const auto& cpts = j.at("cpts");
        for (std::size_t v = 0; v < bn.node_count(); ++v) {
            const auto& jn = cpts.at(s.attribute(v).name);
            auto& cpt = bn.cpts[v];
            for (std::size_t cfg = 0; cfg < cpt.config_count; ++cfg) {
                auto probs = jn.at("rows").at(detail::join_labels(s, cpt.parents, cfg)).get<std::vector<double>>();
                if (probs.size() != cpt.cardinality) throw Error("CPT row width mismatch for " + s.attribute(v).name);
                std::copy(probs.begin(), probs.end(), cpt.row(cfg).begin());
            }
            if (jn.contains("marginal")) {
                bn.marginals[v] = jn["marginal"].get<std::vector<double>>();
                if (bn.marginals[v].size() != cpt.cardinality) throw Error("marginal width mismatch");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed BayesNet JSON: ") + e.what());
    }
    return bn;
}

}  // namespace popsynth

#endif  // POPSYNTH_BAYESNET_HPP
