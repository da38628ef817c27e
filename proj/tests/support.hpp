#ifndef POPSYNTH_TESTS_SUPPORT_HPP
#define POPSYNTH_TESTS_SUPPORT_HPP

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "popsynth/popsynth.hpp"

namespace popsynth::testing {

/// Schema with attributes a0, a1, ... of the given cardinalities.
inline SchemaPtr make_schema(const std::vector<std::size_t>& cards) {
    std::vector<Attribute> attrs;
    for (std::size_t i = 0; i < cards.size(); ++i) {
        Attribute a{"a" + std::to_string(i), "Attribute " + std::to_string(i), {}};
        for (std::size_t k = 0; k < cards[i]; ++k)
            a.categories.push_back({0, "c" + std::to_string(k), "value " + std::to_string(k) + " of " + std::to_string(i)});
        attrs.push_back(std::move(a));
    }
    return std::make_shared<const AttributeSchema>(std::move(attrs));
}

inline Dataset random_dataset(SchemaPtr schema, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds(schema, "random");
    Record rec(schema->size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < rec.size(); ++i)
            rec[i] = static_cast<CategoryId>(uniform_index(rng, schema->cardinality(i)));
        ds.add(rec);
    }
    return ds;
}

inline Dataset from_records(SchemaPtr schema, const std::vector<Record>& recs) {
    Dataset ds(std::move(schema));
    for (const auto& r : recs) ds.add(r);
    return ds;
}

/// Two-attribute schema laid out like the survey's Age Group and Gender.
inline SchemaPtr age_gender_schema() {
    std::vector<Attribute> attrs{
        {"age", "Age Group", {{0, "21-25", "21–25 years"}, {0, "26-30", "26–30 years"}, {0, "31-35", "31–35 years"}}},
        {"gender", "Gender", {{0, "Male", "Male"}, {0, "Female", "Female"}}},
    };
    return std::make_shared<const AttributeSchema>(std::move(attrs));
}

/// The small worked example of a 100-person population over nine
/// combinations. Combination i is encoded as attribute values (i / 3, i % 3).
struct TwoModelExample {
    SchemaPtr schema = make_schema({4, 3});
    std::vector<std::size_t> population_counts{30, 20, 10, 10, 10, 5, 5, 5, 5};

    Record combo(std::size_t i) const {
        return {static_cast<CategoryId>(i / 3), static_cast<CategoryId>(i % 3)};
    }
    Record infeasible(std::size_t j) const { return {3, static_cast<CategoryId>(j % 3)}; }

    Dataset build(const std::vector<std::size_t>& counts, std::size_t infeasible_count) const {
        Dataset ds(schema);
        for (std::size_t i = 0; i < counts.size(); ++i)
            for (std::size_t c = 0; c < counts[i]; ++c) ds.add(combo(i));
        for (std::size_t j = 0; j < infeasible_count; ++j) ds.add(infeasible(j));
        return ds;
    }
    Dataset population() const { return build(population_counts, 0); }
    Dataset model_a() const { return build({40, 30, 10, 10, 0, 0, 0, 0, 0}, 10); }
    Dataset model_b() const { return build({0, 20, 20, 10, 10, 10, 10, 5, 5}, 10); }
};

/// A DAG on d nodes where each ordered pair i<j of a random permutation is
/// an edge with probability p, subject to the in-degree cap.
inline Dag random_dag(std::size_t d, double p, std::size_t cap, Rng& rng) {
    auto perm = random_permutation(d, rng);
    Dag dag(d, cap);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (uniform01(rng) < p && dag.in_degree(perm[j]) < cap) dag.add_edge(perm[i], perm[j]);
    return dag;
}

// ---- brute-force oracles, independent of the library's indexing ----

inline std::vector<std::vector<CategoryId>> rows_of(const Dataset& ds) {
    std::vector<std::vector<CategoryId>> out;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        auto r = ds.record(n);
        out.emplace_back(r.begin(), r.end());
    }
    return out;
}

inline std::set<std::vector<CategoryId>> tuple_set(const Dataset& ds) {
    auto rows = rows_of(ds);
    return {rows.begin(), rows.end()};
}

struct BruteMetrics {
    double precision, recall, f1;
    std::size_t unique_generated;
    std::size_t general, missing, sampling_zero, structural_zero, uncovered;
};

inline BruteMetrics brute_metrics(const Dataset& gen, const Dataset& sample, const Dataset& pop) {
    const auto G = tuple_set(gen), S = tuple_set(sample), H = tuple_set(pop);
    BruteMetrics m{};
    std::size_t hits = 0;
    for (const auto& r : rows_of(gen)) hits += H.count(r);
    std::size_t covered = 0;
    for (const auto& r : rows_of(pop)) covered += G.count(r);
    m.precision = static_cast<double>(hits) / static_cast<double>(gen.size());
    m.recall = static_cast<double>(covered) / static_cast<double>(pop.size());
    m.f1 = (m.precision + m.recall) == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
    m.unique_generated = G.size();
    std::set<std::vector<CategoryId>> all = G;
    all.insert(S.begin(), S.end());
    all.insert(H.begin(), H.end());
    for (const auto& t : all) {
        const bool s = S.count(t), p = H.count(t), g = G.count(t);
        if (s && p && g) ++m.general;
        else if (s && p) ++m.missing;
        else if (!s && p && g) ++m.sampling_zero;
        else if (!s && !p && g) ++m.structural_zero;
        else ++m.uncovered;
    }
    return m;
}

/// Relative SRMSE computed from frequency maps keyed by value tuples.
inline double brute_srmse(const Dataset& ref, const Dataset& gen, int order) {
    const auto d = ref.schema().size();
    auto freq = [](const Dataset& ds, std::vector<std::size_t> attrs) {
        std::map<std::vector<CategoryId>, double> f;
        for (std::size_t n = 0; n < ds.size(); ++n) {
            std::vector<CategoryId> key;
            for (auto a : attrs) key.push_back(ds.at(n, a));
            f[key] += 1.0 / static_cast<double>(ds.size());
        }
        return f;
    };
    std::vector<std::vector<std::size_t>> groups;
    if (order == 1)
        for (std::size_t a = 0; a < d; ++a) groups.push_back({a});
    else
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b) groups.push_back({a, b});
    double total = 0.0;
    for (const auto& g : groups) {
        const auto P = freq(ref, g);
        const auto Q = freq(gen, g);
        double s = 0.0;
        for (const auto& [k, p] : P) {
            const double q = Q.count(k) ? Q.at(k) : 0.0;
            s += ((p - q) / p) * ((p - q) / p);
        }
        total += std::sqrt(s / static_cast<double>(P.size()));
    }
    return total / static_cast<double>(groups.size());
}

/// Exact joint by brute-force enumeration of value tuples (map keyed by tuple).
inline std::map<std::vector<CategoryId>, double> brute_joint(const BayesNet& bn) {
    std::map<std::vector<CategoryId>, double> out;
    std::vector<CategoryId> rec(bn.node_count(), 0);
    std::function<void(std::size_t)> rec_fill = [&](std::size_t v) {
        if (v == rec.size()) {
            double p = 1.0;
            for (std::size_t i = 0; i < rec.size(); ++i) {
                std::size_t cfg = 0;
                for (auto par : bn.cpts[i].parents) cfg = cfg * bn.cardinalities[par] + rec[par];
                p *= bn.cpts[i].table[cfg * bn.cardinalities[i] + rec[i]];
            }
            out[rec] = p;
            return;
        }
        for (std::size_t k = 0; k < bn.cardinalities[v]; ++k) {
            rec[v] = static_cast<CategoryId>(k);
            rec_fill(v + 1);
        }
    };
    rec_fill(0);
    return out;
}

/// Strong chain a0 -> a1 -> ... over binary attributes: root uniform, each
/// child copies its parent with probability `keep`.
inline BayesNet binary_chain(std::size_t d, double keep) {
    auto schema = make_schema(std::vector<std::size_t>(d, 2));
    Dag dag(d, 1);
    for (std::size_t i = 1; i < d; ++i) dag.add_edge(i - 1, i);
    auto bn = make_uniform_bayesnet(dag, schema->cardinalities(), schema);
    for (std::size_t i = 1; i < d; ++i) {
        auto r0 = bn.cpts[i].row(0);
        auto r1 = bn.cpts[i].row(1);
        r0[0] = keep, r0[1] = 1 - keep;
        r1[0] = 1 - keep, r1[1] = keep;
    }
    return bn;
}

/// Three-node toy A(2) -> B(3) -> C(2) with hand-set tables whose argmax
/// entries dominate by a wide margin.
inline BayesNet toy_three() {
    auto schema = make_schema({2, 3, 2});
    Dag dag(3, 1);
    dag.add_edge(0, 1);
    dag.add_edge(1, 2);
    auto bn = make_uniform_bayesnet(dag, schema->cardinalities(), schema);
    auto set = [](std::span<double> row, std::initializer_list<double> v) { std::copy(v.begin(), v.end(), row.begin()); };
    set(bn.cpts[0].row(0), {0.7, 0.3});
    set(bn.cpts[1].row(0), {0.1, 0.6, 0.3});
    set(bn.cpts[1].row(1), {0.5, 0.2, 0.3});
    set(bn.cpts[2].row(0), {0.8, 0.2});
    set(bn.cpts[2].row(1), {0.25, 0.75});
    set(bn.cpts[2].row(2), {0.5, 0.5});
    bn.marginals = exact_marginals(bn);
    return bn;
}

}  // namespace popsynth::testing

#endif  // POPSYNTH_TESTS_SUPPORT_HPP
