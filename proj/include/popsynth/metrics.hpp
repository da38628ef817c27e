#ifndef POPSYNTH_METRICS_HPP
#define POPSYNTH_METRICS_HPP

#include <cmath>
#include <span>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "popsynth/dataset.hpp"

namespace popsynth {

enum class SrmseVariant {
    Relative,      // root mean of squared per-cell relative errors over cells with P > 0
    Conventional,  // RMSE over all cells divided by the mean cell probability
};

/// SRMSE between two probability tables of equal shape.
inline double srmse_cells(std::span<const double> reference, std::span<const double> generated,
                          SrmseVariant variant = SrmseVariant::Relative) {
    if (reference.size() != generated.size()) throw Error("SRMSE tables differ in size");
    if (variant == SrmseVariant::Relative) {
        double sum = 0.0;
        std::size_t valid = 0;
        for (std::size_t c = 0; c < reference.size(); ++c) {
            if (reference[c] <= 0.0) continue;
            const double rel = (reference[c] - generated[c]) / reference[c];
            sum += rel * rel;
            ++valid;
        }
        return valid ? std::sqrt(sum / static_cast<double>(valid)) : 0.0;
    }
    if (reference.empty()) return 0.0;
    const double n = static_cast<double>(reference.size());
    double sq = 0.0;
    double mass = 0.0;
    for (std::size_t c = 0; c < reference.size(); ++c) {
        sq += (reference[c] - generated[c]) * (reference[c] - generated[c]);
        mass += reference[c];
    }
    return mass > 0.0 ? std::sqrt(sq / n) / (mass / n) : 0.0;
}

inline std::vector<double> marginal_table(const Dataset& ds, std::size_t attr) {
    std::vector<double> t(ds.schema().cardinality(attr), 0.0);
    for (std::size_t n = 0; n < ds.size(); ++n) t[ds.at(n, attr)] += 1.0;
    for (auto& p : t) p /= static_cast<double>(ds.size());
    return t;
}

/// Joint table of attributes a and b, row-major with a as the row.
inline std::vector<double> bivariate_table(const Dataset& ds, std::size_t a, std::size_t b) {
    const auto rb = ds.schema().cardinality(b);
    std::vector<double> t(ds.schema().cardinality(a) * rb, 0.0);
    for (std::size_t n = 0; n < ds.size(); ++n) t[ds.at(n, a) * rb + ds.at(n, b)] += 1.0;
    for (auto& p : t) p /= static_cast<double>(ds.size());
    return t;
}

/// order 1: mean over attributes of the per-attribute marginal SRMSE.
/// order 2: mean over unordered attribute pairs of the per-pair joint SRMSE.
inline double srmse(const Dataset& reference, const Dataset& generated, int order,
                    SrmseVariant variant = SrmseVariant::Relative) {
    if (!(reference.schema() == generated.schema())) throw Error("SRMSE needs datasets over one schema");
    const auto d = reference.schema().size();
    double sum = 0.0;
    std::size_t terms = 0;
    if (order == 1) {
        for (std::size_t a = 0; a < d; ++a, ++terms)
            sum += srmse_cells(marginal_table(reference, a), marginal_table(generated, a), variant);
    } else if (order == 2) {
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b, ++terms)
                sum += srmse_cells(bivariate_table(reference, a, b), bivariate_table(generated, a, b), variant);
    } else {
        throw Error("SRMSE order must be 1 or 2");
    }
    return terms ? sum / static_cast<double>(terms) : 0.0;
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// precision: share of generated records whose full combination occurs in
/// the population. recall: share of population records whose combination
/// occurs among the generated ones.
inline PrecisionRecall precision_recall_f1(const CombinationIndex& generated, const CombinationIndex& population) {
    std::size_t feasible = 0;
    for (const auto& [k, c] : generated.counts())
        if (population.contains(k)) feasible += c;
    std::size_t covered = 0;
    for (const auto& [k, c] : population.counts())
        if (generated.contains(k)) covered += c;
    PrecisionRecall pr;
    if (generated.total()) pr.precision = static_cast<double>(feasible) / generated.total();
    if (population.total()) pr.recall = static_cast<double>(covered) / population.total();
    pr.f1 = f1_score(pr.precision, pr.recall);
    return pr;
}

inline PrecisionRecall precision_recall_f1(const Dataset& generated, const Dataset& population) {
    return precision_recall_f1(CombinationIndex(generated), CombinationIndex(population));
}

/// Unique combinations of sample ∪ population ∪ generated, by membership:
///   general          sample, population, generated
///   missing          sample, population, not generated
///   sampling_zero    population and generated only
///   structural_zero  generated only
///   uncovered        every other membership pattern (e.g. population only)
struct ZeroClasses {
    std::size_t general = 0;
    std::size_t missing = 0;
    std::size_t sampling_zero = 0;
    std::size_t structural_zero = 0;
    std::size_t uncovered = 0;

    std::size_t total() const { return general + missing + sampling_zero + structural_zero + uncovered; }
    friend bool operator==(const ZeroClasses&, const ZeroClasses&) = default;
};

inline ZeroClasses classify_combinations(const CombinationIndex& generated, const CombinationIndex& sample,
                                         const CombinationIndex& population) {
    std::unordered_set<CombinationKey> all;
    for (const auto* idx : {&generated, &sample, &population})
        for (const auto& [k, c] : idx->counts()) all.insert(k);
    ZeroClasses z;
    for (auto k : all) {
        const bool s = sample.contains(k), p = population.contains(k), g = generated.contains(k);
        if (s && p && g) ++z.general;
        else if (s && p && !g) ++z.missing;
        else if (!s && p && g) ++z.sampling_zero;
        else if (!s && !p && g) ++z.structural_zero;
        else ++z.uncovered;
    }
    return z;
}

inline ZeroClasses classify_combinations(const Dataset& generated, const Dataset& sample, const Dataset& population) {
    return classify_combinations(CombinationIndex(generated), CombinationIndex(sample), CombinationIndex(population));
}

inline std::size_t unique_combination_count(const Dataset& ds) { return CombinationIndex(ds).unique(); }

struct EvalReport {
    double marginal_srmse = 0.0;
    double bivariate_srmse = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t unique_combinations_generated = 0;
    ZeroClasses zero_classes;
    std::size_t generated_count = 0;   // M
    std::size_t population_count = 0;  // N
    nlohmann::json config = nlohmann::json::object();
};

inline EvalReport evaluate(const Dataset& generated, const Dataset& sample, const Dataset& population,
                           SrmseVariant variant = SrmseVariant::Relative) {
    const CombinationIndex g(generated), s(sample), p(population);
    EvalReport r;
    r.marginal_srmse = srmse(population, generated, 1, variant);
    r.bivariate_srmse = srmse(population, generated, 2, variant);
    const auto pr = precision_recall_f1(g, p);
    r.precision = pr.precision;
    r.recall = pr.recall;
    r.f1 = pr.f1;
    r.unique_combinations_generated = g.unique();
    r.zero_classes = classify_combinations(g, s, p);
    r.generated_count = generated.size();
    r.population_count = population.size();
    return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"marginal_srmse", r.marginal_srmse},
            {"bivariate_srmse", r.bivariate_srmse},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"unique_combinations_generated", r.unique_combinations_generated},
            {"zero_classes",
             {{"general", r.zero_classes.general},
              {"missing", r.zero_classes.missing},
              {"sampling_zero", r.zero_classes.sampling_zero},
              {"structural_zero", r.zero_classes.structural_zero},
              {"uncovered", r.zero_classes.uncovered}}},
            {"M", r.generated_count},
            {"N", r.population_count},
            {"config", r.config}};
}

}  // namespace popsynth

#endif  // POPSYNTH_METRICS_HPP
