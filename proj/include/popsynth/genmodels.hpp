#ifndef POPSYNTH_GENMODELS_HPP
#define POPSYNTH_GENMODELS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "popsynth/bayesnet.hpp"
#include "popsynth/dataset.hpp"
#include "popsynth/random.hpp"

namespace popsynth {

/// Marks attributes not yet generated in a partial assignment.
inline constexpr CategoryId kUnassigned = std::numeric_limits<CategoryId>::max();

/// Attribute-level autoregressive model: the distribution of the attribute at
/// `position` of `ordering`, given the attributes at earlier positions.
/// `assignment` is indexed by attribute; later attributes hold kUnassigned.
class ConditionalModel {
public:
    virtual ~ConditionalModel() = default;

    virtual std::size_t attribute_count() const = 0;
    virtual std::size_t cardinality(std::size_t attr) const = 0;

    /// Writes a probability vector of size cardinality(ordering[position]).
    virtual void conditional(const Ordering& ordering, std::size_t position, RecordView assignment,
                             std::span<double> out) const = 0;

    std::vector<double> conditional(const Ordering& ordering, std::size_t position, RecordView assignment) const {
        std::vector<double> out(cardinality(ordering[position]));
        conditional(ordering, position, assignment, out);
        return out;
    }
};

/// Fitted network blended with a uniform prior:
///   (1 - depth) / r + depth * P(X | parents).
/// depth = 0 ignores the data entirely, depth = 1 is the fitted conditional.
/// If a parent is not yet assigned (an ordering foreign to the DAG) the node's
/// marginal stands in for the conditional.
class ChainModel final : public ConditionalModel {
public:
    ChainModel(BayesNet bn, double depth_lambda) : bn_(std::move(bn)), lambda_(depth_lambda) {
        if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw ConfigError("depth lambda must lie in [0, 1]");
    }

    const BayesNet& bayesnet() const { return bn_; }
    double depth_lambda() const { return lambda_; }

    std::size_t attribute_count() const override { return bn_.node_count(); }
    std::size_t cardinality(std::size_t attr) const override { return bn_.cardinalities[attr]; }

    using ConditionalModel::conditional;
    void conditional(const Ordering& ordering, std::size_t position, RecordView assignment,
                     std::span<double> out) const override {
        const auto target = ordering[position];
        const auto& cpt = bn_.cpts[target];
        const bool parents_known = std::all_of(cpt.parents.begin(), cpt.parents.end(),
                                               [&](std::size_t p) { return assignment[p] != kUnassigned; });
        std::span<const double> fitted = parents_known ? bn_.conditional(target, assignment)
                                                       : std::span<const double>(bn_.marginals[target]);
        const double prior = (1.0 - lambda_) / static_cast<double>(cpt.cardinality);
        for (std::size_t k = 0; k < cpt.cardinality; ++k) out[k] = prior + lambda_ * fitted[k];
    }

private:
    BayesNet bn_;
    double lambda_;
};

/// Rescales a distribution by temperature: p_i^(1/tau), renormalized.
/// Computed in log space; zero entries stay zero for every tau.
inline void apply_temperature_inplace(std::span<double> dist, double tau) {
    if (!(tau > 0.0)) throw NonPositiveTemperature(tau);
    if (tau == 1.0) return;
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double p : dist)
        if (p > 0.0) max_logit = std::max(max_logit, std::log(p) / tau);
    if (max_logit == -std::numeric_limits<double>::infinity()) return;
    double sum = 0.0;
    for (double& p : dist) {
        p = p > 0.0 ? std::exp(std::log(p) / tau - max_logit) : 0.0;
        sum += p;
    }
    for (double& p : dist) p /= sum;
}

inline std::vector<double> apply_temperature(std::span<const double> dist, double tau) {
    std::vector<double> out(dist.begin(), dist.end());
    apply_temperature_inplace(out, tau);
    return out;
}

/// Baseline that resamples whole records of its source with replacement.
class PrototypicalAgent {
public:
    explicit PrototypicalAgent(Dataset source) : source_(std::move(source)) {
        if (source_.empty()) throw EmptyDataset();
    }
    const Dataset& source() const { return source_; }

private:
    Dataset source_;
};

inline Dataset prototypical_generate(const PrototypicalAgent& agent, std::size_t count, std::uint64_t seed) {
    if (count < 1) throw ConfigError("count must be >= 1");
    const auto& src = agent.source();
    Rng rng(seed);
    Dataset out(src.schema_ptr(), "generated");
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) out.add_unchecked(src.record(uniform_index(rng, src.size())));
    return out;
}

}  // namespace popsynth

#endif  // POPSYNTH_GENMODELS_HPP
