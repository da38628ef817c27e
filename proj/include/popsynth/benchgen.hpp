#ifndef POPSYNTH_BENCHGEN_HPP
#define POPSYNTH_BENCHGEN_HPP

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "popsynth/bayesnet.hpp"
#include "popsynth/dataset.hpp"

namespace popsynth {

inline constexpr std::uint64_t kExactJointLimit = 10'000'000;

/// Probability of every full combination under the network, indexed by the
/// mixed-radix combination key (attribute 0 varies fastest, as in
/// AttributeSchema::key_of).
inline std::vector<double> exact_joint(const BayesNet& bn) {
    std::uint64_t space = 1;
    for (auto r : bn.cardinalities) {
        if (space > kExactJointLimit / r) throw SpaceTooLarge("combination space exceeds 10^7 cells");
        space *= r;
    }
    const auto d = bn.node_count();
    std::vector<double> joint(space);
    Record rec(d, 0);
    for (std::uint64_t key = 0; key < space; ++key) {
        double p = 1.0;
        for (std::size_t v = 0; v < d && p > 0.0; ++v) p *= bn.conditional(v, rec)[rec[v]];
        joint[key] = p;
        for (std::size_t v = 0; v < d; ++v) {  // odometer increment
            if (++rec[v] < bn.cardinalities[v]) break;
            rec[v] = 0;
        }
    }
    return joint;
}

/// Per-node marginals of the network's joint distribution.
inline std::vector<std::vector<double>> exact_marginals(const BayesNet& bn) {
    const auto joint = exact_joint(bn);
    std::vector<std::vector<double>> out;
    for (auto r : bn.cardinalities) out.emplace_back(r, 0.0);
    Record rec(bn.node_count(), 0);
    for (double p : joint) {
        for (std::size_t v = 0; v < rec.size(); ++v) out[v][rec[v]] += p;
        for (std::size_t v = 0; v < rec.size(); ++v) {
            if (++rec[v] < bn.cardinalities[v]) break;
            rec[v] = 0;
        }
    }
    return out;
}

struct BenchmarkSpec {
    BayesNet truth;  // schema-bound
    std::size_t population_size = 200'000;
    double sample_rate = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (!truth.schema) throw ConfigError("benchmark truth needs a schema");
        if (population_size < 10'000) throw ConfigError("benchmark population must hold at least 10^4 records");
        if (!(sample_rate > 0.0 && sample_rate <= 1.0)) throw InvalidRate(sample_rate);
    }
};

struct Benchmark {
    Dataset population;
    Dataset sample;
    BayesNet truth;
};

inline std::uint64_t benchmark_split_seed(const BenchmarkSpec& spec) { return derive_seed(spec.seed, 1); }

/// Population from ancestral sampling with stream derive_seed(seed, 0), then
/// the h-sample split with derive_seed(seed, 1).
inline Benchmark make_benchmark(const BenchmarkSpec& spec) {
    spec.validate();
    Benchmark b{bn_ancestral_sample(spec.truth, spec.population_size, derive_seed(spec.seed, 0)), {}, spec.truth};
    b.population.set_source_tag("h-population");
    b.sample = split_h_sample(b.population, spec.sample_rate, benchmark_split_seed(spec));
    return b;
}

namespace detail {

inline Attribute make_attribute(std::string name, std::string display, std::vector<std::string> labels) {
    Attribute a{std::move(name), std::move(display), {}};
    for (auto& l : labels) a.categories.push_back({0, l, l});
    return a;
}

}  // namespace detail

/// Ten attributes shaped like a household travel survey: category counts
/// {2,2,2,3,3,4,4,5,6,6}.
inline SchemaPtr default_benchmark_schema() {
    using detail::make_attribute;
    return std::make_shared<const AttributeSchema>(std::vector<Attribute>{
        make_attribute("gender", "Gender", {"Male", "Female"}),
        make_attribute("driver_license", "Driver License", {"Yes", "No"}),
        make_attribute("kid_in_household", "Kid in Household", {"Yes", "No"}),
        make_attribute("work_days", "Work Days", {"5+ days/week", "1-4 days/week", "Non-regular"}),
        make_attribute("household_members", "Number of Household Members", {"1", "2-3", "4+"}),
        make_attribute("education", "Education Status",
                       {"Preschool", "Elementary/Middle/High", "University", "Not student"}),
        make_attribute("departure_time", "Major Departure Time", {"Peak", "Non-peak", "Others", "None"}),
        make_attribute("work_type", "Work Type",
                       {"Student", "Inoccupation/Housewife", "Manager/Office", "Service/Sales", "Simple labor"}),
        make_attribute("age_group", "Age Group",
                       {"5-15 years", "16-25 years", "26-40 years", "41-60 years", "61-75 years", "76+ years"}),
        make_attribute("travel_mode", "Major Travel Mode",
                       {"Car", "Public transportation", "Walking", "Bike/Bicycle", "Taxi", "None"}),
    });
}

/// Chain-plus-branches structure over the default schema (in-degree <= 1):
///   education -> age -> work_type -> work_days
///                       work_type -> travel_mode -> departure_time
///                age -> driver_license
///                age -> household_members -> kid_in_household
/// gender stays isolated.
inline Dag default_benchmark_dag() {
    Dag dag(10, 1);
    enum { gender, license, kid, work_days, members, education, departure, work_type, age, mode };
    dag.add_edge(education, age);
    dag.add_edge(age, work_type);
    dag.add_edge(work_type, work_days);
    dag.add_edge(work_type, mode);
    dag.add_edge(mode, departure);
    dag.add_edge(age, license);
    dag.add_edge(age, members);
    dag.add_edge(members, kid);
    return dag;
}

/// Random conditionals for `dag`. Each non-root row is one of: near
/// deterministic (0.95 on one category), sparse (some categories impossible),
/// or a flat Dirichlet draw. Roots get a Dirichlet draw.
inline BayesNet random_truth(const Dag& dag, SchemaPtr schema, std::uint64_t seed,
                             double near_deterministic_share = 0.35, double sparse_share = 0.30) {
    BayesNet bn = make_uniform_bayesnet(dag, schema->cardinalities(), schema);
    Rng rng(seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    auto dirichlet = [&](std::span<double> row) {
        double s = 0.0;
        for (auto& p : row) s += (p = gamma(rng) + 1e-3);
        for (auto& p : row) p /= s;
    };
    for (std::size_t v = 0; v < bn.node_count(); ++v) {
        auto& cpt = bn.cpts[v];
        const auto r = cpt.cardinality;
        for (std::size_t j = 0; j < cpt.config_count; ++j) {
            auto row = cpt.row(j);
            const double u = cpt.parents.empty() ? 1.0 : uniform01(rng);
            if (u < near_deterministic_share) {
                const auto hot = uniform_index(rng, r);
                for (std::size_t k = 0; k < r; ++k) row[k] = k == hot ? 0.95 : 0.05 / static_cast<double>(r - 1);
            } else if (u < near_deterministic_share + sparse_share) {
                dirichlet(row);
                const auto zeros = 1 + uniform_index(rng, r / 2);
                for (std::size_t z = 0; z < zeros; ++z) row[uniform_index(rng, r)] = 0.0;
                double s = 0.0;
                for (auto p : row) s += p;
                if (s == 0.0) row[uniform_index(rng, r)] = s = 1.0;
                for (auto& p : row) p /= s;
            } else {
                dirichlet(row);
            }
        }
    }
    bn.marginals = exact_marginals(bn);
    return bn;
}

/// Default benchmark: the schema and DAG above, 200,000 records, 5% sample.
inline BenchmarkSpec default_benchmark_spec(std::uint64_t seed = 2024) {
    BenchmarkSpec spec;
    spec.truth = random_truth(default_benchmark_dag(), default_benchmark_schema(), derive_seed(seed, 7));
    spec.population_size = 200'000;
    spec.sample_rate = 0.05;
    spec.seed = seed;
    return spec;
}

inline nlohmann::json benchmark_spec_to_json(const BenchmarkSpec& spec) {
    return {{"schema", schema_to_json(*spec.truth.schema)},
            {"truth", bayesnet_to_json(spec.truth)},
            {"population_size", spec.population_size},
            {"sample_rate", spec.sample_rate},
            {"seed", spec.seed}};
}

inline BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j) {
    try {
        auto schema = std::make_shared<const AttributeSchema>(schema_from_json(j.at("schema")));
        BenchmarkSpec spec;
        spec.truth = bayesnet_from_json(j.at("truth"), schema);
        spec.population_size = j.at("population_size").get<std::size_t>();
        spec.sample_rate = j.at("sample_rate").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed benchmark spec: ") + e.what());
    }
}

}  // namespace popsynth

#endif  // POPSYNTH_BENCHGEN_HPP
