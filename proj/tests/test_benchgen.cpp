#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

using namespace popsynth;
using namespace popsynth::testing;

namespace {

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

BayesNet six_node_toy(std::uint64_t seed) {
    auto schema = make_schema({2, 3, 2, 4, 3, 2});
    Rng rng(seed);
    auto dag = random_dag(6, 0.5, 2, rng);
    return random_truth(dag, schema, seed);
}

}  // namespace

TEST(ExactJoint, SingleUniformNode) {
    auto bn = make_uniform_bayesnet(Dag(1), {2});
    const auto j = exact_joint(bn);
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0], 0.5);
    EXPECT_EQ(j[1], 0.5);
}

TEST(ExactJoint, TwoNodeChainByHand) {
    Dag dag(2, 1);
    dag.add_edge(0, 1);
    auto bn = make_uniform_bayesnet(dag, {2, 2});
    bn.cpts[0].table = {0.3, 0.7};
    bn.cpts[1].table = {0.9, 0.1, 0.4, 0.6};
    const auto j = exact_joint(bn);
    // key = a + 2 b
    EXPECT_NEAR(j[0], 0.3 * 0.9, 1e-15);
    EXPECT_NEAR(j[1], 0.7 * 0.4, 1e-15);
    EXPECT_NEAR(j[2], 0.3 * 0.1, 1e-15);
    EXPECT_NEAR(j[3], 0.7 * 0.6, 1e-15);
}

TEST(ExactJoint, AgreesWithTupleEnumerationAndSumsToOne) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto bn = six_node_toy(seed);
        const auto j = exact_joint(bn);
        ASSERT_NEAR(total(j), 1.0, 1e-9);
        for (const auto& [rec, p] : brute_joint(bn)) ASSERT_NEAR(j[bn.schema->key_of(rec)], p, 1e-15);
    }
    const auto spec = default_benchmark_spec();
    EXPECT_NEAR(total(exact_joint(spec.truth)), 1.0, 1e-9);
}

TEST(ExactJoint, MonteCarloCrossCheck) {
    const auto bn = six_node_toy(3);
    const auto j = exact_joint(bn);
    const auto draws = bn_ancestral_sample(bn, 1'000'000, 17);
    CombinationIndex idx(draws);
    double worst = 0.0;
    for (std::uint64_t key = 0; key < j.size(); ++key)
        worst = std::max(worst, std::abs(static_cast<double>(idx.count(key)) / 1e6 - j[key]));
    EXPECT_LT(worst, 0.005);
}

TEST(ExactJoint, RefusesHugeSpaces) {
    auto bn = make_uniform_bayesnet(Dag(8), std::vector<std::size_t>(8, 10));
    EXPECT_THROW(exact_joint(bn), SpaceTooLarge);
}

TEST(Benchmark, SampleSizeFollowsRate) {
    auto spec = default_benchmark_spec(5);
    spec.population_size = 100'000;
    const auto b = make_benchmark(spec);
    EXPECT_EQ(b.population.size(), 100'000u);
    EXPECT_EQ(b.sample.size(), 5'000u);
    EXPECT_EQ(b.population.source_tag(), "h-population");
    EXPECT_EQ(b.sample.source_tag(), "h-sample");
}

TEST(Benchmark, SetInclusionZeroCellsAndDeterminism) {
    auto spec = default_benchmark_spec(11);
    spec.population_size = 50'000;
    const auto b = make_benchmark(spec);
    const CombinationIndex pop(b.population), sample(b.sample);
    for (const auto& [k, c] : sample.counts()) ASSERT_TRUE(pop.contains(k));

    const auto j = exact_joint(b.truth);
    for (const auto& [k, c] : pop.counts()) ASSERT_GT(j[k], 0.0);
    EXPECT_GT(std::count(j.begin(), j.end(), 0.0), 0);

    const auto cov = sample_coverage(sample, pop);
    EXPECT_LT(cov.combo_coverage, 1.0);

    const auto again = make_benchmark(spec);
    EXPECT_EQ(again.population, b.population);
    EXPECT_EQ(again.sample, b.sample);
}

TEST(Benchmark, DeterministicEdgeIsNeverViolated) {
    auto schema = make_schema({3, 2, 2});
    Dag dag(3, 1);
    dag.add_edge(0, 1);
    dag.add_edge(1, 2);
    auto truth = random_truth(dag, schema, 4);
    auto row = truth.cpts[1].row(2);
    row[0] = 1.0, row[1] = 0.0;  // a0 = 2 forces a1 = 0
    truth.marginals = exact_marginals(truth);
    BenchmarkSpec spec{truth, 20'000, 0.05, 9};
    const auto b = make_benchmark(spec);
    for (std::size_t n = 0; n < b.population.size(); ++n)
        ASSERT_FALSE(b.population.at(n, 0) == 2 && b.population.at(n, 1) == 1);

    // A generated violator lands in the structural-zero class.
    auto gen = from_records(schema, {{2, 1, 0}});
    EXPECT_EQ(classify_combinations(gen, b.sample, b.population).structural_zero, 1u);
}

TEST(Benchmark, SpecValidation) {
    auto spec = default_benchmark_spec();
    spec.population_size = 9'999;
    EXPECT_THROW(make_benchmark(spec), ConfigError);
    spec.population_size = 10'000;
    spec.sample_rate = 0.0;
    EXPECT_THROW(make_benchmark(spec), InvalidRate);
}

TEST(Benchmark, DefaultShape) {
    const auto spec = default_benchmark_spec();
    const auto& s = *spec.truth.schema;
    auto cards = s.cardinalities();
    std::sort(cards.begin(), cards.end());
    EXPECT_EQ(cards, (std::vector<std::size_t>{2, 2, 2, 3, 3, 4, 4, 5, 6, 6}));
    EXPECT_EQ(spec.population_size, 200'000u);
    EXPECT_EQ(spec.sample_rate, 0.05);
    EXPECT_TRUE(spec.truth.dag == default_benchmark_dag());
}

TEST(Benchmark, SpecJsonRoundTrip) {
    const auto spec = default_benchmark_spec(3);
    const auto back = benchmark_spec_from_json(nlohmann::json::parse(benchmark_spec_to_json(spec).dump()));
    EXPECT_EQ(back.population_size, spec.population_size);
    EXPECT_EQ(back.seed, spec.seed);
    EXPECT_TRUE(back.truth.dag == spec.truth.dag);
    const auto a = exact_joint(spec.truth), b = exact_joint(back.truth);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 1e-12);
    EXPECT_THROW(benchmark_spec_from_json(nlohmann::json{{"schema", 1}}), Error);
    EXPECT_THROW(benchmark_spec_from_json(nlohmann::json::object()), ConfigError);
}
