#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

using namespace popsynth;
using namespace popsynth::testing;

namespace {

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<double> random_distribution(Rng& rng, std::size_t r, double zero_share) {
    std::vector<double> d(r);
    for (auto& x : d) x = uniform01(rng) < zero_share ? 0.0 : uniform01(rng) + 1e-3;
    if (sum_of(d) == 0.0) d[uniform_index(rng, r)] = 1.0;
    const double s = sum_of(d);
    for (auto& x : d) x /= s;
    return d;
}

// Two binary nodes A -> B with P(B | A=0) = (0.9, 0.1).
BayesNet toy_pair() {
    Dag dag(2, 1);
    dag.add_edge(0, 1);
    auto bn = make_uniform_bayesnet(dag, {2, 2});
    auto r0 = bn.cpts[1].row(0);
    r0[0] = 0.9, r0[1] = 0.1;
    auto r1 = bn.cpts[1].row(1);
    r1[0] = 0.2, r1[1] = 0.8;
    bn.marginals[1] = {0.55, 0.45};
    return bn;
}

}  // namespace

TEST(ChainConditional, InterpolatesTowardsUniform) {
    const Ordering order{{0, 1}};
    const std::vector<CategoryId> prefix{0, kUnassigned};

    auto full = ChainModel(toy_pair(), 1.0).conditional(order, 1, prefix);
    EXPECT_DOUBLE_EQ(full[0], 0.9);
    EXPECT_DOUBLE_EQ(full[1], 0.1);

    auto none = ChainModel(toy_pair(), 0.0).conditional(order, 1, prefix);
    EXPECT_DOUBLE_EQ(none[0], 0.5);
    EXPECT_DOUBLE_EQ(none[1], 0.5);

    auto half = ChainModel(toy_pair(), 0.5).conditional(order, 1, prefix);
    EXPECT_NEAR(half[0], 0.7, 1e-15);
    EXPECT_NEAR(half[1], 0.3, 1e-15);
}

TEST(ChainConditional, ForeignOrderingUsesMarginal) {
    const ChainModel model(toy_pair(), 1.0);
    const std::vector<CategoryId> nothing{kUnassigned, kUnassigned};
    auto d = model.conditional(Ordering{{1, 0}}, 0, nothing);
    EXPECT_DOUBLE_EQ(d[0], 0.55);
    EXPECT_DOUBLE_EQ(d[1], 0.45);
}

TEST(ChainConditional, RejectsDepthOutsideUnitInterval) {
    EXPECT_THROW(ChainModel(toy_pair(), -0.1), ConfigError);
    EXPECT_THROW(ChainModel(toy_pair(), 1.5), ConfigError);
}

TEST(ChainConditional, AlwaysSumsToOne) {
    Rng rng(3);
    auto schema = default_benchmark_schema();
    auto truth = random_truth(default_benchmark_dag(), schema, 11);
    for (double lambda : {0.0, 0.3, 0.77, 1.0}) {
        const ChainModel model(truth, lambda);
        for (int trial = 0; trial < 200; ++trial) {
            const auto ordering = random_permutation(schema->size(), rng);
            std::vector<CategoryId> assignment(schema->size(), kUnassigned);
            for (std::size_t t = 0; t < ordering.size(); ++t) {
                const auto d = model.conditional(ordering, t, assignment);
                ASSERT_NEAR(sum_of(d), 1.0, 1e-9);
                assignment[ordering[t]] = static_cast<CategoryId>(sample_categorical(d, rng));
            }
        }
    }
}

TEST(Temperature, IdentityAndSymmetry) {
    const std::vector<double> d{0.1, 0.25, 0.65};
    const auto same = apply_temperature(d, 1.0);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(same[i], d[i], 1e-12);
    for (double tau : {0.05, 0.5, 2.0, 40.0}) {
        const auto even = apply_temperature(std::vector<double>{0.5, 0.5}, tau);
        EXPECT_DOUBLE_EQ(even[0], 0.5);
        EXPECT_DOUBLE_EQ(even[1], 0.5);
    }
}

TEST(Temperature, HandComputedSquare) {
    const auto out = apply_temperature(std::vector<double>{0.8, 0.2}, 0.5);
    const double norm = 0.8 * 0.8 + 0.2 * 0.2;
    EXPECT_NEAR(out[0], 0.64 / norm, 1e-12);
    EXPECT_NEAR(out[1], 0.04 / norm, 1e-12);
    EXPECT_NEAR(out[0], 0.941176, 1e-6);
    EXPECT_NEAR(out[1], 0.058824, 1e-6);
}

TEST(Temperature, MatchesDirectPowerOracle) {
    Rng rng(21);
    for (int trial = 0; trial < 500; ++trial) {
        const auto d = random_distribution(rng, 2 + uniform_index(rng, 8), 0.3);
        const double tau = 0.2 + 3.0 * uniform01(rng);
        std::vector<double> expect(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) expect[i] = std::pow(d[i], 1.0 / tau);
        const double s = sum_of(expect);
        const auto got = apply_temperature(d, tau);
        for (std::size_t i = 0; i < d.size(); ++i) ASSERT_NEAR(got[i], expect[i] / s, 1e-12);
    }
}

TEST(Temperature, ArgmaxInvariantAndSharpening) {
    Rng rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto d = random_distribution(rng, 2 + uniform_index(rng, 6), 0.2);
        const auto top = std::max_element(d.begin(), d.end()) - d.begin();
        if (std::count(d.begin(), d.end(), d[top]) > 1) continue;
        const double tau = std::exp(-4.0 + 8.0 * uniform01(rng));
        const auto out = apply_temperature(d, tau);
        ASSERT_EQ(std::max_element(out.begin(), out.end()) - out.begin(), top);
        ASSERT_NEAR(sum_of(out), 1.0, 1e-9);
        const auto support = std::count_if(d.begin(), d.end(), [](double x) { return x > 0; });
        if (support > 1 && std::abs(tau - 1.0) > 1e-6) {
            if (tau < 1.0) EXPECT_GT(out[top], d[top]);
            else EXPECT_LT(out[top], d[top]);
        }
    }
}

TEST(Temperature, Limits) {
    const std::vector<double> d{0.5, 0.3, 0.0, 0.2};
    const auto cold = apply_temperature(d, 0.01);
    EXPECT_GE(cold[0], 0.999);
    const auto hot = apply_temperature(d, 100.0);
    for (std::size_t i : {0, 1, 3}) EXPECT_NEAR(hot[i], 1.0 / 3.0, 1e-2);
    EXPECT_EQ(hot[2], 0.0);
}

TEST(Temperature, ZerosStayZero) {
    for (double tau : {0.01, 0.5, 1.0, 7.0, 1e6}) {
        const auto out = apply_temperature(std::vector<double>{0.0, 1e-300, 0.0, 1.0}, tau);
        EXPECT_EQ(out[0], 0.0);
        EXPECT_EQ(out[2], 0.0);
        EXPECT_NEAR(sum_of(out), 1.0, 1e-12);
    }
}

TEST(Temperature, NonPositiveRejected) {
    const std::vector<double> d{0.5, 0.5};
    EXPECT_THROW(apply_temperature(d, 0.0), NonPositiveTemperature);
    EXPECT_THROW(apply_temperature(d, -1.0), NonPositiveTemperature);
    EXPECT_THROW(apply_temperature(d, std::nan("")), NonPositiveTemperature);
}

TEST(Prototypical, SingleSourceRecordRepeats) {
    auto schema = make_schema({3, 4});
    auto src = from_records(schema, {{2, 1}});
    auto out = prototypical_generate(PrototypicalAgent(src), 50, 9);
    ASSERT_EQ(out.size(), 50u);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.key(i), src.key(0));
}

TEST(Prototypical, DrawsOnlySourceRecordsUniformly) {
    auto schema = make_schema({2, 2});
    auto src = from_records(schema, {{0, 0}, {1, 1}, {1, 1}, {0, 1}});
    auto out = prototypical_generate(PrototypicalAgent(src), 40'000, 1);
    CombinationIndex idx(out);
    EXPECT_EQ(idx.unique(), 3u);
    EXPECT_FALSE(idx.contains(schema->key_of(Record{1, 0})));
    EXPECT_NEAR(idx.count(schema->key_of(Record{1, 1})) / 40'000.0, 0.5, 0.01);
    EXPECT_NEAR(idx.count(schema->key_of(Record{0, 0})) / 40'000.0, 0.25, 0.01);
    EXPECT_THROW(prototypical_generate(PrototypicalAgent(src), 0, 1), ConfigError);
}
