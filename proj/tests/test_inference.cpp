#include "mcorr/errors.hpp"
#include "mcorr/inference.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace mcorr;

namespace {

CorrelationEstimate estimate(double r, double se) {
    CorrelationEstimate e;
    e.r_hat = r;
    e.std_err = se;
    return e;
}

// Benjamini-Hochberg step-up, written directly from its definition.
std::vector<double> bh_adjust(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (p[j] < p[i]) continue;
            std::size_t rank = 0;
            for (std::size_t k = 0; k < m; ++k) rank += p[k] <= p[j];
            best = std::min(best, p[j] * static_cast<double>(m) / static_cast<double>(rank));
        }
        out[i] = best;
    }
    return out;
}

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = d(rng);
    return m;
}

}  // namespace

TEST(TestStatistics, InsideNullRegionGivesPOne) {
    for (double r : {0.0, 0.1, -0.25, 0.3, -0.3}) {
        auto t = test_statistics(estimate(r, 0.05), 500, 0.3);
        EXPECT_EQ(t.p_value, 1.0);
        EXPECT_EQ(t.t_plus, 0.0);
    }
    EXPECT_EQ(test_statistics(estimate(0.0, 0.2), 100, 0.0).p_value, 1.0);
}

TEST(TestStatistics, NormalQuantileGivesFivePercent) {
    const Index n = 400;
    const double se = 0.05;
    auto t = test_statistics(estimate(1.959963984540054 * se, se), n, 0.0);
    EXPECT_NEAR(t.p_value, 0.05, 1e-12);
    EXPECT_NEAR(t.t_plus, 1.959963984540054, 1e-12);
}

TEST(TestStatistics, SignsOfStatistics) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> r(-1.0, 1.0), s(0.001, 0.5), r0(0.0, 0.99);
    for (int rep = 0; rep < 1000; ++rep) {
        auto t = test_statistics(estimate(r(rng), s(rng)), 300, r0(rng));
        EXPECT_GE(t.t_plus, 0.0);
        EXPECT_LE(t.t_minus, 0.0);
        EXPECT_EQ(std::max(t.t_plus, t.t_minus), t.t_plus);
        EXPECT_GE(t.p_value, 0.0);
        EXPECT_LE(t.p_value, 1.0);
    }
}

TEST(TestStatistics, MonotoneInEstimateAndThreshold) {
    double previous = 1.0;
    for (double r = 0.0; r <= 1.0; r += 0.05) {
        const double p = test_statistics(estimate(-r, 0.04), 500, 0.2).p_value;
        EXPECT_LE(p, previous);
        previous = p;
    }
    previous = 0.0;
    for (double r0 = 0.0; r0 < 0.9; r0 += 0.05) {
        const double p = test_statistics(estimate(0.6, 0.04), 500, r0).p_value;
        EXPECT_GE(p, previous);
        previous = p;
    }
}

TEST(TestStatistics, ZeroStandardError) {
    EXPECT_EQ(test_statistics(estimate(0.5, 0.0), 100, 0.3).p_value, 0.0);
    EXPECT_EQ(test_statistics(estimate(0.2, 0.0), 100, 0.3).p_value, 1.0);
}

TEST(TestStatistics, RejectsBadInput) {
    EXPECT_THROW(test_statistics(estimate(0.1, 0.1), 100, -0.1), ValidationError);
    EXPECT_THROW(test_statistics(estimate(0.1, 0.1), 100, 1.0), ValidationError);
    CorrelationEstimate plugin;
    plugin.r_hat = 0.2;
    EXPECT_THROW(test_statistics(plugin, 100, 0.0), ValidationError);
    EXPECT_THROW(test_statistics(estimate(0.1, std::numeric_limits<double>::infinity()), 100, 0.0),
                 ValidationError);
}

TEST(ByFdr, SingleHypothesisUnchanged) {
    auto r = by_fdr({0.037}, 0.05);
    EXPECT_EQ(r.p_adjusted[0], 0.037);
    EXPECT_TRUE(r.significant[0]);
}

TEST(ByFdr, TwoHypothesisHandExample) {
    auto r = by_fdr({0.01, 0.5}, 0.05);
    EXPECT_NEAR(r.p_adjusted[0], 0.03, 1e-15);
    EXPECT_NEAR(r.p_adjusted[1], 0.75, 1e-15);
    EXPECT_TRUE(r.significant[0]);
    EXPECT_FALSE(r.significant[1]);
}

TEST(ByFdr, AllOnesNeverSignificant) {
    auto r = by_fdr(std::vector<double>(50, 1.0), 0.99);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(r.p_adjusted[i], 1.0);
        EXPECT_FALSE(r.significant[i]);
    }
}

TEST(ByFdr, CappedMonotoneAndDominatesBh) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t m = 1 + rep * 3;
        std::vector<double> p(m);
        for (auto& v : p) v = rep % 2 ? u(rng) : std::pow(u(rng), 4.0);
        auto r = by_fdr(p, 0.05);
        auto bh = bh_adjust(p);
        double c = 0.0;
        for (std::size_t k = 1; k <= m; ++k) c += 1.0 / static_cast<double>(k);
        for (std::size_t i = 0; i < m; ++i) {
            EXPECT_LE(r.p_adjusted[i], 1.0);
            EXPECT_GE(r.p_adjusted[i], p[i]);
            EXPECT_GE(r.p_adjusted[i], bh[i] - 1e-15);
            EXPECT_NEAR(r.p_adjusted[i], std::min(1.0, c * bh[i]), 1e-12);
            for (std::size_t j = 0; j < m; ++j) {
                if (p[i] <= p[j]) EXPECT_LE(r.p_adjusted[i], r.p_adjusted[j]);
            }
        }
    }
}

TEST(ByFdr, SignificanceNestedInAlpha) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(200);
    for (auto& v : p) v = std::pow(u(rng), 3.0);
    auto loose = by_fdr(p, 0.2);
    auto tight = by_fdr(p, 0.05);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (tight.significant[i]) EXPECT_TRUE(loose.significant[i]);
    }
}

TEST(ByFdr, RejectsOutOfRange) {
    EXPECT_THROW(by_fdr({0.2, 1.5}, 0.05), ValidationError);
    EXPECT_THROW(by_fdr({0.2, std::nan("")}, 0.05), ValidationError);
    EXPECT_THROW(by_fdr({0.2}, 0.0), ValidationError);
    EXPECT_TRUE(by_fdr({}, 0.05).p_adjusted.empty());
}

TEST(AggregateSplits, OddCountTakesMedianSplit) {
    std::vector<CorrelationEstimate> e = {estimate(0.5, 0.1), estimate(0.1, 0.2), estimate(0.3, 0.05)};
    auto r = aggregate_splits(e, 0, 100, 0.0, MedianRule::MedianSplit);
    EXPECT_EQ(r.r_median, 0.3);
    EXPECT_EQ(r.std_err, 0.05);
    EXPECT_EQ(r.p_value, test_statistics(estimate(0.3, 0.05), 100, 0.0).p_value);
    EXPECT_TRUE(r.estimable);
    EXPECT_EQ(r.n_ok, 3);
}

TEST(AggregateSplits, EvenCountUsesLowerMedianSplitForP) {
    std::vector<CorrelationEstimate> e = {estimate(0.4, 0.1), estimate(0.1, 0.2), estimate(0.2, 0.07),
                                          estimate(0.9, 0.3)};
    auto r = aggregate_splits(e, 0, 100, 0.0, MedianRule::MedianSplit);
    EXPECT_DOUBLE_EQ(r.r_median, 0.3);
    EXPECT_EQ(r.p_value, test_statistics(estimate(0.2, 0.07), 100, 0.0).p_value);
}

TEST(AggregateSplits, MedianEstimateRule) {
    std::vector<CorrelationEstimate> e = {estimate(0.4, 0.1), estimate(0.1, 0.2), estimate(0.2, 0.07)};
    auto r = aggregate_splits(e, 0, 100, 0.0, MedianRule::MedianEstimateMedianSe);
    EXPECT_EQ(r.r_median, 0.2);
    EXPECT_EQ(r.std_err, 0.1);
    EXPECT_EQ(r.p_value, test_statistics(estimate(0.2, 0.1), 100, 0.0).p_value);
}

TEST(AggregateSplits, FailuresDroppedUntilMajority) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<CorrelationEstimate> e = {estimate(0.4, 0.1), estimate(nan, 0.0), estimate(0.2, 0.1)};
    auto r = aggregate_splits(e, 1, 100, 0.0, MedianRule::MedianSplit);
    EXPECT_TRUE(r.estimable);
    EXPECT_EQ(r.n_ok, 2);
    EXPECT_EQ(r.n_failed, 1);
    EXPECT_DOUBLE_EQ(r.r_median, 0.3);

    std::vector<CorrelationEstimate> bad = {estimate(0.4, 0.1), estimate(nan, 0.0), estimate(nan, 0.0)};
    auto none = aggregate_splits(bad, 2, 100, 0.0, MedianRule::MedianSplit);
    EXPECT_FALSE(none.estimable);
    EXPECT_TRUE(std::isnan(none.r_median));
    EXPECT_TRUE(std::isnan(none.p_value));
}

TEST(SplitSeeds, DistinctAndReproducible) {
    auto a = make_split_plans(50, 20, 9);
    auto b = make_split_plans(50, 20, 9);
    ASSERT_EQ(a.size(), 20u);
    for (std::size_t s = 0; s < a.size(); ++s) {
        EXPECT_EQ(a[s].seed, split_seed(9, s));
        EXPECT_EQ(a[s].indices_a, b[s].indices_a);
        for (std::size_t t = 0; t < s; ++t) EXPECT_NE(a[s].seed, a[t].seed);
    }
    EXPECT_THROW(make_split_plans(50, 0, 9), ValidationError);
}

class MultiSplit : public ::testing::Test {
protected:
    void SetUp() override {
        std::mt19937_64 rng(4);
        const Index n = 120, p = 3;
        Matrix z = gaussian(n, 2, rng);
        Matrix x = gaussian(n, p, rng);
        x.colwise() += z.col(0);
        Vector y = x.col(0) + z.col(0) + gaussian(n, 1, rng).col(0);
        Vector w = x.col(0) + x.col(1) + gaussian(n, 1, rng).col(0);
        data.emplace(z, x, y, w);
        Matrix ez = gaussian(600, 2, rng);
        Matrix ex = gaussian(600, p, rng);
        ex.colwise() += ez.col(0);
        external.emplace(ez, ex);
        config = default_smoother_config(n, 600, 2);
    }

    std::optional<PairedDataset> data;
    std::optional<ExternalDataset> external;
    SmootherConfig config;
};

TEST_F(MultiSplit, SingleSplitMatchesDirectCall) {
    auto r = multi_split_inference(*data, *external, config, 1, 0.1, 77);
    auto plan = make_split_plans(data->n(), 1, 77).front();
    auto est = estimate_r_calibrated(*data, *external, config, plan);
    EXPECT_EQ(r.r_median, est.r_hat);
    EXPECT_EQ(r.p_value, test_statistics(est, data->n(), 0.1).p_value);
}

TEST_F(MultiSplit, IdenticalPlansGiveCommonEstimate) {
    auto plan = SplitPlan::random(data->n(), 5);
    std::vector<SplitPlan> plans(6, plan);
    auto phi = estimate_external_phi(*external, config);
    auto variance = estimate_variance_inputs(*data, config);
    auto r = multi_split_inference(*data, phi, config, plans, 0.0, variance);
    auto est = estimate_r_calibrated(*data, *external, config, plan);
    EXPECT_EQ(r.r_median, est.r_hat);
    EXPECT_EQ(r.n_ok, 6);
}

TEST_F(MultiSplit, MedianIsSampleMedianOfSplitEstimates) {
    auto r = multi_split_inference(*data, *external, config, 9, 0.0, 3);
    std::vector<double> values;
    for (const auto& e : r.estimates) values.push_back(e.r_hat);
    std::sort(values.begin(), values.end());
    EXPECT_EQ(r.r_median, values[4]);
    EXPECT_EQ(r.n_ok, 9);
    EXPECT_TRUE(r.estimable);
}

TEST_F(MultiSplit, Deterministic) {
    auto a = multi_split_inference(*data, *external, config, 5, 0.2, 11, MedianRule::MedianEstimateMedianSe);
    auto b = multi_split_inference(*data, *external, config, 5, 0.2, 11, MedianRule::MedianEstimateMedianSe);
    EXPECT_EQ(a.r_median, b.r_median);
    EXPECT_EQ(a.p_value, b.p_value);
}

TEST_F(MultiSplit, RejectsBadArguments) {
    EXPECT_THROW(multi_split_inference(*data, *external, config, 0, 0.0, 1), ValidationError);
    EXPECT_THROW(multi_split_inference(*data, *external, config, 3, 1.2, 1), ValidationError);
}
