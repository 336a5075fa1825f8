#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace nomscreen;
namespace nt = nomscreen::testing;

namespace {

PosteriorEstimate posterior(size_t tp, size_t fp, size_t n, Source s = Source::NN) {
    return beta_posterior(AnnotationCounts{tp, fp, 0, n, s});
}

} // namespace

TEST(Estimator, BetaQuantilesMatchTrapezoidOracle) {
    const std::vector<double> ps = {0.025, 0.5, 0.975};
    for (auto [a, b] : {std::pair{1.0, 1.0}, {12.0, 90.0}, {2.0, 100.0}, {40.0, 3.0}, {1.0, 5.0}}) {
        auto want = nt::trapezoid_beta_quantiles(a, b, ps, 1e-6);
        for (size_t i = 0; i < ps.size(); ++i) EXPECT_NEAR(beta::quantile(ps[i], a, b), want[i], 1e-5) << a << "," << b;
    }
}

TEST(Estimator, CdfInvertsQuantile) {
    for (double a : {1.0, 3.0, 30.0})
        for (double b : {1.0, 7.0, 90.0})
            for (double p : {0.001, 0.025, 0.3, 0.5, 0.975, 0.999})
                EXPECT_NEAR(beta::cdf(beta::quantile(p, a, b), a, b), p, 1e-10);
    EXPECT_EQ(beta::cdf(0.0, 2, 3), 0.0);
    EXPECT_EQ(beta::cdf(1.0, 2, 3), 1.0);
}

TEST(Estimator, PublishedCountAnchors) {
    auto nn = posterior(11, 89, 2944);
    EXPECT_NEAR(nn.median, 338.992, 0.01);  // reference Beta(12, 90) median x 2944
    EXPECT_GE(nn.lower, 161.0);
    EXPECT_LE(nn.upper, 572.0);
    EXPECT_EQ(std::lround(posterior(1, 99, 3677).median), 61);
    auto alt = posterior(8, 68, 2944);
    EXPECT_NEAR(alt.lower, 161.515, 0.01);
    EXPECT_NEAR(alt.upper, 572.586, 0.01);
}

TEST(Estimator, PosteriorMonotoneInCounts) {
    for (size_t fp = 0; fp < 60; fp += 7)
        for (size_t tp = 0; tp < 30; ++tp) {
            auto a = posterior(tp, fp, 1000), b = posterior(tp + 1, fp, 1000), c = posterior(tp, fp + 1, 1000);
            EXPECT_LT(a.theta_median, b.theta_median);
            EXPECT_GT(a.theta_median, c.theta_median);
            EXPECT_LT(a.theta_lower, a.theta_median);
            EXPECT_LT(a.theta_median, a.theta_upper);
        }
}

TEST(Estimator, CombineSingleSourceMatchesPosterior) {
    auto p = posterior(11, 89, 2944);
    auto c = combine({p}, 1000000, 5);
    EXPECT_NEAR(c.median, p.median, 3.0);
    EXPECT_NEAR(c.lower, p.lower, 3.0);
    EXPECT_NEAR(c.upper, p.upper, 3.0);
}

TEST(Estimator, CombineTwoIdenticalSourcesDoubles) {
    auto p = posterior(11, 89, 2944);
    auto single = combine({p}, 200000, 6), twice = combine({p, p}, 200000, 6);
    EXPECT_NEAR(twice.median / single.median, 2.0, 0.06);
}

TEST(Estimator, CombinedIntervalInsideSumOfBounds) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<PosteriorEstimate> src;
        for (int s = 0; s < 2; ++s) src.push_back(posterior(rng() % 20, 20 + rng() % 80, 500 + rng() % 4000));
        auto c = combine(src, 200000, trial);
        double lo = 0, hi = 0;
        for (const auto& s : src) {
            lo += s.lower;
            hi += s.upper;
        }
        EXPECT_GE(c.lower, lo);
        EXPECT_LE(c.upper, hi);
        EXPECT_LT(c.upper - c.lower, hi - lo);
    }
}

TEST(Estimator, CombineIsSeedDeterministic) {
    auto p = posterior(3, 40, 900);
    auto a = combine({p, p}, 10000, 1), b = combine({p, p}, 10000, 1), c = combine({p, p}, 10000, 2);
    EXPECT_EQ(a.draws, b.draws);
    EXPECT_NE(a.draws, c.draws);
    EXPECT_THROW(combine({}, 10, 1), Error);
    EXPECT_THROW(combine({p}, 0, 1), Error);
}

TEST(Estimator, MarketShare) {
    MarketTallies t;
    t.licensed_directors = 909;
    t.licensed_positions = 5000;
    t.sample_positions = {4, 6};
    auto zero = market_share(std::vector<double>(100, 0.0), t);
    for (const auto& s : zero) {
        EXPECT_EQ(s.share_median, 0.0);
        EXPECT_EQ(s.share_upper, 0.0);
    }
    auto published = market_share({402.0}, t);
    EXPECT_EQ(published[0].measure, "directors");
    EXPECT_NEAR(published[0].share_median, 402.0 / 1311.0, 1e-12);
    EXPECT_NEAR(published[0].share_median, 0.31, 0.005);
    EXPECT_EQ(published[1].illegal_median, 402.0 * 5);
    EXPECT_NEAR(published[1].share_median, 2010.0 / 7010.0, 1e-12);
}

TEST(Estimator, ExactPowerLawRecovered) {
    std::vector<KFraction> src;
    std::map<int, double> pop;
    for (int k = 1; k <= 10; ++k) {
        pop[k] = 1e5 / k;
        if (k >= 3) src.push_back({k, pop[k], 0.003 * std::pow(k, 1.7)});
    }
    auto fit = extrapolate_small(src, 1.0, pop, BoundLabel::UpperBound);
    EXPECT_NEAR(fit.slope, 1.7, 1e-10);
    EXPECT_NEAR(std::exp(fit.intercept), 0.003, 1e-10);
    EXPECT_NEAR(fit.predictions[0].fraction, 0.003, 1e-10);
    EXPECT_NEAR(fit.predictions[1].directors, 0.003 * std::pow(2, 1.7) * pop[2], 1e-6);
    EXPECT_NEAR(fit.predictions[1].companies, 2 * fit.predictions[1].directors, 1e-9);
    EXPECT_EQ(fit.points, 8u);
}

TEST(Estimator, FlatInputGivesConstantPredictions) {
    std::vector<KFraction> src;
    for (int k = 3; k <= 10; ++k) src.push_back({k, 100, 0.05});
    auto fit = extrapolate_small(src, 0.5, {{1, 10.0}, {2, 10.0}}, BoundLabel::UpperBound);
    EXPECT_NEAR(fit.slope, 0.0, 1e-12);
    EXPECT_NEAR(fit.predictions[0].fraction, 0.025, 1e-12);
    EXPECT_NEAR(fit.predictions[1].fraction, 0.025, 1e-12);
}

TEST(Estimator, LowerBoundBorrowsSlope) {
    std::vector<KFraction> src = {{3, 10, 0.01}, {4, 10, 0.02}};
    auto fit = extrapolate_small(src, 1.0, {{1, 100.0}}, BoundLabel::LowerBound, 1.2, {1});
    EXPECT_EQ(fit.slope, 1.2);
    EXPECT_EQ(fit.bound, BoundLabel::LowerBound);
    EXPECT_NEAR(fit.intercept, (std::log(0.01) + std::log(0.02) - 1.2 * (std::log(3) + std::log(4))) / 2, 1e-12);
    EXPECT_EQ(fit.to_json().at("bound"), "LowerBound");
}

TEST(Estimator, PlantedPowerLawWithinTenPercent) {
    auto pl = planted_power_law(7);
    auto fit = extrapolate_small(pl.observed, 1.0, pl.population_at, BoundLabel::UpperBound);
    for (const auto& p : fit.predictions) {
        double want = pl.licensed_at.at(p.k);
        EXPECT_NEAR(p.directors / want, 1.0, 0.10) << p.k;
    }
}

TEST(Estimator, LogLogFitRejectsDegenerateInput) {
    EXPECT_THROW(fit_log_log({{3, 0.1}}), Error);
    EXPECT_THROW(fit_log_log({{3, 0.0}, {4, -1}}), Error);
    EXPECT_THROW(fit_log_log({{3, 0.1}, {3, 0.2}}), Error);
    EXPECT_NO_THROW(fit_log_log({{3, 0.1}}, 1.0));
}
