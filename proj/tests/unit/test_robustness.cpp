#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace nomscreen;

namespace {

FeatureMatrix clustered(size_t n, size_t p, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    FeatureMatrix m;
    m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (size_t i = 0; i < n; ++i) {
        double shift = i % 5 == 0 ? 3.0 : 0.0;
        for (size_t j = 0; j < p; ++j) m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g(rng) + shift;
        char id[16];
        std::snprintf(id, sizeof id, "D%05zu", i);
        m.director_ids.push_back(id);
    }
    for (size_t j = 0; j < p; ++j) m.columns.push_back("f" + std::to_string(j));
    return m;
}

std::set<size_t> every(size_t step, size_t n) {
    std::set<size_t> s;
    for (size_t i = 0; i < n; i += step) s.insert(i);
    return s;
}

} // namespace

TEST(Robustness, AgreementMetrics) {
    std::set<size_t> a = {1, 2, 3, 4}, b = {3, 4, 5};
    EXPECT_DOUBLE_EQ(set_agreement(a, b), 2.0 / 5.0);
    EXPECT_DOUBLE_EQ(set_agreement(a, b, AgreementMetric::OverlapOfSmaller), 2.0 / 3.0);
    EXPECT_EQ(set_agreement({}, {}), 1.0);
    EXPECT_EQ(set_agreement(a, {}), 0.0);
    EXPECT_EQ(set_agreement(a, {}, AgreementMetric::OverlapOfSmaller), 0.0);
    EXPECT_EQ(parse_agreement_metric("overlap_of_smaller"), AgreementMetric::OverlapOfSmaller);
    EXPECT_THROW(parse_agreement_metric("dice"), Error);
}

TEST(Robustness, ColumnSampling) {
    auto c = sample_columns(48, 0.8, 3);
    EXPECT_EQ(c.size(), 38u);
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
    EXPECT_EQ(std::set<size_t>(c.begin(), c.end()).size(), 38u);
    EXPECT_EQ(sample_columns(48, 0.8, 3), c);
    EXPECT_EQ(sample_columns(48, 1.0, 9).size(), 48u);
    EXPECT_THROW(sample_columns(48, 0.0, 1), Error);
    EXPECT_THROW(sample_columns(48, 1.5, 1), Error);
}

TEST(Robustness, HistogramBins) {
    auto h = Histogram::of({0.0, 0.04, 0.05, 0.5, 0.99, 1.0}, 0.05);
    ASSERT_EQ(h.counts.size(), 20u);
    EXPECT_EQ(h.counts[0], 2u);
    EXPECT_EQ(h.counts[1], 1u);
    EXPECT_EQ(h.counts[10], 1u);
    EXPECT_EQ(h.counts[19], 2u);
}

TEST(Robustness, SameSeedSameReportAcrossThreadCounts) {
    auto m = clustered(400, 12, 1);
    auto lic = every(10, 400);
    RobustnessConfig cfg;
    cfg.n_runs = 12;
    cfg.k = 20;
    cfg.seed = 77;
    cfg.threads = 1;
    auto a = robustness_sweep(m, lic, cfg);
    cfg.threads = 3;
    auto b = robustness_sweep(m, lic, cfg);
    EXPECT_EQ(a.to_json(cfg).dump(), b.to_json(cfg).dump());
    EXPECT_EQ(a.summaries[0].agreement, b.summaries[0].agreement);
}

TEST(Robustness, SingleRunReproducible) {
    auto m = clustered(200, 8, 2);
    RobustnessConfig cfg;
    cfg.n_runs = 1;
    cfg.k = 15;
    cfg.seed = 5;
    auto a = robustness_sweep(m, every(7, 200), cfg), b = robustness_sweep(m, every(7, 200), cfg);
    EXPECT_EQ(a.runs[0].columns, b.runs[0].columns);
    EXPECT_EQ(a.runs[0].outcomes[0].flagged, b.runs[0].outcomes[0].flagged);
}

TEST(Robustness, FullFractionAgreesExactly) {
    auto m = clustered(300, 10, 3);
    RobustnessConfig cfg;
    cfg.n_runs = 5;
    cfg.fraction = 1.0;
    cfg.k = 25;
    auto rep = robustness_sweep(m, every(9, 300), cfg);
    for (const auto& s : rep.summaries) {
        EXPECT_EQ(s.mean_agreement, 1.0);
        EXPECT_EQ(s.mean_recall, s.baseline_recall);
        EXPECT_EQ(s.agreement.counts.back(), 5u);
    }
}
