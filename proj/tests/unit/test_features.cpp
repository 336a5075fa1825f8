#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace nomscreen;
namespace nt = nomscreen::testing;

namespace {

const nt::FeatureFixture& fixture() {
    static const auto fx = nt::load_feature_fixture();
    return fx;
}

double column_sd(const Eigen::VectorXd& c) {
    double mean = c.mean();
    return std::sqrt((c.array() - mean).square().sum() / static_cast<double>(c.size()));
}

} // namespace

TEST(Features, FixtureMatchesOracleInAllColumns) {
    const auto& got = fixture().raw;
    auto want = nt::load_expected("expected_features.csv");
    ASSERT_EQ(got.columns, want.columns);
    ASSERT_EQ(got.director_ids, want.director_ids);
    for (Eigen::Index j = 0; j < got.values.cols(); ++j)
        for (Eigen::Index i = 0; i < got.values.rows(); ++i)
            EXPECT_NEAR(got.values(i, j), want.values(i, j), 1e-12)
                << got.director_ids[static_cast<size_t>(i)] << " " << got.columns[static_cast<size_t>(j)];
}

TEST(Features, ColumnNamesAndCount) {
    EXPECT_EQ(feature_names().size(), 48u);
    EXPECT_EQ(fixture().raw.values.cols(), 48);
    EXPECT_EQ(feature_index(feature_names()[17]), 17u);
    EXPECT_THROW(feature_index("no_such_feature"), Error);
}

TEST(Features, StandardizedMomentsAndOracle) {
    auto [z, stats] = standardize(fixture().raw);
    EXPECT_LT(nt::max_abs_diff(z, nt::load_expected("expected_standardized.csv")), 1e-12);
    size_t constant = 0;
    for (Eigen::Index j = 0; j < z.values.cols(); ++j) {
        Eigen::VectorXd c = z.values.col(j);
        EXPECT_LT(std::abs(c.mean()), 1e-10) << z.columns[static_cast<size_t>(j)];
        if (stats.zero_variance[static_cast<size_t>(j)]) {
            ++constant;
            EXPECT_EQ(c.cwiseAbs().maxCoeff(), 0.0);
        } else {
            EXPECT_LT(std::abs(column_sd(c) - 1.0), 1e-10) << z.columns[static_cast<size_t>(j)];
        }
    }
    EXPECT_GE(constant, 1u);
}

TEST(Features, RobustNormalizationMatchesQuantileOracle) {
    const auto& raw = fixture().raw;
    auto r = robust_normalize(raw);
    EXPECT_LT((r.values - nt::oracle_robust(raw.values)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(nt::max_abs_diff(r, nt::load_expected("expected_robust.csv")), 1e-12);
}

TEST(Features, QuantileMatchesTextbookDefinition) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (size_t n : {1u, 2u, 5u, 10u, 101u}) {
        std::vector<double> v(n);
        for (auto& x : v) x = g(rng);
        auto s = v;
        std::sort(s.begin(), s.end());
        for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})
            EXPECT_NEAR(quantile_sorted(s, p), nt::oracle_quantile(v, p), 1e-15);
    }
    EXPECT_THROW(quantile_sorted({}, 0.5), Error);
}

TEST(Features, CsvRoundTripIsExact) {
    const auto& raw = fixture().raw;
    std::ostringstream out;
    raw.write_csv(out);
    std::istringstream in(out.str());
    auto back = FeatureMatrix::read_csv(in);
    EXPECT_EQ(nt::max_abs_diff(raw, back), 0.0);
    std::ostringstream again;
    back.write_csv(again);
    EXPECT_EQ(out.str(), again.str());
}

TEST(Features, ScalingStatsJsonRoundTrip) {
    auto stats = scaling_stats(fixture().raw.values);
    auto back = ScalingStats::from_json(nlohmann::json::parse(stats.to_json().dump()));
    EXPECT_EQ(back.mean, stats.mean);
    EXPECT_EQ(back.iqr, stats.iqr);
    EXPECT_EQ(back.zero_variance, stats.zero_variance);
}

TEST(Features, GroupMeansAndBootstrapIntervals) {
    const auto& raw = fixture().raw;
    std::map<std::string, std::vector<size_t>> groups = {{"first", {0, 1, 2, 3, 4}}, {"all", {}}, {"empty", {}}};
    for (size_t i = 0; i < raw.n_rows(); ++i) groups["all"].push_back(i);
    auto res = group_means(raw, groups, 9, 400);
    ASSERT_EQ(res.warnings.size(), 1u);
    EXPECT_EQ(res.means.size(), 2u * 48u);
    for (const auto& m : res.means) {
        const auto& rows = groups.at(m.group);
        double sum = 0;
        auto j = static_cast<Eigen::Index>(feature_index(m.feature));
        for (auto r : rows) sum += raw.values(static_cast<Eigen::Index>(r), j);
        EXPECT_NEAR(m.mean, sum / static_cast<double>(rows.size()), 1e-12);
        EXPECT_LE(m.ci_low, m.ci_high);
        EXPECT_LE(m.ci_low, m.mean + 1e-12);
        EXPECT_GE(m.ci_high, m.mean - 1e-12);
    }
    auto again = group_means(raw, groups, 9, 400);
    EXPECT_EQ(again.means.front().ci_low, res.means.front().ci_low);
    EXPECT_THROW(group_means(raw, {{"bad", {raw.n_rows()}}}, 1, 10), Error);
}

TEST(Features, SharesLieInUnitInterval) {
    const auto& raw = fixture().raw;
    for (Eigen::Index j = 0; j < raw.values.cols(); ++j) {
        const auto& name = raw.columns[static_cast<size_t>(j)];
        if (name.rfind("pct_", 0) != 0) continue;
        EXPECT_GE(raw.values.col(j).minCoeff(), 0.0) << name;
        EXPECT_LE(raw.values.col(j).maxCoeff(), 1.0) << name;
    }
}
