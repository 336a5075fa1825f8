#pragma once

// Feature-subset robustness: repeat the kNN pass on random 80% column subsets
// and compare each run's flags with the all-column baseline.

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/common.hpp"
#include "nomscreen/features.hpp"
#include "nomscreen/knn.hpp"

namespace nomscreen {

enum class AgreementMetric { Jaccard, OverlapOfSmaller };

inline AgreementMetric parse_agreement_metric(std::string_view s) {
    if (s == "jaccard") return AgreementMetric::Jaccard;
    if (s == "overlap_of_smaller") return AgreementMetric::OverlapOfSmaller;
    throw Error("unknown agreement metric: " + std::string(s));
}

inline const char* to_string(AgreementMetric m) {
    return m == AgreementMetric::Jaccard ? "jaccard" : "overlap_of_smaller";
}

// Two empty sets agree completely.
inline double set_agreement(const std::set<size_t>& a, const std::set<size_t>& b,
                            AgreementMetric metric = AgreementMetric::Jaccard) {
    if (a.empty() && b.empty()) return 1.0;
    size_t common = 0;
    for (auto x : a) common += b.count(x);
    if (metric == AgreementMetric::Jaccard)
        return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
    size_t smaller = std::min(a.size(), b.size());
    return smaller == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(smaller);
}

struct RobustnessConfig {
    size_t n_runs = 100;
    double fraction = 0.8;
    std::vector<size_t> min_supports = {3, 9};
    size_t k = 100;
    uint64_t seed = 0;
    AgreementMetric metric = AgreementMetric::Jaccard;
    double bin_width = 0.05;
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct RobustnessOutcome {
    size_t min_support = 0;
    std::set<size_t> flagged;    // non-licensed rows
    double licensed_recall = 0;  // licensed rows with support >= min_support
    double agreement = 0;        // vs baseline flagged set
};

struct RobustnessRun {
    size_t run_id = 0;
    std::vector<size_t> columns;  // retained, ascending
    std::vector<RobustnessOutcome> outcomes;  // one per min_support
};

struct Histogram {
    double bin_width = 0.05;
    std::vector<size_t> counts;  // bins over [0, 1]; 1.0 falls in the last bin

    static Histogram of(const std::vector<double>& values, double bin_width) {
        Histogram h;
        h.bin_width = bin_width;
        auto bins = static_cast<size_t>(std::llround(1.0 / bin_width));
        h.counts.assign(bins, 0);
        for (double v : values) {
            auto b = static_cast<size_t>(std::floor(std::clamp(v, 0.0, 1.0) / bin_width));
            ++h.counts[std::min(b, bins - 1)];
        }
        return h;
    }
    friend bool operator==(const Histogram&, const Histogram&) = default;
};

struct RobustnessSummary {
    size_t min_support = 0;
    size_t baseline_flagged = 0;
    double baseline_recall = 0;
    double mean_agreement = 0;
    double mean_recall = 0;
    Histogram agreement, recall;
};

struct RobustnessReport {
    std::vector<RobustnessRun> runs;
    std::vector<RobustnessSummary> summaries;

    nlohmann::json to_json(const RobustnessConfig& cfg) const {
        nlohmann::json j;
        j["config"] = {{"n_runs", cfg.n_runs}, {"fraction", cfg.fraction}, {"min_supports", cfg.min_supports},
                       {"k", cfg.k}, {"seed", cfg.seed}, {"metric", to_string(cfg.metric)}, {"bin_width", cfg.bin_width}};
        j["summaries"] = nlohmann::json::array();
        for (const auto& s : summaries)
            j["summaries"].push_back({{"min_support", s.min_support}, {"baseline_flagged", s.baseline_flagged},
                                      {"baseline_recall", s.baseline_recall}, {"mean_agreement", s.mean_agreement},
                                      {"mean_recall", s.mean_recall}, {"agreement_histogram", s.agreement.counts},
                                      {"recall_histogram", s.recall.counts}});
        j["runs"] = nlohmann::json::array();
        for (const auto& r : runs) {
            nlohmann::json rj = {{"run_id", r.run_id}, {"columns", r.columns}};
            for (const auto& o : r.outcomes)
                rj["outcomes"].push_back({{"min_support", o.min_support}, {"n_flagged", o.flagged.size()},
                                          {"licensed_recall", o.licensed_recall}, {"agreement", o.agreement}});
            j["runs"].push_back(rj);
        }
        return j;
    }
};

// round(fraction * n) columns, sampled without replacement.
inline std::vector<size_t> sample_columns(size_t n, double fraction, uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1)) throw Error("robustness fraction must be in (0, 1]");
    auto keep = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    std::vector<size_t> all(n);
    std::iota(all.begin(), all.end(), size_t{0});
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < keep; ++i) {
        std::uniform_int_distribution<size_t> pick(i, n - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(keep);
    std::sort(all.begin(), all.end());
    return all;
}

namespace detail {

// Standardize the given columns, index, and flag at every min_support.
inline std::vector<RobustnessOutcome> knn_outcomes(const FeatureMatrix& raw, const std::vector<size_t>& columns,
                                                   const std::set<size_t>& licensed, const RobustnessConfig& cfg) {
    auto [z, stats] = standardize(raw.select_columns(columns));
    KdTree index(z.values);
    auto results = flag_candidates(index, licensed, {cfg.k, 1});
    std::vector<RobustnessOutcome> out;
    for (auto ms : cfg.min_supports) {
        RobustnessOutcome o;
        o.min_support = ms;
        size_t recovered = 0;
        for (const auto& r : results) {
            if (r.is_licensed) recovered += r.support >= ms;
            else if (r.support >= ms) o.flagged.insert(r.row);
        }
        o.licensed_recall = licensed.empty() ? 0.0 : static_cast<double>(recovered) / static_cast<double>(licensed.size());
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace detail

// Runs are independent and each is seeded by sub_seed(seed, run_id), so the
// report does not depend on the thread count.
inline RobustnessReport robustness_sweep(const FeatureMatrix& raw, const std::set<size_t>& licensed,
                                         const RobustnessConfig& cfg = {}) {
    if (cfg.min_supports.empty()) throw Error("no min_support values");
    std::vector<size_t> all(static_cast<size_t>(raw.values.cols()));
    std::iota(all.begin(), all.end(), size_t{0});
    auto baseline = detail::knn_outcomes(raw, all, licensed, cfg);

    RobustnessReport rep;
    rep.runs.resize(cfg.n_runs);
    auto work = [&](size_t r) {
        RobustnessRun run;
        run.run_id = r;
        run.columns = sample_columns(all.size(), cfg.fraction, sub_seed(cfg.seed, r));
        run.outcomes = detail::knn_outcomes(raw, run.columns, licensed, cfg);
        for (size_t i = 0; i < run.outcomes.size(); ++i)
            run.outcomes[i].agreement = set_agreement(run.outcomes[i].flagged, baseline[i].flagged, cfg.metric);
        rep.runs[r] = std::move(run);
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<size_t>(threads, std::max<size_t>(cfg.n_runs, 1)));
    std::vector<std::future<void>> workers;
    for (unsigned t = 0; t < threads; ++t)
        workers.push_back(std::async(std::launch::async, [&, t] {
            for (size_t r = t; r < cfg.n_runs; r += threads) work(r);
        }));
    for (auto& w : workers) w.get();

    for (size_t i = 0; i < cfg.min_supports.size(); ++i) {
        RobustnessSummary s;
        s.min_support = cfg.min_supports[i];
        s.baseline_flagged = baseline[i].flagged.size();
        s.baseline_recall = baseline[i].licensed_recall;
        std::vector<double> agree, recall;
        for (const auto& run : rep.runs) {
            agree.push_back(run.outcomes[i].agreement);
            recall.push_back(run.outcomes[i].licensed_recall);
        }
        if (!agree.empty()) {
            s.mean_agreement = std::accumulate(agree.begin(), agree.end(), 0.0) / static_cast<double>(agree.size());
            s.mean_recall = std::accumulate(recall.begin(), recall.end(), 0.0) / static_cast<double>(recall.size());
        }
        s.agreement = Histogram::of(agree, cfg.bin_width);
        s.recall = Histogram::of(recall, cfg.bin_width);
        rep.summaries.push_back(std::move(s));
    }
    return rep;
}

} // namespace nomscreen
