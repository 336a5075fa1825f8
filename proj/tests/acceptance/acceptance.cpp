// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "test_support.hpp"

using namespace nomscreen;
namespace nt = nomscreen::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Beta posterior quantiles vs a trapezoid oracle.
void beta_exactness(Outcome& o) {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<size_t> tp(0, 30), fp(0, 120);
    const std::vector<double> ps = {0.025, 0.5, 0.975};
    std::vector<AnnotationCounts> pairs;
    for (int i = 0; i < 50; ++i) pairs.push_back({tp(rng), fp(rng), 0, 1000, Source::NN});

    auto t0 = Clock::now();
    std::vector<PosteriorEstimate> posts;
    for (const auto& c : pairs) posts.push_back(beta_posterior(c));
    double runtime = seconds_since(t0);

    double worst = 0;
    for (const auto& p : posts) {
        auto want = nt::trapezoid_beta_quantiles(p.alpha, p.beta, ps, 1e-6);
        worst = std::max({worst, std::abs(p.theta_lower - want[0]), std::abs(p.theta_median - want[1]),
                          std::abs(p.theta_upper - want[2])});
    }
    o.detail << "max |dtheta|=" << worst << " runtime=" << runtime << "s";
    o.require(worst < 1e-5, "quantiles within 1e-5");
    o.require(runtime < 1.0, "runtime < 1s");
}

// 2. Anchored estimates.
void published_anchors(Outcome& o) {
    auto nn = beta_posterior({11, 89, 0, 2944, Source::NN});
    auto lg = beta_posterior({1, 99, 0, 3677, Source::LOGIT});
    o.detail << "nn 11/89 median=" << nn.median << " (" << nn.lower << ", " << nn.upper << ")"
             << "; logit 1/99 median=" << lg.median;
    o.require(std::abs(nn.median - 339) < 1.0, "11/89 median ~339");
    o.require(nn.median >= 161 && nn.median <= 572, "11/89 median inside 161-572");
    o.require(std::lround(lg.median) == 61, "1/99 median rounds to 61");

    auto nn_published = beta_posterior({8, 68, 24, 2944, Source::NN});
    auto t0 = Clock::now();
    auto comb = combine({nn_published, lg}, 1000000, 402);
    double runtime = seconds_since(t0);
    o.detail << "; combined 8/68/24 + 1/99 median=" << comb.median << " (" << comb.lower << ", " << comb.upper
             << ") runtime=" << runtime << "s";
    o.require(std::abs(comb.median / 402 - 1) <= 0.05, "combined median within 5% of 402");
    o.require(std::abs(comb.lower / 212 - 1) <= 0.10, "lower within 10% of 212");
    o.require(std::abs(comb.upper / 668 - 1) <= 0.10, "upper within 10% of 668");
    o.require(runtime < 30, "runtime < 30s");

    auto alt = combine({nn, lg}, 1000000, 402);
    std::printf("INFO  combination with 11/89 + 1/99: median=%.1f ci95=(%.1f, %.1f)\n", alt.median, alt.lower, alt.upper);
}

// 3. kNN exactness on random instances with ties.
void knn_exactness(Outcome& o) {
    std::mt19937_64 rng(7);
    size_t list_mismatch = 0, flag_mismatch = 0, queries = 0;
    for (int inst = 0; inst < 20; ++inst) {
        size_t n = 200 + rng() % 1801;
        auto x = nt::tie_heavy_points(n, 48, sub_seed(7, static_cast<uint64_t>(inst)));
        KdTree tree(x);
        std::set<size_t> licensed;
        for (size_t i = 0; i < n; ++i)
            if (rng() % 25 == 0) licensed.insert(i);
        for (size_t i = 0; i < n; i += 1 + n / 60) {
            ++queries;
            list_mismatch += tree.query_row(i, 100) != nt::brute_knn(x, i, 100);
        }
        std::set<size_t> got;
        for (const auto& r : flag_candidates(tree, licensed, {100, 3}))
            if (r.flagged) got.insert(r.row);
        flag_mismatch += got != nt::brute_flags(x, licensed, 100, 3);
    }
    o.detail << queries << " neighbor lists, 20 flag sets; mismatches: lists=" << list_mismatch
             << " flags=" << flag_mismatch;
    o.require(list_mismatch == 0, "neighbor lists equal brute force");
    o.require(flag_mismatch == 0, "flag sets equal brute force");
}

// 4. Logistic regression: gradient, lambda monotonicity, determinism.
void logit_correctness(Outcome& o) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    TrainingSet ts;
    ts.x.resize(400, 48);
    ts.y.resize(400);
    for (Eigen::Index i = 0; i < 400; ++i) {
        double s = -1;
        for (Eigen::Index j = 0; j < 48; ++j) {
            ts.x(i, j) = g(rng);
            if (j < 6) s += 0.8 * ts.x(i, j);
        }
        ts.y(i) = u(rng) < 1 / (1 + std::exp(-s)) ? 1 : 0;
    }
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
        LogitConfig cfg;
        cfg.lambda = std::pow(10.0, -3 + trial * 0.5);
        Eigen::VectorXd w(49);
        for (auto& v : w) v = 0.3 * g(rng);
        auto grad = penalized_gradient(ts, w, cfg);
        Eigen::VectorXd fd(49);
        const double h = 1e-5;
        for (Eigen::Index j = 0; j < 49; ++j) {
            Eigen::VectorXd a = w, b = w;
            a(j) += h;
            b(j) -= h;
            fd(j) = (penalized_loss(ts, a, cfg) - penalized_loss(ts, b, cfg)) / (2 * h);
        }
        worst = std::max(worst, (grad - fd).norm() / fd.norm());
    }
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : default_lambda_grid()) {
        LogitConfig cfg;
        cfg.lambda = lambda;
        double norm = fit_logit(ts, cfg).weights.squaredNorm();
        monotone = monotone && norm <= prev;
        prev = norm;
    }
    auto a = fit_logit(ts), b = fit_logit(ts);
    o.detail << "gradient rel err=" << worst << "; monotone=" << monotone << "; identical refit=" << (a.weights == b.weights);
    o.require(worst < 1e-5, "gradient rel err < 1e-5");
    o.require(monotone, "penalized norm non-increasing in lambda");
    o.require(a.weights == b.weights, "identical weights on refit");
}

// 5. Features fixture, standardization moments, robust normalization.
void feature_correctness(Outcome& o) {
    auto fx = nt::load_feature_fixture();
    double diff = nt::max_abs_diff(fx.raw, nt::load_expected("expected_features.csv"));
    auto [z, stats] = standardize(fx.raw);
    double worst_mean = 0, worst_sd = 0;
    for (Eigen::Index j = 0; j < z.values.cols(); ++j) {
        Eigen::VectorXd c = z.values.col(j);
        double mean = c.mean();
        worst_mean = std::max(worst_mean, std::abs(mean));
        if (stats.zero_variance[static_cast<size_t>(j)]) continue;
        double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(c.size()));
        worst_sd = std::max(worst_sd, std::abs(sd - 1));
    }
    auto r = robust_normalize(fx.raw);
    double robust = (r.values - nt::oracle_robust(fx.raw.values)).cwiseAbs().maxCoeff();
    double robust_file = nt::max_abs_diff(r, nt::load_expected("expected_robust.csv"));
    o.detail << fx.raw.n_rows() << " directors x " << fx.raw.columns.size() << " columns; max|diff|=" << diff
             << "; max|mean|=" << worst_mean << " max|sd-1|=" << worst_sd << "; robust vs oracle=" << robust
             << " vs file=" << robust_file;
    o.require(fx.raw.columns.size() == 48, "48 columns");
    o.require(diff <= 1e-12, "fixture matches");
    o.require(worst_mean < 1e-10 && worst_sd < 1e-10, "standardized moments");
    o.require(robust <= 1e-12 && robust_file <= 1e-12, "robust normalization matches quantile oracle");
}

// 6. Reconciliation truth table, written out by hand.
void reconcile_table(Outcome& o) {
    const char* table[5] = {
        // b = 1 2 3 4 5
        "NNUUU",  // a = 1
        "NNUUU",  // a = 2
        "UUUUU",  // a = 3
        "UUUCC",  // a = 4
        "UUUCC",  // a = 5
    };
    size_t ok = 0;
    for (int a = 1; a <= 5; ++a)
        for (int b = 1; b <= 5; ++b) {
            char want = table[a - 1][b - 1];
            Label l = reconcile(a, b);
            char got = l == Label::CSP ? 'C' : l == Label::NonCSP ? 'N' : l == Label::Unknown ? 'U' : '?';
            ok += got == want;
        }
    o.detail << ok << "/25 pairs";
    o.require(ok == 25, "all 25 pairs");
}

// 7. Address regexes.
void address_corpus(Outcome& o) {
    size_t fields = 0, agree = 0;
    auto check = [&](const std::string& desc, const SplitAddress& want) {
        auto s = split_former_address(desc);
        fields += 5;
        if (!s) return;
        agree += s->street == want.street;
        agree += s->number == want.number;
        agree += s->postcode == want.postcode;
        agree += s->city == want.city;
        agree += s->postcode_kind == want.postcode_kind;
    };
    SplitAddress example{"Locatellikade", "1", "1076AZ", "AMSTERDAM", PostcodeKind::Dutch};
    check("Formerly: Locatellikade 1|1076 AZ AMSTERDAM", example);
    auto corpus = nt::load_address_corpus();
    for (const auto& row : corpus) check(row.description, row.expected);
    o.detail << corpus.size() << " corpus rows + example; " << agree << "/" << fields << " fields agree";
    o.require(corpus.size() == 50, "50-row corpus");
    o.require(agree == fields, "100% field agreement");
}

struct SyntheticRun {
    std::unique_ptr<Pipeline> pipeline;
    double seconds = 0;
};

SyntheticRun& default_synthetic_run() {
    static SyntheticRun run = [] {
        SyntheticRun r;
        auto t0 = Clock::now();
        auto dir = nt::scratch_dir("acceptance_bundle");
        synth_generate(SynthConfig{}).write(dir);
        auto cfg = PipelineConfig::from_json(synthetic_bundle_config(dir, dir / "out", 1));
        r.pipeline = std::make_unique<Pipeline>(cfg);
        r.pipeline->flag_knn();
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

// 8. Default synthetic bundle recovery.
void synthetic_recovery(Outcome& o) {
    auto& run = default_synthetic_run();
    auto ev = run.pipeline->evaluation();
    double licensed = ev.at("licensed_recall");
    double concentrated = ev.at("illegal_by_profile").at("Concentrated").at("recall");
    const auto& cfg = run.pipeline->config();
    o.detail << "k=" << cfg.knn.k << " min_support=" << cfg.knn.min_support << "; licensed self-support "
             << ev.at("licensed_self_support") << "/" << ev.at("licensed_planted") << " (" << licensed << ")"
             << "; Concentrated illegal flagged " << ev.at("illegal_by_profile").at("Concentrated").at("flagged") << "/"
             << ev.at("illegal_by_profile").at("Concentrated").at("planted") << " (" << concentrated << ")"
             << "; background flag rate " << ev.at("background_flag_rate") << "; runtime=" << run.seconds << "s";
    o.require(cfg.knn.k == 100 && cfg.knn.min_support == 3, "published settings");
    o.require(licensed >= 0.95, "licensed self-support >= 95%");
    o.require(concentrated >= 0.80, "Concentrated illegal flagged >= 80%");
    o.require(run.seconds < 120, "runtime < 2 min");
}

// 9. Extrapolation.
void extrapolation(Outcome& o) {
    std::vector<KFraction> src;
    std::map<int, double> pop;
    for (int k = 1; k <= 10; ++k) {
        pop[k] = 2e5 * std::pow(k, -2.0);
        if (k >= 3) src.push_back({k, pop[k], 0.0025 * std::pow(k, 1.4)});
    }
    auto exact = extrapolate_small(src, 1.0, pop, BoundLabel::UpperBound);
    double slope_err = std::abs(exact.slope - 1.4), icpt_err = std::abs(exact.intercept - std::log(0.0025));
    double pred_err = 0;
    for (const auto& p : exact.predictions)
        pred_err = std::max(pred_err, std::abs(p.fraction - 0.0025 * std::pow(p.k, 1.4)) / (0.0025 * std::pow(p.k, 1.4)));

    auto pl = planted_power_law(2024);
    auto fit = extrapolate_small(pl.observed, 1.0, pl.population_at, BoundLabel::UpperBound);
    double worst = 0;
    for (const auto& p : fit.predictions) worst = std::max(worst, std::abs(p.directors / pl.licensed_at.at(p.k) - 1));
    o.detail << "exact: |dslope|=" << slope_err << " |dintercept|=" << icpt_err << " max rel pred err=" << pred_err
             << "; planted: slope=" << fit.slope << " max rel err at k=1,2: " << worst;
    o.require(slope_err < 1e-10 && icpt_err < 1e-10 && pred_err < 1e-10, "exact power law to 1e-10");
    o.require(worst <= 0.10, "planted power law within 10%");
}

// 10. Robustness sweep determinism.
void robustness_determinism(Outcome& o) {
    auto& run = default_synthetic_run();
    const auto& raw = run.pipeline->raw_features();
    const auto& lic = run.pipeline->licensed_rows();
    RobustnessConfig cfg;
    cfg.n_runs = 100;
    cfg.seed = 99;
    auto a = robustness_sweep(raw, lic, cfg);
    auto b = robustness_sweep(raw, lic, cfg);
    bool same = true;
    for (size_t i = 0; i < a.summaries.size(); ++i)
        same = same && a.summaries[i].agreement == b.summaries[i].agreement && a.summaries[i].recall == b.summaries[i].recall;
    RobustnessConfig full = cfg;
    full.n_runs = 5;
    full.fraction = 1.0;
    auto f = robustness_sweep(raw, lic, full);
    bool exact = true;
    for (const auto& r : f.runs)
        for (const auto& oc : r.outcomes) exact = exact && oc.agreement == 1.0;
    o.detail << "100-run histograms identical=" << same << "; fraction 1.0 agreement exactly 1.0=" << exact
             << "; mean agreement at min_support 3: " << a.summaries[0].mean_agreement;
    o.require(same, "identical histograms");
    o.require(exact, "agreement 1.0 at fraction 1.0");
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
        {"beta-posterior-exactness", beta_exactness},
        {"anchored-estimates", published_anchors},
        {"knn-exactness", knn_exactness},
        {"logistic-regression-correctness", logit_correctness},
        {"feature-correctness", feature_correctness},
        {"reconciliation-truth-table", reconcile_table},
        {"address-regex-corpus", address_corpus},
        {"synthetic-recovery", synthetic_recovery},
        {"extrapolation", extrapolation},
        {"robustness-determinism", robustness_determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        auto t0 = Clock::now();
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        std::printf("%s  %-32s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str(), seconds_since(t0));
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
