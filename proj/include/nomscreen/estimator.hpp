#pragma once

// Beta-binomial prevalence estimates scaled to candidate populations, Monte
// Carlo combination across screening sources, market-share arithmetic and
// the log-log extrapolation to directors of one or two companies.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/common.hpp"
#include "nomscreen/features.hpp"

namespace nomscreen {

enum class Source { NN, LOGIT };

inline const char* to_string(Source s) { return s == Source::NN ? "nn" : "logit"; }

inline Source parse_source(std::string_view s) {
    auto l = str::to_lower(s);
    if (l == "nn") return Source::NN;
    if (l == "logit") return Source::LOGIT;
    throw Error("unknown source: " + std::string(s));
}

struct AnnotationCounts {
    size_t tp = 0;
    size_t fp = 0;
    size_t unknown = 0;
    size_t n_candidates = 0;
    Source source = Source::NN;

    size_t sample_size() const { return tp + fp + unknown; }
    // Sensitivity variant: undeterminable cases counted as negatives.
    AnnotationCounts unknown_as_fp() const { return {tp, fp + unknown, 0, n_candidates, source}; }
};

namespace beta {

// Continued fraction for I_x(a, b) (modified Lentz).
inline double continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300, eps = 1e-16;
    double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1, d = 1 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1) < eps) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

// Regularized incomplete beta I_x(a, b).
inline double cdf(double x, double a, double b) {
    if (!(a > 0 && b > 0)) throw Error("beta parameters must be positive");
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    double lfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(lfront);
    if (x < (a + 1) / (a + b + 2)) return front * continued_fraction(a, b, x) / a;
    return 1 - front * continued_fraction(b, a, 1 - x) / b;
}

// Bisection on the monotone CDF; bracket width below 1e-12.
inline double quantile(double p, double a, double b) {
    if (!(p >= 0 && p <= 1)) throw Error("quantile level out of range");
    double lo = 0, hi = 1;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        double mid = 0.5 * (lo + hi);
        if (cdf(mid, a, b) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace beta

struct PosteriorEstimate {
    Source source = Source::NN;
    double alpha = 1, beta = 1;
    size_t n_candidates = 0;
    double theta_median = 0.5, theta_lower = 0.025, theta_upper = 0.975;
    double median = 0, lower = 0, upper = 0;  // scaled by n_candidates

    nlohmann::json to_json() const {
        return {{"source", to_string(source)}, {"alpha", alpha},  {"beta", beta},
                {"n_candidates", n_candidates}, {"theta", {{"median", theta_median}, {"ci95", {theta_lower, theta_upper}}}},
                {"median", median},             {"ci95", {lower, upper}}};
    }
};

// Uniform Beta(1, 1) prior: posterior Beta(TP + 1, FP + 1).
inline PosteriorEstimate beta_posterior(const AnnotationCounts& c) {
    PosteriorEstimate e;
    e.source = c.source;
    e.alpha = static_cast<double>(c.tp) + 1;
    e.beta = static_cast<double>(c.fp) + 1;
    e.n_candidates = c.n_candidates;
    e.theta_median = beta::quantile(0.5, e.alpha, e.beta);
    e.theta_lower = beta::quantile(0.025, e.alpha, e.beta);
    e.theta_upper = beta::quantile(0.975, e.alpha, e.beta);
    double n = static_cast<double>(c.n_candidates);
    e.median = e.theta_median * n;
    e.lower = e.theta_lower * n;
    e.upper = e.theta_upper * n;
    return e;
}

struct CombinedEstimate {
    std::vector<PosteriorEstimate> sources;
    size_t n_mc = 0;
    uint64_t seed = 0;
    double median = 0, lower = 0, upper = 0;
    std::vector<double> draws;  // summed scaled draws, in chunk order

    nlohmann::json to_json() const {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& p : sources) s.push_back(p.to_json());
        return {{"sources", s}, {"n_mc", n_mc}, {"seed", seed}, {"median", median}, {"ci95", {lower, upper}}};
    }
};

// Empirical quantile with linear interpolation (sorts a copy).
inline double empirical_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

// Draws theta ~ Beta(alpha, beta) per source as X / (X + Y) with gamma
// variates, scales and sums. Draws are split into a fixed number of chunks,
// each with its own sub-seed, so the result does not depend on scheduling.
inline CombinedEstimate combine(const std::vector<PosteriorEstimate>& sources, size_t n_mc, uint64_t seed,
                                size_t chunks = 16) {
    if (sources.empty()) throw Error("combine needs at least one source");
    if (n_mc == 0) throw Error("combine needs at least one draw");
    CombinedEstimate out;
    out.sources = sources;
    out.n_mc = n_mc;
    out.seed = seed;
    out.draws.resize(n_mc);
    chunks = std::max<size_t>(1, std::min(chunks, n_mc));
    for (size_t c = 0; c < chunks; ++c) {
        size_t begin = n_mc * c / chunks, end = n_mc * (c + 1) / chunks;
        std::mt19937_64 rng(sub_seed(seed, c));
        std::vector<std::gamma_distribution<double>> ga, gb;
        for (const auto& s : sources) {
            ga.emplace_back(s.alpha, 1.0);
            gb.emplace_back(s.beta, 1.0);
        }
        for (size_t i = begin; i < end; ++i) {
            double total = 0;
            for (size_t s = 0; s < sources.size(); ++s) {
                double x = ga[s](rng), y = gb[s](rng);
                total += x / (x + y) * static_cast<double>(sources[s].n_candidates);
            }
            out.draws[i] = total;
        }
    }
    std::vector<double> sorted(out.draws);
    std::sort(sorted.begin(), sorted.end());
    out.median = quantile_sorted(sorted, 0.5);
    out.lower = quantile_sorted(sorted, 0.025);
    out.upper = quantile_sorted(sorted, 0.975);
    return out;
}

// Per-director tallies of the flagged sample and totals for the licensed sector.
struct MarketTallies {
    size_t licensed_directors = 0;
    double licensed_positions = 0;
    double licensed_companies = 0;
    double licensed_independent = 0;
    std::vector<double> sample_positions;    // per flagged-sample director
    std::vector<double> sample_companies;
    std::vector<double> sample_independent;
};

struct ShareSummary {
    std::string measure;
    double illegal_median = 0, illegal_lower = 0, illegal_upper = 0;
    double share_median = 0, share_lower = 0, share_upper = 0;

    nlohmann::json to_json() const {
        return {{"measure", measure},
                {"illegal", {{"median", illegal_median}, {"ci95", {illegal_lower, illegal_upper}}}},
                {"share", {{"median", share_median}, {"ci95", {share_lower, share_upper}}}}};
    }
};

// Illegal counts per draw are directors x the sample's mean per-director
// tally; share = illegal / (illegal + licensed). Zero illegal gives zero share.
inline std::vector<ShareSummary> market_share(const std::vector<double>& illegal_draws, const MarketTallies& t) {
    if (illegal_draws.empty()) throw Error("market_share needs draws");
    auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    struct Measure {
        const char* name;
        double per_director;
        double licensed;
    };
    const Measure measures[] = {
        {"directors", 1.0, static_cast<double>(t.licensed_directors)},
        {"positions", mean(t.sample_positions), t.licensed_positions},
        {"companies", mean(t.sample_companies), t.licensed_companies},
        {"independent_companies", mean(t.sample_independent), t.licensed_independent},
    };
    std::vector<ShareSummary> out;
    for (const auto& m : measures) {
        std::vector<double> illegal, share;
        illegal.reserve(illegal_draws.size());
        share.reserve(illegal_draws.size());
        for (double d : illegal_draws) {
            double x = d * m.per_director;
            illegal.push_back(x);
            share.push_back(x > 0 ? x / (x + m.licensed) : 0.0);
        }
        std::sort(illegal.begin(), illegal.end());
        std::sort(share.begin(), share.end());
        out.push_back({m.name, quantile_sorted(illegal, 0.5), quantile_sorted(illegal, 0.025),
                       quantile_sorted(illegal, 0.975), quantile_sorted(share, 0.5), quantile_sorted(share, 0.025),
                       quantile_sorted(share, 0.975)});
    }
    return out;
}

enum class BoundLabel { UpperBound, LowerBound };

inline const char* to_string(BoundLabel b) { return b == BoundLabel::UpperBound ? "UpperBound" : "LowerBound"; }

// Observed CSP fraction among directors managing k independent companies.
struct KFraction {
    int k = 0;
    double n_directors = 0;  // population directors at k
    double fraction = 0;     // P(CSP | k), before any TP-rate adjustment
};

struct ExtrapolationPrediction {
    int k = 0;
    double fraction = 0;
    double directors = 0;
    double companies = 0;
};

struct ExtrapolationFit {
    double slope = 0;
    double intercept = 0;  // natural-log scale
    BoundLabel bound = BoundLabel::UpperBound;
    size_t points = 0;
    std::vector<ExtrapolationPrediction> predictions;

    double fraction_at(double k) const { return std::exp(intercept + slope * std::log(k)); }

    nlohmann::json to_json() const {
        nlohmann::json p = nlohmann::json::array();
        for (const auto& x : predictions)
            p.push_back({{"k", x.k}, {"fraction", x.fraction}, {"directors", x.directors}, {"companies", x.companies}});
        return {{"bound", to_string(bound)}, {"slope", slope}, {"intercept", intercept}, {"points", points},
                {"predictions", p}};
    }
};

// Unweighted least squares of log(fraction) on log(k) over k in 1..10 with a
// positive fraction. With fixed_slope, only the intercept is fitted.
inline std::pair<double, double> fit_log_log(const std::vector<std::pair<double, double>>& k_fraction,
                                             std::optional<double> fixed_slope = std::nullopt) {
    std::vector<double> xs, ys;
    for (auto [k, f] : k_fraction) {
        if (k < 1 || k > 10 || !(f > 0)) continue;
        xs.push_back(std::log(k));
        ys.push_back(std::log(f));
    }
    if (xs.empty() || (!fixed_slope && xs.size() < 2)) throw Error("not enough points for the log-log fit");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double slope;
    if (fixed_slope) {
        slope = *fixed_slope;
    } else {
        double sxx = 0, sxy = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        if (sxx == 0) throw Error("log-log fit needs two distinct k");
        slope = sxy / sxx;
    }
    return {slope, my - slope * mx};
}

// Fit on the source's fractions (multiplied by tp_rate), then predict the
// number of CSP directors at each target k from the population counts there.
// A LowerBound fit takes its slope from `slope_from` (the licensed sample).
inline ExtrapolationFit extrapolate_small(const std::vector<KFraction>& source, double tp_rate,
                                          const std::map<int, double>& population_at, BoundLabel bound,
                                          std::optional<double> slope_from = std::nullopt,
                                          const std::vector<int>& targets = {1, 2}) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : source) pts.emplace_back(p.k, p.fraction * tp_rate);
    auto [slope, intercept] = fit_log_log(pts, slope_from);
    ExtrapolationFit fit;
    fit.slope = slope;
    fit.intercept = intercept;
    fit.bound = bound;
    for (auto [k, f] : pts) fit.points += (k >= 1 && k <= 10 && f > 0);
    for (int k : targets) {
        ExtrapolationPrediction pr;
        pr.k = k;
        pr.fraction = fit.fraction_at(k);
        auto it = population_at.find(k);
        double pop = it == population_at.end() ? 0.0 : it->second;
        pr.directors = std::max(0.0, pr.fraction * pop);
        pr.companies = pr.directors * k;
        fit.predictions.push_back(pr);
    }
    return fit;
}

} // namespace nomscreen
