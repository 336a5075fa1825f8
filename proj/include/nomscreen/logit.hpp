#pragma once

// L2-penalized logistic regression, fitted by damped Newton iteration from
// W = 0. Loss: mean negative log-likelihood + lambda * sum(W_i^2), the sum
// including the intercept unless penalize_intercept is off.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nomscreen/common.hpp"
#include "nomscreen/csv.hpp"
#include "nomscreen/features.hpp"

namespace nomscreen {

struct LogitConfig {
    double lambda = 1e-2;
    bool penalize_intercept = true;
    bool balance_classes = false;  // per-class weights n / (2 n_class)
    double tolerance = 1e-8;       // gradient infinity norm
    int max_iterations = 500;
};

// Labeled rows (standardized features, no intercept column).
struct TrainingSet {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;  // 1 positive, 0 negative

    size_t size() const { return static_cast<size_t>(y.size()); }
    size_t positives() const { return static_cast<size_t>(y.sum()); }

    TrainingSet subset(const std::vector<size_t>& rows) const {
        TrainingSet t;
        t.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        t.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (size_t i = 0; i < rows.size(); ++i) {
            t.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
            t.y(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
        }
        return t;
    }
};

// Positive and negative row sets must be disjoint; other rows are left out.
inline TrainingSet make_training_set(const Eigen::MatrixXd& standardized, const std::set<size_t>& positives,
                                     const std::set<size_t>& negatives) {
    std::vector<size_t> rows;
    std::vector<double> labels;
    for (size_t i = 0; i < static_cast<size_t>(standardized.rows()); ++i) {
        bool p = positives.count(i) > 0, n = negatives.count(i) > 0;
        if (p && n) throw Error("training labels overlap at row " + std::to_string(i));
        if (!p && !n) continue;
        rows.push_back(i);
        labels.push_back(p ? 1.0 : 0.0);
    }
    TrainingSet t;
    t.x.resize(static_cast<Eigen::Index>(rows.size()), standardized.cols());
    t.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        t.x.row(static_cast<Eigen::Index>(i)) = standardized.row(static_cast<Eigen::Index>(rows[i]));
        t.y(static_cast<Eigen::Index>(i)) = labels[i];
    }
    return t;
}

namespace detail {

inline double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

inline double sigmoid(double s) {
    return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a(x.rows(), x.cols() + 1);
    a.col(0).setOnes();
    a.rightCols(x.cols()) = x;
    return a;
}

inline Eigen::VectorXd sample_weights(const Eigen::VectorXd& y, bool balance) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(y.size());
    if (!balance) return w;
    double n = static_cast<double>(y.size()), pos = y.sum(), neg = n - pos;
    for (Eigen::Index i = 0; i < y.size(); ++i) w(i) = y(i) > 0.5 ? n / (2 * pos) : n / (2 * neg);
    return w;
}

inline Eigen::VectorXd penalty_mask(Eigen::Index p, bool penalize_intercept) {
    Eigen::VectorXd m = Eigen::VectorXd::Ones(p);
    if (!penalize_intercept) m(0) = 0;
    return m;
}

} // namespace detail

// Penalized objective and its gradient at W (W(0) is the intercept).
inline double penalized_loss(const TrainingSet& ts, const Eigen::VectorXd& w, const LogitConfig& cfg) {
    auto a = detail::with_intercept(ts.x);
    auto sw = detail::sample_weights(ts.y, cfg.balance_classes);
    Eigen::VectorXd s = a * w;
    double nll = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) nll += sw(i) * (detail::softplus(s(i)) - ts.y(i) * s(i));
    auto mask = detail::penalty_mask(w.size(), cfg.penalize_intercept);
    return nll / static_cast<double>(ts.size()) + cfg.lambda * (mask.array() * w.array().square()).sum();
}

inline Eigen::VectorXd penalized_gradient(const TrainingSet& ts, const Eigen::VectorXd& w, const LogitConfig& cfg) {
    auto a = detail::with_intercept(ts.x);
    auto sw = detail::sample_weights(ts.y, cfg.balance_classes);
    Eigen::VectorXd s = a * w;
    Eigen::VectorXd r(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) r(i) = sw(i) * (detail::sigmoid(s(i)) - ts.y(i));
    auto mask = detail::penalty_mask(w.size(), cfg.penalize_intercept);
    return a.transpose() * r / static_cast<double>(ts.size()) + 2 * cfg.lambda * (mask.array() * w.array()).matrix();
}

struct LogitModel {
    Eigen::VectorXd weights;  // [intercept, w_1..w_p]
    double lambda = 0;
    bool penalize_intercept = true;
    int iterations = 0;
    double final_loss = 0;
    std::vector<double> loss_trace;  // objective after each iteration, starting at W = 0
    std::vector<std::string> columns;
    std::optional<ScalingStats> scaling;

    double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
        return weights(0) + row.dot(weights.tail(weights.size() - 1));
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"lambda", lambda},
                         {"penalize_intercept", penalize_intercept},
                         {"iterations", iterations},
                         {"loss", final_loss},
                         {"intercept", weights(0)},
                         {"columns", columns}};
        std::vector<double> w(weights.data() + 1, weights.data() + weights.size());
        j["weights"] = w;
        if (scaling) j["scaling"] = scaling->to_json();
        return j;
    }

    static LogitModel from_json(const nlohmann::json& j) {
        LogitModel m;
        m.lambda = j.at("lambda").get<double>();
        m.penalize_intercept = j.value("penalize_intercept", true);
        m.iterations = j.value("iterations", 0);
        m.final_loss = j.value("loss", 0.0);
        auto w = j.at("weights").get<std::vector<double>>();
        m.weights.resize(static_cast<Eigen::Index>(w.size() + 1));
        m.weights(0) = j.at("intercept").get<double>();
        for (size_t i = 0; i < w.size(); ++i) m.weights(static_cast<Eigen::Index>(i + 1)) = w[i];
        m.columns = j.value("columns", std::vector<std::string>{});
        if (j.contains("scaling")) m.scaling = ScalingStats::from_json(j.at("scaling"));
        return m;
    }
};

inline LogitModel fit_logit(const TrainingSet& ts, const LogitConfig& cfg = {}) {
    if (!(cfg.lambda > 0)) throw Error("lambda must be positive");
    const size_t pos = ts.positives();
    if (pos == 0 || pos == ts.size()) throw Error("logistic fit needs both classes");
    const auto a = detail::with_intercept(ts.x);
    const auto sw = detail::sample_weights(ts.y, cfg.balance_classes);
    const auto mask = detail::penalty_mask(a.cols(), cfg.penalize_intercept);
    const double n = static_cast<double>(ts.size());

    auto loss_at = [&](const Eigen::VectorXd& w) {
        Eigen::VectorXd s = a * w;
        double nll = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i) nll += sw(i) * (detail::softplus(s(i)) - ts.y(i) * s(i));
        return nll / n + cfg.lambda * (mask.array() * w.array().square()).sum();
    };

    LogitModel m;
    m.lambda = cfg.lambda;
    m.penalize_intercept = cfg.penalize_intercept;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(a.cols());
    double loss = loss_at(w);
    m.loss_trace.push_back(loss);
    double gnorm = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        Eigen::VectorXd s = a * w;
        Eigen::VectorXd r(s.size()), h(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            double p = detail::sigmoid(s(i));
            r(i) = sw(i) * (p - ts.y(i));
            h(i) = sw(i) * p * (1 - p);
        }
        Eigen::VectorXd grad = a.transpose() * r / n + 2 * cfg.lambda * (mask.array() * w.array()).matrix();
        gnorm = grad.lpNorm<Eigen::Infinity>();
        if (gnorm < cfg.tolerance) break;
        Eigen::MatrixXd hess = a.transpose() * h.asDiagonal() * a / n;
        hess.diagonal() += 2 * cfg.lambda * mask;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        Eigen::VectorXd step = ldlt.solve(-grad);
        double slope = grad.dot(step);
        if (ldlt.info() != Eigen::Success || !step.allFinite() || !(slope < 0)) {
            step = -grad;  // fall back to steepest descent
            slope = -grad.squaredNorm();
        }
        // Armijo backtracking.
        double t = 1.0, next = loss;
        Eigen::VectorXd cand;
        for (int b = 0; b < 60; ++b, t *= 0.5) {
            cand = w + t * step;
            next = loss_at(cand);
            if (next <= loss + 1e-4 * t * slope) break;
        }
        if (!(next < loss)) break;  // no further decrease representable
        w = cand;
        loss = next;
        m.loss_trace.push_back(loss);
    }
    if (gnorm >= cfg.tolerance) {
        // Stalled by rounding: accept if the gradient is tiny relative to scale.
        Eigen::VectorXd grad = penalized_gradient(ts, w, cfg);
        gnorm = grad.lpNorm<Eigen::Infinity>();
        if (gnorm >= std::max(cfg.tolerance, 1e-6)) {
            std::ostringstream msg;
            msg << "logistic fit did not converge: iterations=" << it << " grad_inf=" << gnorm << " loss=" << loss
                << " lambda=" << cfg.lambda;
            throw Error(msg.str());
        }
    }
    m.weights = w;
    m.iterations = it;
    m.final_loss = loss;
    return m;
}

// Strictly inside (0, 1).
inline double clamp_probability(double p) {
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = std::nextafter(1.0, 0.0);
    return std::clamp(p, lo, hi);
}

inline Eigen::VectorXd predict_proba(const LogitModel& m, const Eigen::MatrixXd& rows) {
    if (rows.cols() + 1 != m.weights.size()) throw Error("feature width does not match model");
    Eigen::VectorXd p(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) p(i) = clamp_probability(detail::sigmoid(m.score(rows.row(i))));
    return p;
}

// Mean held-out log-likelihood per row.
inline double mean_log_likelihood(const LogitModel& m, const TrainingSet& ts) {
    double ll = 0;
    for (Eigen::Index i = 0; i < ts.x.rows(); ++i) {
        double s = m.score(ts.x.row(i));
        ll -= ts.y(i) > 0.5 ? detail::softplus(-s) : detail::softplus(s);
    }
    return ll / static_cast<double>(ts.size());
}

// Ten log-spaced values in [1e-4, 1e2].
inline std::vector<double> default_lambda_grid() {
    std::vector<double> g;
    for (int i = 0; i < 10; ++i) g.push_back(std::pow(10.0, -4.0 + 6.0 * i / 9.0));
    return g;
}

// Stratified fold assignment; each class is shuffled and dealt round-robin.
inline std::vector<size_t> stratified_folds(const Eigen::VectorXd& y, size_t folds, uint64_t seed) {
    std::vector<size_t> pos, neg;
    for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0.5 ? pos : neg).push_back(static_cast<size_t>(i));
    std::mt19937_64 rng(seed);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<size_t> fold(static_cast<size_t>(y.size()));
    size_t k = 0;
    for (auto i : pos) fold[i] = k++ % folds;
    for (auto i : neg) fold[i] = k++ % folds;
    return fold;
}

struct CrossValidation {
    double lambda = 0;
    std::vector<double> grid;    // sorted, deduplicated
    std::vector<double> scores;  // mean held-out log-likelihood per grid value
    int attempts = 0;
};

inline CrossValidation cross_validate_lambda(const TrainingSet& ts, std::vector<double> grid, size_t folds,
                                             uint64_t seed, LogitConfig base = {}) {
    if (grid.empty()) throw Error("lambda grid is empty");
    if (folds < 2) throw Error("need at least two folds");
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    CrossValidation cv;
    cv.grid = grid;
    std::vector<size_t> fold;
    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
        cv.attempts = attempt + 1;
        fold = stratified_folds(ts.y, folds, sub_seed(seed, static_cast<uint64_t>(attempt)));
        ok = true;
        for (size_t f = 0; f < folds && ok; ++f) {
            size_t tr_pos = 0, tr_n = 0, te_pos = 0, te_n = 0;
            for (size_t i = 0; i < fold.size(); ++i) {
                bool p = ts.y(static_cast<Eigen::Index>(i)) > 0.5;
                if (fold[i] == f) {
                    ++te_n;
                    te_pos += p;
                } else {
                    ++tr_n;
                    tr_pos += p;
                }
            }
            ok = tr_pos > 0 && tr_pos < tr_n && te_pos > 0 && te_pos < te_n;
        }
    }
    if (!ok) throw Error("could not draw folds with both classes in every fold");

    std::vector<TrainingSet> train(folds), test(folds);
    for (size_t f = 0; f < folds; ++f) {
        std::vector<size_t> tr, te;
        for (size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
        train[f] = ts.subset(tr);
        test[f] = ts.subset(te);
    }
    for (double lambda : grid) {
        auto cfg = base;
        cfg.lambda = lambda;
        double total = 0;
        for (size_t f = 0; f < folds; ++f) total += mean_log_likelihood(fit_logit(train[f], cfg), test[f]);
        cv.scores.push_back(total / static_cast<double>(folds));
    }
    size_t best = 0;
    for (size_t i = 1; i < grid.size(); ++i)
        if (cv.scores[i] >= cv.scores[best]) best = i;  // ties go to the larger lambda
    cv.lambda = grid[best];
    return cv;
}

struct ConfusionMatrix {
    // rows: kNN flagged yes/no; columns: logit above threshold yes/no
    size_t both = 0, knn_only = 0, logit_only = 0, neither = 0;
};

struct LogitFlags {
    std::vector<size_t> new_rows;   // above threshold, not excluded
    ConfusionMatrix vs_knn;         // over rows not in the licensed set
};

inline LogitFlags flag_by_threshold(const Eigen::VectorXd& probs, double threshold, const std::set<size_t>& exclude,
                                    const std::set<size_t>& knn_flagged = {}, const std::set<size_t>& licensed = {}) {
    LogitFlags out;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        auto r = static_cast<size_t>(i);
        bool above = probs(i) > threshold;
        if (above && !exclude.count(r)) out.new_rows.push_back(r);
        if (licensed.count(r)) continue;
        bool nn = knn_flagged.count(r) > 0;
        if (nn && above) ++out.vs_knn.both;
        else if (nn) ++out.vs_knn.knn_only;
        else if (above) ++out.vs_knn.logit_only;
        else ++out.vs_knn.neither;
    }
    return out;
}

struct CoefficientInterval {
    std::string name;
    double estimate = 0;
    double ci_low = 0;
    double ci_high = 0;
    bool significant = false;  // CI excludes 0
};

// Percentile bootstrap with class-stratified resampling (each replicate keeps
// the class counts, so every refit has both classes). Index 0 is the intercept.
inline std::vector<CoefficientInterval> coefficient_bootstrap(const TrainingSet& ts, const LogitConfig& cfg,
                                                              size_t n_boot, uint64_t seed,
                                                              const std::vector<std::string>& names = {},
                                                              double level = 0.95) {
    auto base = fit_logit(ts, cfg);
    const auto p = base.weights.size();
    std::vector<std::vector<double>> draws(static_cast<size_t>(p));
    std::uniform_int_distribution<size_t> pick(0, ts.size() - 1);
    std::vector<size_t> rows(ts.size());
    for (size_t b = 0; b < n_boot; ++b) {
        std::mt19937_64 rng(sub_seed(seed, b));
        // Unstratified so the class balance varies; single-class draws are redrawn.
        size_t n_pos = 0;
        do {
            n_pos = 0;
            for (auto& r : rows) {
                r = pick(rng);
                n_pos += ts.y(static_cast<Eigen::Index>(r)) > 0.5;
            }
        } while (n_pos == 0 || n_pos == rows.size());
        auto m = fit_logit(ts.subset(rows), cfg);
        for (Eigen::Index j = 0; j < p; ++j) draws[static_cast<size_t>(j)].push_back(m.weights(j));
    }
    std::vector<CoefficientInterval> out;
    for (Eigen::Index j = 0; j < p; ++j) {
        auto& d = draws[static_cast<size_t>(j)];
        std::sort(d.begin(), d.end());
        CoefficientInterval ci;
        ci.name = j == 0 ? "intercept" : (static_cast<size_t>(j) <= names.size() ? names[static_cast<size_t>(j - 1)] : "w" + std::to_string(j));
        ci.estimate = base.weights(j);
        if (!d.empty()) {
            ci.ci_low = quantile_sorted(d, (1 - level) / 2);
            ci.ci_high = quantile_sorted(d, 1 - (1 - level) / 2);
        }
        ci.significant = ci.ci_low > 0 || ci.ci_high < 0;
        out.push_back(ci);
    }
    return out;
}

// flags_logit.csv: director_id,probability,flagged_new
inline void write_logit_flags_csv(std::ostream& out, const Eigen::VectorXd& probs, const std::vector<size_t>& new_rows,
                                  const std::vector<std::string>& director_ids) {
    std::set<size_t> fresh(new_rows.begin(), new_rows.end());
    csv::write_row(out, {"director_id", "probability", "flagged_new"});
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        csv::write_row(out, {director_ids.at(static_cast<size_t>(i)), csv::format_double(probs(i)),
                             fresh.count(static_cast<size_t>(i)) ? "1" : "0"});
}

} // namespace nomscreen
