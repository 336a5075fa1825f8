#pragma once

// Stage orchestration over a JSON master config. Every stage writes its
// artifacts into output_dir before the next one starts, so a failed run keeps
// the outputs of the stages that completed. Stages run their predecessors on
// demand.
//
//   ingest       ingest_report.json, rejections.jsonl
//   build-graph  nodes.jsonl, edges.jsonl, graph_report.json
//   population   population.jsonl, population_report.json
//   features     features.csv, features_standardized.csv, features_robust.csv, scaling.json
//   flag-knn     flags_nn.csv, knn_report.json
//   fit-logit    model.json, flags_logit.csv, logit_report.json
//   sample       queues.json, sample_report.json
//   estimate     estimate.json
//   robustness   robustness.json
//   report       group_means.json, evaluation.json (when labels are configured)

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/annotation.hpp"
#include "nomscreen/common.hpp"
#include "nomscreen/estimator.hpp"
#include "nomscreen/features.hpp"
#include "nomscreen/graph.hpp"
#include "nomscreen/knn.hpp"
#include "nomscreen/logit.hpp"
#include "nomscreen/offshore.hpp"
#include "nomscreen/population.hpp"
#include "nomscreen/registry.hpp"
#include "nomscreen/robustness.hpp"
#include "nomscreen/synth.hpp"

namespace nomscreen {

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Sub-seed streams derived from the master seed.
namespace seed_stream {
inline constexpr uint64_t folds = 1;
inline constexpr uint64_t bootstrap = 2;
inline constexpr uint64_t sample_nn = 3;
inline constexpr uint64_t sample_logit = 4;
inline constexpr uint64_t monte_carlo = 5;
inline constexpr uint64_t group_means = 6;
inline constexpr uint64_t robustness = 7;
} // namespace seed_stream

struct PipelineConfig {
    std::filesystem::path companies, directorships, events, register_file;
    std::optional<std::filesystem::path> postcode_lookup, ofc_countries, codebook, labels;
    std::optional<std::filesystem::path> leaks_addresses, leaks_companies, leaks_officers;
    std::filesystem::path annotations;  // event log; default output_dir/annotations.jsonl
    std::filesystem::path output_dir = "out";
    uint64_t seed = 0;

    PopulationConfig population;
    FeatureConfig features;
    FlagConfig knn;
    LogitConfig logit;
    std::vector<double> lambda_grid = default_lambda_grid();
    size_t folds = 5;
    double logit_threshold = 0.01;
    size_t bootstrap = 0;  // coefficient bootstrap replicates; 0 skips
    size_t sample_size = 100;
    EstimateSettings estimate;
    RobustnessConfig robustness;
    size_t group_means_bootstrap = 1000;

    // Relative paths resolve against base_dir (the config file's directory).
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
        PipelineConfig c;
        auto path = [&](const std::string& s) {
            std::filesystem::path p(s);
            return p.is_absolute() ? p : base_dir / p;
        };
        const auto& in = j.at("inputs");
        auto required = [&](const char* key) {
            if (!in.contains(key)) throw Error(std::string("config: missing inputs.") + key);
            return path(in.at(key).get<std::string>());
        };
        auto optional = [&](const char* key) -> std::optional<std::filesystem::path> {
            if (!in.contains(key) || in.at(key).is_null()) return std::nullopt;
            return path(in.at(key).get<std::string>());
        };
        c.companies = required("companies");
        c.directorships = required("directorships");
        c.events = required("events");
        c.register_file = required("register");
        c.postcode_lookup = optional("postcode_lookup");
        c.ofc_countries = optional("ofc_countries");
        c.codebook = optional("codebook");
        c.labels = optional("labels");
        c.leaks_addresses = optional("leaks_addresses");
        c.leaks_companies = optional("leaks_companies");
        c.leaks_officers = optional("leaks_officers");
        c.output_dir = path(j.value("output_dir", std::string("out")));
        c.annotations = j.contains("annotations") ? path(j.at("annotations").get<std::string>())
                                                  : c.output_dir / "annotations.jsonl";
        c.seed = j.value("seed", c.seed);

        if (j.contains("population")) {
            const auto& p = j.at("population");
            c.population.name_threshold = p.value("name_threshold", c.population.name_threshold);
            c.population.strict_thresholds = p.value("strict_thresholds", c.population.strict_thresholds);
            c.population.register_address_share = p.value("register_address_share", c.population.register_address_share);
            c.population.register_codirector_share = p.value("register_codirector_share", c.population.register_codirector_share);
            c.population.augmented_address_share = p.value("augmented_address_share", c.population.augmented_address_share);
            c.population.augmented_codirector_share = p.value("augmented_codirector_share", c.population.augmented_codirector_share);
            if (p.contains("excluded_divisions")) c.population.excluded_divisions = p.at("excluded_divisions").get<std::set<int>>();
            c.population.eligibility.min_positions = p.value("min_positions", c.population.eligibility.min_positions);
            c.population.eligibility.count_previous = p.value("count_previous", c.population.eligibility.count_previous);
        }
        if (j.contains("features")) c.features = FeatureConfig::from_json(j.at("features"));
        if (j.contains("knn")) {
            c.knn.k = j.at("knn").value("k", c.knn.k);
            c.knn.min_support = j.at("knn").value("min_support", c.knn.min_support);
        }
        if (j.contains("logit")) {
            const auto& l = j.at("logit");
            c.logit_threshold = l.value("threshold", c.logit_threshold);
            c.folds = l.value("folds", c.folds);
            c.bootstrap = l.value("bootstrap", c.bootstrap);
            c.logit.penalize_intercept = l.value("penalize_intercept", c.logit.penalize_intercept);
            c.logit.balance_classes = l.value("balance_classes", c.logit.balance_classes);
            if (l.contains("lambda_grid")) c.lambda_grid = l.at("lambda_grid").get<std::vector<double>>();
        }
        if (j.contains("sample")) c.sample_size = j.at("sample").value("n", c.sample_size);
        if (j.contains("estimate")) {
            c.estimate.n_mc = j.at("estimate").value("n_mc", c.estimate.n_mc);
            c.estimate.single_coder = j.at("estimate").value("single_coder", c.estimate.single_coder);
        }
        if (j.contains("robustness")) {
            const auto& r = j.at("robustness");
            c.robustness.n_runs = r.value("n_runs", c.robustness.n_runs);
            c.robustness.fraction = r.value("fraction", c.robustness.fraction);
            if (r.contains("min_supports")) c.robustness.min_supports = r.at("min_supports").get<std::vector<size_t>>();
            if (r.contains("metric")) c.robustness.metric = parse_agreement_metric(r.at("metric").get<std::string>());
        }
        c.group_means_bootstrap = j.value("group_means_bootstrap", c.group_means_bootstrap);
        c.set_seed(c.seed);
        c.robustness.k = c.knn.k;
        return c;
    }

    // Master seed plus the seeds derived from it.
    void set_seed(uint64_t s) {
        seed = s;
        estimate.seed = sub_seed(s, seed_stream::monte_carlo);
        robustness.seed = sub_seed(s, seed_stream::robustness);
    }

    static PipelineConfig load(const std::filesystem::path& file) {
        std::ifstream in(file);
        if (!in) throw Error("cannot open config: " + file.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error("invalid config " + file.string() + ": " + e.what());
        }
        return from_json(j, file.parent_path());
    }
};

// Config pointing at a bundle written by SynthBundle::write.
inline nlohmann::json synthetic_bundle_config(const std::filesystem::path& bundle_dir,
                                              const std::filesystem::path& output_dir, uint64_t seed) {
    auto p = [&](const char* f) { return (bundle_dir / f).string(); };
    return {{"inputs",
             {{"companies", p("companies.csv")},
              {"directorships", p("directorships.csv")},
              {"events", p("events.csv")},
              {"register", p("register.csv")},
              {"postcode_lookup", p("postcode_lookup.csv")},
              {"leaks_addresses", p("leaks_addresses.txt")},
              {"leaks_companies", p("leaks_companies.txt")},
              {"leaks_officers", p("leaks_officers.txt")},
              {"labels", p("labels.csv")}}},
            {"output_dir", output_dir.string()},
            {"seed", seed}};
}

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {}
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    const PipelineConfig& config() const { return cfg_; }

    void ingest() {
        stage("ingest", [&] {
            auto companies = open_input(cfg_.companies);
            auto directorships = open_input(cfg_.directorships);
            auto events = open_input(cfg_.events);
            registry_ = parse_registry(companies, directorships, events);
            const auto& r = registry_->report;
            write_json("ingest_report.json",
                       {{"companies_accepted", r.companies_accepted},
                        {"directorships_accepted", r.directorships_accepted},
                        {"events_accepted", r.events_accepted},
                        {"rejected", {{"companies", r.rejected("companies")},
                                      {"directorships", r.rejected("directorships")},
                                      {"events", r.rejected("events")}}}});
            auto out = open_output("rejections.jsonl");
            r.write_jsonl(out);
        });
    }

    void build_graph() {
        if (!registry_) ingest();
        stage("build-graph", [&] {
            graph_.emplace(EntityGraph::build(*registry_));
            {
                auto out = open_output("nodes.jsonl");
                graph_->write_nodes_jsonl(out);
            }
            {
                auto out = open_output("edges.jsonl");
                graph_->write_edges_jsonl(out);
            }
            const auto& rep = graph_->report();
            write_json("graph_report.json",
                       {{"directors", graph_->directors().size()},
                        {"companies", graph_->companies().size()},
                        {"addresses", graph_->addresses().size()},
                        {"owners", graph_->owners().size()},
                        {"directorships", graph_->directorships().size()},
                        {"dropped_directorships", rep.dropped_directorships},
                        {"dropped_events", rep.dropped_events},
                        {"inconsistent_director_names", rep.inconsistent_director_names},
                        {"previous_addresses",
                         {{"marked_events", rep.previous_addresses.marked_events},
                          {"parsed", rep.previous_addresses.parsed},
                          {"unparseable", rep.previous_addresses.unparseable}}}});
        });
    }

    void population() {
        if (!graph_) build_graph();
        stage("population", [&] {
            PostcodeLookup lookup;
            if (cfg_.postcode_lookup) {
                auto in = open_input(*cfg_.postcode_lookup);
                lookup = PostcodeLookup::load(in);
            }
            auto in = open_input(cfg_.register_file);
            RegisterParseReport rr;
            auto reg = parse_register(in, cfg_.postcode_lookup ? &lookup : nullptr, &rr);
            population_.emplace(build_population(reg, *graph_, cfg_.population));
            {
                auto out = open_output("population.jsonl");
                population_->write_jsonl(out, *graph_);
            }
            nlohmann::json unmatched = nlohmann::json::array();
            for (auto e : population_->report.unmatched_entries) unmatched.push_back(reg.entries[e].csp_name);
            nlohmann::json rejected = nlohmann::json::array();
            for (const auto& r : rr.rejections) rejected.push_back({{"line", r.line}, {"reason", r.reason}});
            write_json("population_report.json",
                       {{"register_entries", reg.entries.size()},
                        {"licensed", population_->licensed.size()},
                        {"matched_id", population_->count(Provenance::MatchedId)},
                        {"name_match", population_->count(Provenance::NameMatch)},
                        {"employee_of_csp", population_->count(Provenance::EmployeeOfCsp)},
                        {"affiliated", population_->count(Provenance::Affiliated)},
                        {"negatives", population_->negatives.size()},
                        {"csp_addresses", population_->csp_addresses.size()},
                        {"unmatched_entries", unmatched},
                        {"register_rejections", rejected}});
        });
    }

    void features() {
        if (!population_) population();
        stage("features", [&] {
            load_leaks();
            auto fcfg = cfg_.features;
            if (cfg_.ofc_countries) {
                auto in = open_input(*cfg_.ofc_countries);
                fcfg.ofc_countries = load_country_list(in);
            }
            context_ = std::make_unique<FeatureContext>(*graph_, *population_, *leaks_, fcfg);
            auto eligible = eligible_directors(*graph_, cfg_.population.eligibility);
            raw_ = compute_feature_matrix(*context_, eligible);
            auto [z, stats] = standardize(raw_);
            standardized_ = std::move(z);
            stats_ = std::move(stats);
            robust_ = robust_normalize(raw_, &stats_);
            licensed_rows_.clear();
            negative_rows_.clear();
            for (size_t i = 0; i < raw_.rows.size(); ++i) {
                if (population_->is_licensed(raw_.rows[i])) licensed_rows_.insert(i);
                if (population_->negatives.count(raw_.rows[i])) negative_rows_.insert(i);
            }
            write_matrix("features.csv", raw_);
            write_matrix("features_standardized.csv", standardized_);
            write_matrix("features_robust.csv", robust_);
            write_json("scaling.json", stats_.to_json());
        });
    }

    void flag_knn() {
        if (!context_) features();
        stage("flag-knn", [&] {
            KdTree index(standardized_.values);
            knn_ = flag_candidates(index, licensed_rows_, cfg_.knn);
            knn_flagged_.clear();
            size_t recovered = 0;
            for (const auto& r : knn_) {
                if (r.flagged) knn_flagged_.insert(r.row);
                if (r.is_licensed && r.support >= cfg_.knn.min_support) ++recovered;
            }
            {
                auto out = open_output("flags_nn.csv");
                write_flags_csv(out, knn_, raw_.director_ids);
            }
            std::vector<size_t> thresholds;
            for (size_t t = 1; t <= 20; ++t) thresholds.push_back(t);
            nlohmann::json curve = nlohmann::json::array();
            for (const auto& p : false_negative_curve(knn_, thresholds))
                curve.push_back({{"min_support", p.min_support}, {"n_kept", p.n_kept}, {"n_flagged", p.n_flagged}, {"fnr", p.fnr}});
            write_json("knn_report.json",
                       {{"k", cfg_.knn.k}, {"min_support", cfg_.knn.min_support}, {"eligible", raw_.n_rows()},
                        {"licensed", licensed_rows_.size()}, {"flagged", knn_flagged_.size()},
                        {"licensed_recovered", recovered}, {"false_negative_curve", curve}});
        });
    }

    void fit_logit() {
        if (knn_.empty()) flag_knn();
        stage("fit-logit", [&] {
            // Positives: licensed plus annotated CSPs from the event log.
            auto positives = licensed_rows_;
            size_t annotated = 0;
            auto state = annotation_state();
            for (size_t i = 0; i < raw_.n_rows(); ++i)
                if (!positives.count(i) && state.label(raw_.director_ids[i], cfg_.estimate.single_coder) == Label::CSP) {
                    positives.insert(i);
                    ++annotated;
                }
            std::set<size_t> negatives;
            for (auto r : negative_rows_)
                if (!positives.count(r)) negatives.insert(r);
            if (positives.empty() || negatives.empty()) throw Error("training set needs both classes");
            auto ts = make_training_set(standardized_.values, positives, negatives);
            cv_ = cross_validate_lambda(ts, cfg_.lambda_grid, cfg_.folds, sub_seed(cfg_.seed, seed_stream::folds), cfg_.logit);
            auto lcfg = cfg_.logit;
            lcfg.lambda = cv_.lambda;
            model_ = nomscreen::fit_logit(ts, lcfg);
            model_.columns = raw_.columns;
            model_.scaling = stats_;
            probs_ = predict_proba(model_, standardized_.values);
            std::set<size_t> exclude = licensed_rows_;
            exclude.insert(knn_flagged_.begin(), knn_flagged_.end());
            logit_flags_ = flag_by_threshold(probs_, cfg_.logit_threshold, exclude, knn_flagged_, licensed_rows_);
            write_json("model.json", model_.to_json());
            {
                auto out = open_output("flags_logit.csv");
                write_logit_flags_csv(out, probs_, logit_flags_.new_rows, raw_.director_ids);
            }
            nlohmann::json rep = {
                {"lambda", cv_.lambda}, {"lambda_grid", cv_.grid}, {"cv_scores", cv_.scores}, {"cv_attempts", cv_.attempts},
                {"positives", positives.size()}, {"annotated_positives", annotated}, {"negatives", negatives.size()},
                {"threshold", cfg_.logit_threshold}, {"flagged_new", logit_flags_.new_rows.size()},
                {"iterations", model_.iterations}, {"final_loss", model_.final_loss},
                {"confusion_vs_knn",
                 {{"both", logit_flags_.vs_knn.both}, {"knn_only", logit_flags_.vs_knn.knn_only},
                  {"logit_only", logit_flags_.vs_knn.logit_only}, {"neither", logit_flags_.vs_knn.neither}}}};
            if (cfg_.bootstrap > 0) {
                nlohmann::json coef = nlohmann::json::array();
                for (const auto& c : coefficient_bootstrap(ts, lcfg, cfg_.bootstrap, sub_seed(cfg_.seed, seed_stream::bootstrap), raw_.columns))
                    coef.push_back({{"name", c.name}, {"estimate", c.estimate}, {"ci95", {c.ci_low, c.ci_high}}, {"significant", c.significant}});
                rep["coefficients"] = coef;
            }
            write_json("logit_report.json", rep);
            logit_done_ = true;
        });
    }

    void sample() {
        if (!logit_done_) fit_logit();
        stage("sample", [&] {
            std::vector<std::string> nn_candidates, above;
            std::set<std::string> nn_ids, licensed_ids;
            for (auto r : knn_flagged_) {
                nn_candidates.push_back(raw_.director_ids[r]);
                nn_ids.insert(raw_.director_ids[r]);
            }
            for (auto r : licensed_rows_) licensed_ids.insert(raw_.director_ids[r]);
            for (Eigen::Index i = 0; i < probs_.size(); ++i)
                if (probs_(i) > cfg_.logit_threshold) above.push_back(raw_.director_ids[static_cast<size_t>(i)]);
            auto logit_pool = logit_candidates(above, nn_ids, licensed_ids);
            auto nn = sample_for_annotation(nn_candidates, cfg_.sample_size, sub_seed(cfg_.seed, seed_stream::sample_nn));
            auto lg = sample_for_annotation(logit_pool, cfg_.sample_size, sub_seed(cfg_.seed, seed_stream::sample_logit));
            queues_ = {{Source::NN, nn.queue, nn_candidates.size()}, {Source::LOGIT, lg.queue, logit_pool.size()}};
            nlohmann::json q = nlohmann::json::array();
            for (const auto& x : queues_) q.push_back(x.to_json());
            write_json("queues.json", q);
            write_json("sample_report.json",
                       {{"nn", {{"candidates", nn_candidates.size()}, {"sampled", nn.queue.size()}, {"short_population", nn.short_population}}},
                        {"logit", {{"candidates", logit_pool.size()}, {"sampled", lg.queue.size()}, {"short_population", lg.short_population}}}});
        });
    }

    // Uses whatever labels the event log holds; unlabeled queue entries are
    // reported as pending and left out of the counts.
    void estimate() {
        if (queues_.empty()) sample();
        stage("estimate", [&] {
            auto state = annotation_state();
            std::vector<AnnotationCounts> per_source;
            nlohmann::json pending = nlohmann::json::object();
            for (const auto& q : queues_) {
                auto qc = queue_counts(q, state, cfg_.estimate.single_coder);
                per_source.push_back(qc.counts);
                pending[to_string(q.source)] = qc.pending;
            }
            auto j = estimate_json(per_source, cfg_.estimate);
            j["pending"] = pending;
            j["seed"] = cfg_.estimate.seed;
            j["market_share"] = market_share_json(per_source, state);
            j["extrapolation"] = extrapolation_json(per_source);
            estimate_ = j;
            write_json("estimate.json", j);
        });
    }

    void robustness() {
        if (!context_) features();
        stage("robustness", [&] {
            auto rep = robustness_sweep(raw_, licensed_rows_, cfg_.robustness);
            write_json("robustness.json", rep.to_json(cfg_.robustness));
        });
    }

    // Group means on robust-normalized features; planted-label recall when a
    // labels file is configured (evaluation only).
    void report() {
        if (!logit_done_) fit_logit();
        stage("report", [&] {
            std::map<std::string, std::vector<size_t>> groups;
            std::set<size_t> logit_new(logit_flags_.new_rows.begin(), logit_flags_.new_rows.end());
            for (size_t i = 0; i < raw_.n_rows(); ++i) {
                const char* g = licensed_rows_.count(i) ? "licensed"
                                : knn_flagged_.count(i) ? "flagged_nn"
                                : logit_new.count(i)    ? "flagged_logit"
                                                        : "other";
                groups[g].push_back(i);
            }
            auto gm = group_means(robust_, groups, sub_seed(cfg_.seed, seed_stream::group_means), cfg_.group_means_bootstrap);
            nlohmann::json means = nlohmann::json::array();
            for (const auto& m : gm.means)
                means.push_back({{"group", m.group}, {"feature", m.feature}, {"mean", m.mean}, {"ci95", {m.ci_low, m.ci_high}}, {"n", m.n}});
            write_json("group_means.json", {{"means", means}, {"warnings", gm.warnings}});
            if (cfg_.labels) write_json("evaluation.json", evaluation());
        });
    }

    void run_all(bool with_robustness = true) {
        ingest();
        build_graph();
        population();
        features();
        flag_knn();
        fit_logit();
        sample();
        estimate();
        if (with_robustness) robustness();
        report();
    }

    // Planted-label recovery (labels file configured).
    nlohmann::json evaluation() const {
        auto in = open_input(*cfg_.labels);
        auto labels = read_labels(in);
        size_t licensed = 0, licensed_recovered = 0, illegal = 0, illegal_flagged = 0, background = 0, background_flagged = 0;
        std::map<std::string, std::pair<size_t, size_t>> by_profile;
        for (const auto& l : labels) {
            auto row = raw_.row_of(l.director_id);
            bool flagged = row && knn_flagged_.count(*row);
            if (l.label == "licensed") {
                ++licensed;
                licensed_recovered += row && knn_[*row].is_licensed && knn_[*row].support >= cfg_.knn.min_support;
            } else if (l.label == "illegal") {
                ++illegal;
                illegal_flagged += flagged;
                auto& p = by_profile[l.profile];
                ++p.first;
                p.second += flagged;
            } else {
                ++background;
                background_flagged += flagged;
            }
        }
        auto rate = [](size_t a, size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
        nlohmann::json profiles = nlohmann::json::object();
        for (const auto& [p, n] : by_profile) profiles[p] = {{"planted", n.first}, {"flagged", n.second}, {"recall", rate(n.second, n.first)}};
        return {{"licensed_planted", licensed}, {"licensed_self_support", licensed_recovered},
                {"licensed_recall", rate(licensed_recovered, licensed)},
                {"illegal_planted", illegal}, {"illegal_flagged", illegal_flagged}, {"illegal_recall", rate(illegal_flagged, illegal)},
                {"illegal_by_profile", profiles},
                {"background_flagged", background_flagged}, {"background_flag_rate", rate(background_flagged, background)}};
    }

    // Console payload for one director; nullopt for unknown ids.
    std::optional<nlohmann::json> director_payload(const std::string& id) const {
        if (!graph_) return std::nullopt;
        auto d = graph_->director(id);
        if (!d) return std::nullopt;
        const auto& g = *graph_;
        auto e = ego(g, *d);
        nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
        auto director_node = [&](NodeIndex x) {
            const auto& dn = g.directors()[x];
            return nlohmann::json{{"id", EntityGraph::node_id('D', dn.id)}, {"type", "director"}, {"label", dn.name},
                                  {"corporate", dn.is_corporate()}, {"center", x == *d},
                                  {"licensed", population_ && population_->is_licensed(x)}};
        };
        nodes.push_back(director_node(*d));
        for (auto c : e.co_directors) nodes.push_back(director_node(c));
        std::set<NodeIndex> companies(e.companies.begin(), e.companies.end());
        for (auto de : e.directorship_edges) companies.insert(g.directorships()[de].company);
        nlohmann::json leaked_companies = nlohmann::json::array(), leaked_addresses = nlohmann::json::array();
        for (auto c : companies) {
            const auto& cr = g.companies()[c];
            bool leak = context_ && context_->company_in_leaks(c);
            if (leak) leaked_companies.push_back(cr.company_id);
            nodes.push_back({{"id", EntityGraph::node_id('C', cr.company_id)}, {"type", "company"}, {"label", cr.name},
                             {"legal_form", cr.legal_form.label()}, {"nace", cr.nace.value_or("")}, {"offshore_leak", leak}});
        }
        for (auto a : e.addresses) {
            const auto& ak = g.addresses()[a];
            bool leak = context_ && context_->address_in_leaks(a);
            if (leak) leaked_addresses.push_back(ak.id());
            bool csp = population_ && population_->csp_addresses.count(ak);
            nodes.push_back({{"id", EntityGraph::node_id('A', ak.id())}, {"type", "address"},
                             {"label", str::trim(ak.street + " " + ak.street_number + ", " + ak.postcode + " " + ak.city)},
                             {"csp_address", csp}, {"offshore_leak", leak}});
        }
        for (auto o : e.owners) {
            const auto& on = g.owners()[o];
            nodes.push_back({{"id", EntityGraph::node_id('O', on.id)}, {"type", "owner"}, {"label", on.id},
                             {"country", on.country.value_or("")}});
        }
        for (auto de : e.directorship_edges) edges.push_back(g.directorship_json(g.directorships()[de]));
        for (auto le : e.located_edges) edges.push_back(g.located_json(g.located()[le]));
        for (const auto& oe : e.owned_edges) edges.push_back(g.owned_json(oe));

        nlohmann::json j{{"director_id", id}, {"name", g.directors()[*d].name},
                         {"corporate", g.directors()[*d].is_corporate()}, {"nodes", nodes}, {"edges", edges}};
        auto row = raw_.row_of(id);
        if (row) {
            nlohmann::json feats = nlohmann::json::array();
            for (size_t c = 0; c < raw_.columns.size(); ++c) {
                auto i = static_cast<Eigen::Index>(*row);
                auto jc = static_cast<Eigen::Index>(c);
                feats.push_back({{"name", raw_.columns[c]}, {"raw", raw_.values(i, jc)}, {"robust", robust_.values(i, jc)}});
            }
            j["features"] = feats;
        } else {
            j["features"] = nullptr;
        }
        nlohmann::json flags;
        if (population_ && population_->is_licensed(*d)) {
            const auto& le = population_->licensed.at(*d);
            flags["licensed"] = {{"provenance", to_string(le.provenance)}};
            if (le.criterion) flags["licensed"]["criterion"] = to_string(*le.criterion);
        } else {
            flags["licensed"] = nullptr;
        }
        if (row && !knn_.empty()) flags["nn"] = {{"support", knn_[*row].support}, {"flagged", knn_[*row].flagged}};
        else flags["nn"] = nullptr;
        if (row && logit_done_) {
            bool fresh = std::binary_search(logit_flags_.new_rows.begin(), logit_flags_.new_rows.end(), *row);
            flags["logit"] = {{"probability", probs_(static_cast<Eigen::Index>(*row))}, {"flagged_new", fresh}};
        } else {
            flags["logit"] = nullptr;
        }
        j["flags"] = flags;
        j["offshore"] = {{"officer", context_ && context_->director_in_leaks(*d)},
                         {"companies", leaked_companies},
                         {"addresses", leaked_addresses}};
        return j;
    }

    std::string codebook_text() const {
        if (!cfg_.codebook) return "";
        auto in = open_input(*cfg_.codebook);
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }

    const EntityGraph& graph() const { return require(graph_, "graph"); }
    const CspPopulation& csp_population() const { return require(population_, "population"); }
    const FeatureMatrix& raw_features() const { return raw_; }
    const FeatureMatrix& standardized_features() const { return standardized_; }
    const FeatureMatrix& robust_features() const { return robust_; }
    const std::set<size_t>& licensed_rows() const { return licensed_rows_; }
    const std::set<size_t>& negative_rows() const { return negative_rows_; }
    const std::vector<FlagResult>& knn_results() const { return knn_; }
    const std::set<size_t>& knn_flagged() const { return knn_flagged_; }
    const LogitModel& model() const { return model_; }
    const LogitFlags& logit_flags() const { return logit_flags_; }
    const std::vector<AnnotationQueue>& queues() const { return queues_; }
    const nlohmann::json& estimate_result() const { return estimate_; }

private:
    template <class T>
    static const T& require(const std::optional<T>& v, const char* what) {
        if (!v) throw Error(std::string(what) + " not built");
        return *v;
    }

    template <class Fn>
    void stage(const char* name, Fn&& fn) {
        try {
            std::filesystem::create_directories(cfg_.output_dir);
            fn();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    }

    static std::ifstream open_input(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw Error("cannot open input file: " + p.string());
        return in;
    }

    std::ofstream open_output(const char* name) const {
        std::ofstream out(cfg_.output_dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (cfg_.output_dir / name).string());
        return out;
    }

    void write_json(const char* name, const nlohmann::json& j) const {
        auto out = open_output(name);
        out << j.dump(2) << '\n';
    }

    void write_matrix(const char* name, const FeatureMatrix& m) const {
        auto out = open_output(name);
        m.write_csv(out);
    }

    void load_leaks() {
        leaks_.emplace();
        auto load = [&](const std::optional<std::filesystem::path>& p, LeakKind kind) {
            if (!p) return;
            auto in = open_input(*p);
            leaks_->load(kind, in);
        };
        load(cfg_.leaks_addresses, LeakKind::Address);
        load(cfg_.leaks_companies, LeakKind::Company);
        load(cfg_.leaks_officers, LeakKind::Officer);
        leaks_->finalize();
    }

    AnnotationState annotation_state() const {
        AnnotationState s;
        if (!std::filesystem::exists(cfg_.annotations)) return s;
        auto in = open_input(cfg_.annotations);
        for (const auto& r : AnnotationLog::replay(in)) s.apply(r);
        return s;
    }

    struct DirectorTally {
        size_t positions = 0;
        std::set<NodeIndex> companies;
        std::set<std::string> independent;
    };

    DirectorTally tally(NodeIndex d) const {
        DirectorTally t;
        auto e = ego(*graph_, d);
        for (auto de : graph_->positions_of(d)) t.positions += graph_->directorships()[de].status == Status::Current;
        t.companies.insert(e.companies.begin(), e.companies.end());
        t.independent = independent_companies(*graph_, e);
        return t;
    }

    nlohmann::json market_share_json(const std::vector<AnnotationCounts>& per_source, const AnnotationState& state) const {
        MarketTallies mt;
        std::set<NodeIndex> lic_companies;
        std::set<std::string> lic_independent;
        for (const auto& [d, entry] : population_->licensed) {
            auto t = tally(d);
            ++mt.licensed_directors;
            mt.licensed_positions += static_cast<double>(t.positions);
            lic_companies.insert(t.companies.begin(), t.companies.end());
            lic_independent.insert(t.independent.begin(), t.independent.end());
        }
        mt.licensed_companies = static_cast<double>(lic_companies.size());
        mt.licensed_independent = static_cast<double>(lic_independent.size());

        // Per-director tallies of the flagged sample's confirmed CSPs, or of the
        // whole sample while nothing is confirmed.
        std::vector<std::string> basis;
        for (const auto& q : queues_)
            for (const auto& id : q.directors)
                if (state.label(id, cfg_.estimate.single_coder) == Label::CSP) basis.push_back(id);
        const char* basis_name = "confirmed_csp";
        if (basis.empty()) {
            basis_name = "sample";
            for (const auto& q : queues_) basis.insert(basis.end(), q.directors.begin(), q.directors.end());
        }
        for (const auto& id : basis) {
            auto t = tally(*graph_->director(id));
            mt.sample_positions.push_back(static_cast<double>(t.positions));
            mt.sample_companies.push_back(static_cast<double>(t.companies.size()));
            mt.sample_independent.push_back(static_cast<double>(t.independent.size()));
        }
        std::vector<PosteriorEstimate> posts;
        for (const auto& c : per_source) posts.push_back(beta_posterior(c));
        auto comb = combine(posts, cfg_.estimate.n_mc, cfg_.estimate.seed);
        nlohmann::json shares = nlohmann::json::array();
        for (const auto& s : market_share(comb.draws, mt)) shares.push_back(s.to_json());
        return {{"tally_basis", basis_name}, {"basis_directors", basis.size()},
                {"licensed", {{"directors", mt.licensed_directors}, {"positions", mt.licensed_positions},
                              {"companies", mt.licensed_companies}, {"independent_companies", mt.licensed_independent}}},
                {"shares", shares}};
    }

    // Fractions by number of independent companies managed, k = 1..10.
    nlohmann::json extrapolation_json(const std::vector<AnnotationCounts>& per_source) const {
        std::map<int, double> population_at, nn_at, licensed_at;
        std::set<NodeIndex> nn_dirs;
        for (auto r : knn_flagged_) nn_dirs.insert(raw_.rows[r]);
        for (NodeIndex d = 0; d < graph_->directors().size(); ++d) {
            auto k = static_cast<int>(independent_companies(*graph_, ego(*graph_, d)).size());
            if (k < 1 || k > 10) continue;
            population_at[k] += 1;
            if (nn_dirs.count(d)) nn_at[k] += 1;
            if (population_->is_licensed(d)) licensed_at[k] += 1;
        }
        auto fractions = [&](const std::map<int, double>& hits) {
            std::vector<KFraction> v;
            for (const auto& [k, n] : population_at) {
                auto it = hits.find(k);
                v.push_back({k, n, it == hits.end() ? 0.0 : it->second / n});
            }
            return v;
        };
        nlohmann::json j;
        nlohmann::json pop = nlohmann::json::object();
        for (const auto& [k, n] : population_at) pop[std::to_string(k)] = n;
        j["population_at"] = pop;
        const AnnotationCounts* nn = nullptr;
        for (const auto& c : per_source)
            if (c.source == Source::NN) nn = &c;
        if (!nn || nn->tp + nn->fp == 0) {
            j["status"] = "no NN annotations";
            return j;
        }
        double tp_rate = static_cast<double>(nn->tp) / static_cast<double>(nn->tp + nn->fp);
        j["tp_rate"] = tp_rate;
        try {
            auto upper = extrapolate_small(fractions(nn_at), tp_rate, population_at, BoundLabel::UpperBound);
            j["upper"] = upper.to_json();
            std::vector<std::pair<double, double>> lic;
            for (const auto& f : fractions(licensed_at)) lic.emplace_back(f.k, f.fraction);
            auto slope = fit_log_log(lic).first;
            j["lower"] = extrapolate_small(fractions(nn_at), tp_rate, population_at, BoundLabel::LowerBound, slope).to_json();
            j["status"] = "ok";
        } catch (const Error& e) {
            j["status"] = e.what();
        }
        return j;
    }

    PipelineConfig cfg_;
    std::optional<Registry> registry_;
    std::optional<EntityGraph> graph_;
    std::optional<CspPopulation> population_;
    std::optional<OffshoreLeaksIndex> leaks_;
    std::unique_ptr<FeatureContext> context_;
    FeatureMatrix raw_, standardized_, robust_;
    ScalingStats stats_;
    std::set<size_t> licensed_rows_, negative_rows_, knn_flagged_;
    std::vector<FlagResult> knn_;
    CrossValidation cv_;
    LogitModel model_;
    Eigen::VectorXd probs_;
    LogitFlags logit_flags_;
    bool logit_done_ = false;
    std::vector<AnnotationQueue> queues_;
    nlohmann::json estimate_;
};

} // namespace nomscreen
