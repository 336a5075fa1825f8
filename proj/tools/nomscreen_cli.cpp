// Command-line driver for the screening pipeline.

#include <fstream>
#include <iostream>
#include <sstream>

#include "nomscreen/nomscreen.hpp"
#include "nomscreen/annotation_server.hpp"

#include <CLI11.hpp>

namespace ns = nomscreen;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ns::Error("cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = ns::str::trim(line);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

// "tp,fp,n" or "tp,fp,unknown,n"
ns::AnnotationCounts parse_counts(const std::string& s, ns::Source source) {
    auto parts = ns::str::split(s, ',');
    if (parts.size() != 3 && parts.size() != 4) throw ns::Error("counts must be tp,fp,n or tp,fp,unknown,n: " + s);
    std::vector<size_t> v;
    for (const auto& p : parts) {
        auto t = ns::str::trim(p);
        if (!ns::str::all_digits(t) || t.empty()) throw ns::Error("counts must be nonnegative integers: " + s);
        v.push_back(std::stoull(t));
    }
    ns::AnnotationCounts c;
    c.tp = v[0];
    c.fp = v[1];
    c.unknown = v.size() == 4 ? v[2] : 0;
    c.n_candidates = v.back();
    c.source = source;
    return c;
}

// "k,n_directors,fraction" rows with a header.
std::vector<ns::KFraction> read_fractions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ns::Error("cannot open " + path);
    ns::csv::Reader r(in);
    auto header = r.next();
    if (!header || header->fields != std::vector<std::string>{"k", "n_directors", "fraction"})
        throw ns::Error(path + ": expected header k,n_directors,fraction");
    std::vector<ns::KFraction> out;
    while (auto row = r.next()) {
        if (row->fields.size() != 3) throw ns::Error(path + ": wrong field count on line " + std::to_string(row->line));
        out.push_back({std::stoi(row->fields[0]), std::stod(row->fields[1]), std::stod(row->fields[2])});
    }
    return out;
}

void write_or_print(const nlohmann::json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ns::Error("cannot write " + out);
    f << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Registry screening for unlicensed corporate service providers"};
    app.require_subcommand(1);

    std::string config;
    std::optional<uint64_t> seed;
    auto pipeline_command = [&](const std::string& name, const std::string& help) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("-c,--config", config, "master config (JSON)")->required()->check(CLI::ExistingFile);
        sc->add_option("--seed", seed, "override the master seed");
        return sc;
    };

    auto* ingest = pipeline_command("ingest", "parse and validate the registry extract");
    auto* build_graph = pipeline_command("build-graph", "build the entity graph");
    auto* population = pipeline_command("population", "assemble the licensed population and negatives");
    auto* features = pipeline_command("features", "compute the feature matrix");

    std::optional<size_t> k, min_support;
    auto* flag_knn = pipeline_command("flag-knn", "nearest-neighbour flagging");
    flag_knn->add_option("--k", k, "neighbours per licensed director");
    flag_knn->add_option("--min-support", min_support, "minimum support to flag");

    std::optional<double> threshold;
    std::optional<size_t> folds, bootstrap;
    auto* fit_logit = pipeline_command("fit-logit", "penalized logistic regression");
    fit_logit->add_option("--threshold", threshold, "probability threshold for new candidates");
    fit_logit->add_option("--folds", folds, "cross-validation folds");
    fit_logit->add_option("--bootstrap", bootstrap, "coefficient bootstrap replicates (0 skips)");

    std::optional<size_t> sample_n;
    auto* sample = pipeline_command("sample", "draw annotation queues");
    sample->add_option("--n", sample_n, "directors per queue");

    auto* robustness = pipeline_command("robustness", "feature-subset robustness sweep");
    std::optional<size_t> runs;
    std::optional<double> fraction;
    std::vector<size_t> rob_supports;
    std::string metric;
    robustness->add_option("--runs", runs, "number of runs");
    robustness->add_option("--fraction", fraction, "share of features kept per run");
    robustness->add_option("--min-support", rob_supports, "min_support values");
    robustness->add_option("--metric", metric, "jaccard | overlap_of_smaller");

    auto* run_all = pipeline_command("run-all", "run every stage");
    bool skip_robustness = false;
    run_all->add_flag("--skip-robustness", skip_robustness, "leave out the robustness sweep");

    // estimate: pipeline mode (--config) or direct counts.
    auto* estimate = app.add_subcommand("estimate", "posterior estimates from annotation counts");
    std::string est_config, nn_counts, logit_counts, est_out;
    uint64_t est_seed = 0;
    size_t n_mc = 1000000;
    estimate->add_option("-c,--config", est_config, "master config; labels come from the annotation log")->check(CLI::ExistingFile);
    estimate->add_option("--nn-counts", nn_counts, "tp,fp,n or tp,fp,unknown,n");
    estimate->add_option("--logit-counts", logit_counts, "tp,fp,n or tp,fp,unknown,n");
    estimate->add_option("--seed", est_seed, "Monte Carlo seed");
    estimate->add_option("--n-mc", n_mc, "Monte Carlo draws");
    estimate->add_option("-o,--out", est_out, "output file (default stdout)");

    auto* extrapolate = app.add_subcommand("extrapolate", "log-log extrapolation to directors with one or two companies");
    std::string fractions_file, slope_file, ex_out;
    double tp_rate = 1.0;
    extrapolate->add_option("--fractions", fractions_file, "CSV k,n_directors,fraction for the flagged sample")
        ->required()->check(CLI::ExistingFile);
    extrapolate->add_option("--tp-rate", tp_rate, "true-positive rate applied to the fractions");
    extrapolate->add_option("--slope-from", slope_file, "CSV of licensed fractions; gives a LowerBound fit")->check(CLI::ExistingFile);
    extrapolate->add_option("-o,--out", ex_out, "output file (default stdout)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic registry bundle");
    std::string synth_config, synth_out, profile_mix;
    ns::SynthConfig sc;
    synth->add_option("-c,--config", synth_config, "synth config (JSON)")->check(CLI::ExistingFile);
    synth->add_option("-o,--out", synth_out, "output directory")->required();
    synth->add_option("--seed", sc.seed, "generator seed");
    synth->add_option("--n-directors", sc.n_directors, "directors");
    synth->add_option("--n-companies", sc.n_companies, "background companies");
    synth->add_option("--n-addresses", sc.n_addresses, "background addresses");
    synth->add_option("--licensed", sc.n_licensed, "planted licensed CSP directors");
    synth->add_option("--illegal", sc.n_illegal, "planted illegal CSP directors");
    synth->add_option("--profile-mix", profile_mix, "e.g. Concentrated=0.5,Frontmen=0.5");

    auto* serve = app.add_subcommand("serve", "annotation API over HTTP");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("-c,--config", config, "master config (JSON)")->required()->check(CLI::ExistingFile);
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port");

    auto* match = app.add_subcommand("match-names", "trigram TF-IDF name matching");
    std::string queries_file, targets_file;
    double name_threshold = 0.90;
    match->add_option("--queries", queries_file, "one name per line")->required()->check(CLI::ExistingFile);
    match->add_option("--targets", targets_file, "one name per line")->required()->check(CLI::ExistingFile);
    match->add_option("--threshold", name_threshold, "cosine similarity threshold");

    CLI11_PARSE(app, argc, argv);

    try {
        auto load_config = [&] {
            auto cfg = ns::PipelineConfig::load(config);
            if (seed) cfg.set_seed(*seed);
            if (k) cfg.knn.k = cfg.robustness.k = *k;
            if (min_support) cfg.knn.min_support = *min_support;
            if (threshold) cfg.logit_threshold = *threshold;
            if (folds) cfg.folds = *folds;
            if (bootstrap) cfg.bootstrap = *bootstrap;
            if (sample_n) cfg.sample_size = *sample_n;
            if (runs) cfg.robustness.n_runs = *runs;
            if (fraction) cfg.robustness.fraction = *fraction;
            if (!rob_supports.empty()) cfg.robustness.min_supports = rob_supports;
            if (!metric.empty()) cfg.robustness.metric = ns::parse_agreement_metric(metric);
            return cfg;
        };

        if (ingest->parsed()) ns::Pipeline(load_config()).ingest();
        else if (build_graph->parsed()) ns::Pipeline(load_config()).build_graph();
        else if (population->parsed()) ns::Pipeline(load_config()).population();
        else if (features->parsed()) ns::Pipeline(load_config()).features();
        else if (flag_knn->parsed()) ns::Pipeline(load_config()).flag_knn();
        else if (fit_logit->parsed()) ns::Pipeline(load_config()).fit_logit();
        else if (sample->parsed()) ns::Pipeline(load_config()).sample();
        else if (robustness->parsed()) ns::Pipeline(load_config()).robustness();
        else if (run_all->parsed()) ns::Pipeline(load_config()).run_all(!skip_robustness);
        else if (estimate->parsed()) {
            if (!est_config.empty()) {
                config = est_config;
                ns::Pipeline p(load_config());
                p.estimate();
                if (!est_out.empty()) write_or_print(p.estimate_result(), est_out);
            } else {
                if (nn_counts.empty() && logit_counts.empty()) throw ns::Error("give --config or at least one of --nn-counts/--logit-counts");
                std::vector<ns::AnnotationCounts> per_source;
                if (!nn_counts.empty()) per_source.push_back(parse_counts(nn_counts, ns::Source::NN));
                if (!logit_counts.empty()) per_source.push_back(parse_counts(logit_counts, ns::Source::LOGIT));
                ns::EstimateSettings s;
                s.n_mc = n_mc;
                s.seed = est_seed;
                auto j = ns::estimate_json(per_source, s);
                j["seed"] = est_seed;
                write_or_print(j, est_out);
            }
        } else if (extrapolate->parsed()) {
            auto fr = read_fractions(fractions_file);
            std::map<int, double> pop;
            for (const auto& f : fr) pop[f.k] = f.n_directors;
            nlohmann::json j;
            j["upper"] = ns::extrapolate_small(fr, tp_rate, pop, ns::BoundLabel::UpperBound).to_json();
            if (!slope_file.empty()) {
                std::vector<std::pair<double, double>> lic;
                for (const auto& f : read_fractions(slope_file)) lic.emplace_back(f.k, f.fraction);
                auto slope = ns::fit_log_log(lic).first;
                j["lower"] = ns::extrapolate_small(fr, tp_rate, pop, ns::BoundLabel::LowerBound, slope).to_json();
            }
            write_or_print(j, ex_out);
        } else if (synth->parsed()) {
            if (!synth_config.empty()) {
                std::ifstream in(synth_config);
                auto base = ns::SynthConfig::from_json(nlohmann::json::parse(in));
                // Command-line values given explicitly win over the file.
                if (!synth->count("--seed")) sc.seed = base.seed;
                if (!synth->count("--n-directors")) sc.n_directors = base.n_directors;
                if (!synth->count("--n-companies")) sc.n_companies = base.n_companies;
                if (!synth->count("--n-addresses")) sc.n_addresses = base.n_addresses;
                if (!synth->count("--licensed")) sc.n_licensed = base.n_licensed;
                if (!synth->count("--illegal")) sc.n_illegal = base.n_illegal;
                sc.profile_mix = base.profile_mix;
                sc.position_exponent = base.position_exponent;
                sc.max_positions = base.max_positions;
            }
            if (!profile_mix.empty()) {
                sc.profile_mix.clear();
                for (const auto& item : ns::str::split(profile_mix, ',')) {
                    auto kv = ns::str::split(item, '=');
                    if (kv.size() != 2) throw ns::Error("profile mix entries are Name=weight: " + item);
                    sc.profile_mix[ns::parse_profile(ns::str::trim(kv[0]))] = std::stod(kv[1]);
                }
            }
            ns::synth_generate(sc).write(synth_out);
        } else if (serve->parsed()) {
            auto cfg = load_config();
            ns::Pipeline p(cfg);
            p.sample();
            std::filesystem::create_directories(cfg.annotations.parent_path().empty() ? "." : cfg.annotations.parent_path());
            ns::AnnotationLog log(cfg.annotations.string());
            ns::AnnotationService svc(p.queues(), log, [&p](const std::string& id) { return p.director_payload(id); },
                                      p.codebook_text(), cfg.estimate);
            httplib::Server srv;
            ns::install_routes(srv, svc);
            std::cerr << "listening on " << host << ":" << port << '\n';
            if (!srv.listen(host, port)) throw ns::Error("cannot listen on " + host + ":" + std::to_string(port));
        } else if (match->parsed()) {
            auto matches = ns::match_names(read_lines(queries_file), read_lines(targets_file), name_threshold);
            ns::csv::write_row(std::cout, {"query", "target", "similarity"});
            for (const auto& m : matches) ns::csv::write_row(std::cout, {m.query, m.target, ns::csv::format_double(m.similarity)});
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
