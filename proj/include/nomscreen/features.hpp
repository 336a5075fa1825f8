#pragma once

// The 48 per-director ego-network indicators, feature matrices and their
// scaled views (z-score and median/IQR), and bootstrap group means.
//
// Conventions shared by every feature: "companies" are the center's current
// directorships; percentages divide by their count; logs are ln(1 + count).

#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nomscreen/csv.hpp"
#include "nomscreen/graph.hpp"
#include "nomscreen/name_match.hpp"
#include "nomscreen/offshore.hpp"
#include "nomscreen/population.hpp"

namespace nomscreen {

inline constexpr size_t kFeatureCount = 48;

inline const std::array<const char*, kFeatureCount>& feature_names() {
    static const std::array<const char*, kFeatureCount> names = {
        // directors
        "is_corporate_director", "name_contains_corporate_keyword", "corporate_director_in_csp_sector",
        "director_in_offshore_leaks",
        // directors + companies
        "corporate_director_shared_directors_with_companies", "name_similarity_director_companies",
        "pct_companies_title_director", "pct_companies_most_frequent_title", "n_shared_directors_between_companies",
        "avg_previous_directors_per_company", "pct_companies_previous_licensed_csp",
        // addresses
        "log_companies_top_office_address", "log_companies_top_postal_address", "pct_companies_top_office_address",
        "pct_companies_top_postal_address", "pct_previously_csp_address_augmented", "pct_previously_csp_address",
        "n_office_addresses_in_leaks", "n_postal_addresses_in_leaks", "avg_previous_addresses",
        // companies
        "any_company_csp_sector", "log_n_companies", "name_similarity_between_companies", "pct_finance",
        "pct_holding_6420", "pct_real_estate", "pct_top_holdings", "pct_administrative", "pct_unknown_sector",
        "pct_retail_wholesale", "pct_construction", "pct_top_sector", "pct_bv", "pct_foundation", "pct_vof",
        "pct_cooperative", "pct_cv", "pct_top_legal_form", "n_companies_in_leaks",
        // owners
        "n_directors_also_owners", "pct_directors_also_owners", "pct_unknown_owner", "pct_domestic_owner",
        "pct_foreign_owner", "pct_owner_in_ofc",
        // owners + companies
        "log_n_independent_companies", "directors_per_independent_company", "companies_per_independent_company"};
    return names;
}

inline size_t feature_index(std::string_view name) {
    const auto& names = feature_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (name == names[i]) return i;
    throw Error("unknown feature: " + std::string(name));
}

using FeatureVector = std::array<double, kFeatureCount>;

// Small offshore financial centres (ISO alpha-2), after the IMF list.
inline std::set<std::string> default_ofc_countries() {
    return {"AD", "AG", "AI", "AW", "BB", "BH", "BM", "BQ", "BS", "BZ", "CH", "CK", "CR", "CW", "CY", "DM",
            "GD", "GG", "GI", "HK", "IE", "IM", "JE", "KN", "KY", "LB", "LC", "LI", "LU", "MC", "MH", "MO",
            "MS", "MT", "MU", "MY", "NR", "NU", "PA", "PW", "SC", "SG", "SX", "TC", "VC", "VG", "VU", "WS"};
}

struct FeatureConfig {
    std::vector<std::string> corporate_keywords = {"b.v.", "n.v.", "holding", "beheer",
                                                   "management", "trust", "services", "administratie"};
    std::set<int> csp_divisions = {64, 65, 66, 69, 70, 82};
    std::set<int> csp_codes = {6420};
    std::vector<std::string> title_terms = {"director", "directeur", "bestuurder"};
    std::set<std::string> ofc_countries = default_ofc_countries();
    std::string domestic_country = "NL";

    bool csp_sector(const CompanyRecord& c) const {
        return c.nace && (csp_divisions.count(c.nace_division()) || csp_codes.count(c.nace_code()));
    }

    // Missing keys keep their defaults.
    static FeatureConfig from_json(const nlohmann::json& j) {
        FeatureConfig c;
        if (j.contains("corporate_keywords")) c.corporate_keywords = j.at("corporate_keywords").get<std::vector<std::string>>();
        if (j.contains("csp_divisions")) c.csp_divisions = j.at("csp_divisions").get<std::set<int>>();
        if (j.contains("csp_codes")) c.csp_codes = j.at("csp_codes").get<std::set<int>>();
        if (j.contains("title_terms")) c.title_terms = j.at("title_terms").get<std::vector<std::string>>();
        if (j.contains("ofc_countries")) c.ofc_countries = j.at("ofc_countries").get<std::set<std::string>>();
        if (j.contains("domestic_country")) c.domestic_country = j.at("domestic_country").get<std::string>();
        for (auto& k : c.corporate_keywords) k = str::to_lower(k);
        for (auto& t : c.title_terms) t = str::to_lower(t);
        return c;
    }

    static FeatureConfig load(std::istream& in) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("invalid feature config: ") + e.what());
        }
        return from_json(j);
    }

    nlohmann::json to_json() const {
        return {{"corporate_keywords", corporate_keywords}, {"csp_divisions", csp_divisions},
                {"csp_codes", csp_codes},                   {"title_terms", title_terms},
                {"ofc_countries", ofc_countries},           {"domestic_country", domestic_country}};
    }
};

// One OFC code per line; blank lines and '#' comments ignored.
inline std::set<std::string> load_country_list(std::istream& in) {
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = str::trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.insert(str::to_upper(t));
    }
    return out;
}

// Leak-matching text of an address: "street number postcode city", normalized.
inline std::string address_leak_text(const AddressKey& a) {
    return normalize_leak_text(a.street + " " + a.street_number + " " + a.postcode + " " + a.city);
}

// Precomputed, read-only state shared by all feature computations.
class FeatureContext {
public:
    FeatureContext(const EntityGraph& g, const CspPopulation& pop, const OffshoreLeaksIndex& leaks,
                   FeatureConfig cfg = {})
        : g_(g), pop_(pop), leaks_(leaks), cfg_(std::move(cfg)) {
        licensed_ = pop_.licensed_set();
        std::vector<std::string> names;
        for (const auto& d : g_.directors()) names.push_back(d.name);
        for (const auto& c : g_.companies()) names.push_back(c.name);
        if (!names.empty()) vocab_ = TrigramVocabulary::fit(names);
        director_vec_.reserve(g_.directors().size());
        for (const auto& d : g_.directors()) director_vec_.push_back(vectorize(d.name));
        company_vec_.reserve(g_.companies().size());
        for (const auto& c : g_.companies()) company_vec_.push_back(vectorize(c.name));
        address_in_leaks_.reserve(g_.addresses().size());
        for (const auto& a : g_.addresses()) address_in_leaks_.push_back(leaks_.flag(address_leak_text(a), LeakKind::Address));
        company_in_leaks_.reserve(g_.companies().size());
        for (const auto& c : g_.companies()) company_in_leaks_.push_back(leaks_.flag(normalize_leak_text(c.name), LeakKind::Company));
    }

    const EntityGraph& graph() const { return g_; }
    const CspPopulation& population() const { return pop_; }
    const FeatureConfig& config() const { return cfg_; }
    const std::set<NodeIndex>& licensed() const { return licensed_; }
    const TrigramVector& director_vector(NodeIndex d) const { return director_vec_[d]; }
    const TrigramVector& company_vector(NodeIndex c) const { return company_vec_[c]; }
    bool address_in_leaks(NodeIndex a) const { return address_in_leaks_[a]; }
    bool company_in_leaks(NodeIndex c) const { return company_in_leaks_[c]; }
    bool director_in_leaks(NodeIndex d) const {
        return leaks_.flag(normalize_leak_text(g_.directors()[d].name), LeakKind::Officer);
    }

private:
    TrigramVector vectorize(const std::string& name) const { return vocab_ ? vocab_->vectorize(name) : TrigramVector{}; }

    const EntityGraph& g_;
    const CspPopulation& pop_;
    const OffshoreLeaksIndex& leaks_;
    FeatureConfig cfg_;
    std::set<NodeIndex> licensed_;
    std::optional<TrigramVocabulary> vocab_;
    std::vector<TrigramVector> director_vec_, company_vec_;
    std::vector<bool> address_in_leaks_, company_in_leaks_;
};

namespace detail {

// Largest class count; 0 for no items.
template <class Key>
size_t modal_count(const std::map<Key, size_t>& counts) {
    size_t best = 0;
    for (const auto& [k, n] : counts) best = std::max(best, n);
    return best;
}

// Address shared by most of the given companies in the given role; ties go
// to the smaller address key. Returns (address, count).
inline std::optional<std::pair<NodeIndex, size_t>> top_address(const EntityGraph& g, const std::vector<NodeIndex>& companies,
                                                               AddressRole role) {
    std::map<NodeIndex, size_t> counts;
    for (auto c : companies)
        if (auto a = g.current_address(c, role)) ++counts[*a];
    std::optional<std::pair<NodeIndex, size_t>> best;
    for (const auto& [a, n] : counts)
        if (!best || n > best->second) best = std::make_pair(a, n);
    return best;
}

} // namespace detail

inline FeatureVector compute_features(const FeatureContext& ctx, const EgoNetwork& e) {
    const auto& g = ctx.graph();
    const auto& cfg = ctx.config();
    const auto& pop = ctx.population();
    const auto& C = e.companies;
    if (C.empty()) throw Error("ego network has no current companies: " + g.directors()[e.center].id);
    const double n = static_cast<double>(C.size());
    const auto& dir = g.directors()[e.center];
    FeatureVector f{};
    size_t k = 0;
    auto put = [&](double v) { f[k++] = v; };
    auto share = [&](auto pred) {
        size_t m = 0;
        for (auto c : C) m += pred(c) ? 1 : 0;
        return static_cast<double>(m) / n;
    };
    const std::optional<NodeIndex> own_entity = dir.company_id ? g.company(*dir.company_id) : std::nullopt;

    // Current directors of a company, optionally individuals only.
    auto current_directors = [&](NodeIndex c, bool individuals_only) {
        std::set<NodeIndex> out;
        for (auto edge : g.directors_of(c)) {
            const auto& ds = g.directorships()[edge];
            if (ds.status != Status::Current) continue;
            if (individuals_only && g.directors()[ds.director].is_corporate()) continue;
            out.insert(ds.director);
        }
        return out;
    };
    auto previous_directors = [&](NodeIndex c) {
        std::set<NodeIndex> out;
        for (auto edge : g.directors_of(c)) {
            const auto& ds = g.directorships()[edge];
            if (ds.status == Status::Previous && ds.director != e.center) out.insert(ds.director);
        }
        return out;
    };

    // -- directors
    put(dir.is_corporate() ? 1.0 : 0.0);
    {
        auto lname = str::to_lower(dir.name);
        bool hit = false;
        for (const auto& kw : cfg.corporate_keywords) hit = hit || str::contains(lname, kw);
        put(hit ? 1.0 : 0.0);
    }
    put(own_entity && cfg.csp_sector(g.companies()[*own_entity]) ? 1.0 : 0.0);
    put(ctx.director_in_leaks(e.center) ? 1.0 : 0.0);

    // -- directors + companies
    {
        bool shared = false;
        if (own_entity) {
            auto own = current_directors(*own_entity, true);
            for (auto c : C) {
                if (c == *own_entity) continue;
                for (auto d : current_directors(c, true))
                    if (own.count(d)) shared = true;
            }
        }
        put(shared ? 1.0 : 0.0);
    }
    {
        double sum = 0;
        for (auto c : C) sum += cosine(ctx.director_vector(e.center), ctx.company_vector(c));
        put(sum / n);
    }
    {
        // One current position per managed company.
        std::map<NodeIndex, std::string> title_of;
        for (auto edge : g.positions_of(e.center)) {
            const auto& ds = g.directorships()[edge];
            if (ds.status == Status::Current) title_of[ds.company] = str::collapse_ws(str::to_lower(ds.title.value_or("")));
        }
        size_t director_titles = 0;
        std::map<std::string, size_t> counts;
        for (const auto& [c, t] : title_of) {
            bool hit = false;
            for (const auto& term : cfg.title_terms) hit = hit || str::contains(t, term);
            director_titles += hit;
            ++counts[t];
        }
        put(static_cast<double>(director_titles) / n);
        put(static_cast<double>(detail::modal_count(counts)) / n);
    }
    {
        std::map<NodeIndex, size_t> seen;
        for (auto c : C)
            for (auto d : current_directors(c, false))
                if (d != e.center) ++seen[d];
        size_t shared = 0;
        for (const auto& [d, m] : seen) shared += m >= 2;
        put(static_cast<double>(shared));
    }
    {
        double sum = 0;
        for (auto c : C) sum += static_cast<double>(previous_directors(c).size());
        put(sum / n);
    }
    put(share([&](NodeIndex c) {
        for (auto d : previous_directors(c))
            if (ctx.licensed().count(d)) return true;
        return false;
    }));

    // -- addresses
    auto top_office = detail::top_address(g, C, AddressRole::Office);
    auto top_postal = detail::top_address(g, C, AddressRole::Postal);
    put(top_office ? std::log1p(static_cast<double>(g.companies_at(top_office->first, AddressRole::Office))) : 0.0);
    put(top_postal ? std::log1p(static_cast<double>(g.companies_at(top_postal->first, AddressRole::Postal))) : 0.0);
    put(top_office ? static_cast<double>(top_office->second) / n : 0.0);
    put(top_postal ? static_cast<double>(top_postal->second) / n : 0.0);
    auto previously_at = [&](NodeIndex c, bool register_only) {
        for (auto edge : g.locations_of(c)) {
            const auto& l = g.located()[edge];
            if (l.status != Status::Previous) continue;
            auto it = pop.csp_addresses.find(g.addresses()[l.address]);
            if (it == pop.csp_addresses.end()) continue;
            if (!register_only || it->second == AddressTag::Register) return true;
        }
        return false;
    };
    put(share([&](NodeIndex c) { return previously_at(c, false); }));
    put(share([&](NodeIndex c) { return previously_at(c, true); }));
    for (auto role : {AddressRole::Office, AddressRole::Postal}) {
        std::set<NodeIndex> flagged;
        for (auto c : C)
            if (auto a = g.current_address(c, role); a && ctx.address_in_leaks(*a)) flagged.insert(*a);
        put(static_cast<double>(flagged.size()));
    }
    {
        double sum = 0;
        for (auto c : C) sum += static_cast<double>(g.previous_addresses(c).size());
        put(sum / n);
    }

    // -- companies
    auto division = [&](NodeIndex c) { return g.companies()[c].nace_division(); };
    auto in_divisions = [&](int lo, int hi) {
        return share([&](NodeIndex c) { return division(c) >= lo && division(c) <= hi; });
    };
    put(share([&](NodeIndex c) { return cfg.csp_sector(g.companies()[c]); }) > 0 ? 1.0 : 0.0);
    put(std::log1p(n));
    {
        double sum = 0;
        size_t pairs = 0;
        for (size_t i = 0; i < C.size(); ++i)
            for (size_t j = i + 1; j < C.size(); ++j) {
                sum += cosine(ctx.company_vector(C[i]), ctx.company_vector(C[j]));
                ++pairs;
            }
        put(pairs ? sum / static_cast<double>(pairs) : 0.0);
    }
    put(in_divisions(64, 66));
    put(share([&](NodeIndex c) { return g.companies()[c].nace_code() == 6420; }));
    put(in_divisions(68, 68));
    put(share([&](NodeIndex c) { return !g.owner_of(c).has_value(); }));
    put(in_divisions(82, 82));
    put(share([&](NodeIndex c) { return division(c) < 0; }));
    put(in_divisions(45, 47));
    put(in_divisions(41, 43));
    {
        std::map<int, size_t> counts;  // Unknown (-1) is its own class
        for (auto c : C) ++counts[division(c)];
        put(static_cast<double>(detail::modal_count(counts)) / n);
    }
    for (auto form : {LegalForm::BV, LegalForm::Foundation, LegalForm::VOF, LegalForm::Cooperative, LegalForm::CV})
        put(share([&](NodeIndex c) { return g.companies()[c].legal_form.form == form; }));
    {
        std::map<std::string, size_t> counts;
        for (auto c : C) ++counts[g.companies()[c].legal_form.label()];
        put(static_cast<double>(detail::modal_count(counts)) / n);
    }
    put(static_cast<double>(std::count_if(C.begin(), C.end(), [&](NodeIndex c) { return ctx.company_in_leaks(c); })));

    // -- owners
    std::set<std::string> owner_ids;
    for (auto c : C)
        if (auto o = g.owner_of(c)) owner_ids.insert(g.owners()[*o].id);
    std::set<NodeIndex> all_directors;
    for (auto c : C)
        for (auto d : current_directors(c, false)) all_directors.insert(d);
    {
        size_t owners = 0;
        for (auto d : all_directors) {
            const auto& dn = g.directors()[d];
            owners += owner_ids.count(dn.id) || (dn.company_id && owner_ids.count(*dn.company_id));
        }
        put(static_cast<double>(owners));
        put(all_directors.empty() ? 0.0 : static_cast<double>(owners) / static_cast<double>(all_directors.size()));
    }
    auto owner_country = [&](NodeIndex c) -> std::optional<std::string> {
        if (!g.owner_of(c)) return std::nullopt;
        return g.companies()[c].guo_country;
    };
    put(share([&](NodeIndex c) { return !owner_country(c).has_value(); }));
    put(share([&](NodeIndex c) { return owner_country(c) == cfg.domestic_country; }));
    put(share([&](NodeIndex c) {
        auto cc = owner_country(c);
        return cc && *cc != cfg.domestic_country;
    }));
    put(share([&](NodeIndex c) {
        auto cc = owner_country(c);
        return cc && cfg.ofc_countries.count(*cc) > 0;
    }));

    // -- owners + companies
    const double independent = static_cast<double>(independent_companies(g, e).size());
    put(std::log1p(independent));
    put(static_cast<double>(all_directors.size()) / independent);
    put(n / independent);

    if (k != kFeatureCount) throw Error("feature count mismatch");
    return f;
}

struct FeatureMatrix {
    std::vector<NodeIndex> rows;         // director node per row; empty when read from CSV
    std::vector<std::string> director_ids;
    std::vector<std::string> columns;
    Eigen::MatrixXd values;              // rows x columns

    size_t n_rows() const { return director_ids.size(); }

    FeatureMatrix select_columns(const std::vector<size_t>& keep) const {
        FeatureMatrix out;
        out.rows = rows;
        out.director_ids = director_ids;
        out.values.resize(values.rows(), static_cast<Eigen::Index>(keep.size()));
        for (size_t j = 0; j < keep.size(); ++j) {
            out.columns.push_back(columns.at(keep[j]));
            out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(keep[j]));
        }
        return out;
    }

    std::optional<size_t> row_of(std::string_view director_id) const {
        auto it = std::lower_bound(director_ids.begin(), director_ids.end(), director_id);
        if (it == director_ids.end() || *it != director_id) return std::nullopt;
        return static_cast<size_t>(it - director_ids.begin());
    }

    void write_csv(std::ostream& out) const {
        std::vector<std::string> header{"director_id"};
        header.insert(header.end(), columns.begin(), columns.end());
        csv::write_row(out, header);
        for (size_t i = 0; i < n_rows(); ++i) {
            std::vector<std::string> row{director_ids[i]};
            for (Eigen::Index j = 0; j < values.cols(); ++j)
                row.push_back(csv::format_double(values(static_cast<Eigen::Index>(i), j)));
            csv::write_row(out, row);
        }
    }

    static FeatureMatrix read_csv(std::istream& in) {
        csv::Reader r(in);
        auto header = r.next();
        if (!header || header->fields.empty() || header->fields[0] != "director_id")
            throw Error("malformed features header");
        FeatureMatrix m;
        m.columns.assign(header->fields.begin() + 1, header->fields.end());
        std::vector<std::vector<double>> data;
        while (auto row = r.next()) {
            if (row->fields.size() != m.columns.size() + 1)
                throw Error("features.csv line " + std::to_string(row->line) + ": wrong field count");
            m.director_ids.push_back(row->fields[0]);
            std::vector<double> v;
            for (size_t j = 1; j < row->fields.size(); ++j) v.push_back(std::stod(row->fields[j]));
            data.push_back(std::move(v));
        }
        m.values.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(m.columns.size()));
        for (size_t i = 0; i < data.size(); ++i)
            for (size_t j = 0; j < data[i].size(); ++j)
                m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
        return m;
    }
};

// One row per director, in director-id order.
inline FeatureMatrix compute_feature_matrix(const FeatureContext& ctx, const std::vector<NodeIndex>& directors) {
    FeatureMatrix m;
    std::vector<NodeIndex> sorted(directors);
    std::sort(sorted.begin(), sorted.end());  // node order is id order
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (const auto* c : feature_names()) m.columns.emplace_back(c);
    m.values.resize(static_cast<Eigen::Index>(sorted.size()), static_cast<Eigen::Index>(kFeatureCount));
    for (size_t i = 0; i < sorted.size(); ++i) {
        auto f = compute_features(ctx, ego(ctx.graph(), sorted[i]));
        for (size_t j = 0; j < kFeatureCount; ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
        m.rows.push_back(sorted[i]);
        m.director_ids.push_back(ctx.graph().directors()[sorted[i]].id);
    }
    return m;
}

struct ScalingStats {
    std::vector<double> mean, sd, median, iqr;
    std::vector<bool> zero_variance;

    nlohmann::json to_json() const {
        return {{"mean", mean}, {"sd", sd}, {"median", median}, {"iqr", iqr}, {"zero_variance", zero_variance}};
    }
    static ScalingStats from_json(const nlohmann::json& j) {
        ScalingStats s;
        s.mean = j.at("mean").get<std::vector<double>>();
        s.sd = j.at("sd").get<std::vector<double>>();
        s.median = j.at("median").get<std::vector<double>>();
        s.iqr = j.at("iqr").get<std::vector<double>>();
        s.zero_variance = j.at("zero_variance").get<std::vector<bool>>();
        return s;
    }
};

// Linear-interpolation quantile of sorted data: position (n-1)p.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("quantile of empty data");
    double h = static_cast<double>(sorted.size() - 1) * p;
    auto lo = static_cast<size_t>(std::floor(h));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ScalingStats scaling_stats(const Eigen::MatrixXd& x) {
    ScalingStats s;
    const auto n = x.rows();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        auto col = x.col(j);
        double mean = n ? col.sum() / static_cast<double>(n) : 0.0;
        double var = n ? (col.array() - mean).square().sum() / static_cast<double>(n) : 0.0;
        bool constant = n == 0 || col.maxCoeff() == col.minCoeff();
        std::vector<double> v(col.data(), col.data() + n);
        std::sort(v.begin(), v.end());
        s.mean.push_back(mean);
        s.sd.push_back(constant ? 0.0 : std::sqrt(var));
        s.median.push_back(n ? quantile_sorted(v, 0.5) : 0.0);
        s.iqr.push_back(n ? quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25) : 0.0);
        s.zero_variance.push_back(constant);
    }
    return s;
}

// z-scores with population sd; zero-variance columns become 0.
inline Eigen::MatrixXd apply_standardize(const Eigen::MatrixXd& x, const ScalingStats& s) {
    Eigen::MatrixXd z(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        auto jj = static_cast<size_t>(j);
        if (s.zero_variance[jj] || s.sd[jj] == 0.0) z.col(j).setZero();
        else z.col(j) = (x.col(j).array() - s.mean[jj]) / s.sd[jj];
    }
    return z;
}

inline std::pair<FeatureMatrix, ScalingStats> standardize(const FeatureMatrix& m) {
    if (m.n_rows() < 2) throw Error("standardize needs at least two rows");
    auto stats = scaling_stats(m.values);
    FeatureMatrix out = m;
    out.values = apply_standardize(m.values, stats);
    return {std::move(out), std::move(stats)};
}

// (x - median) / IQR; IQR = 0 columns become 0.
inline FeatureMatrix robust_normalize(const FeatureMatrix& m, const ScalingStats* precomputed = nullptr) {
    if (m.n_rows() < 2) throw Error("robust_normalize needs at least two rows");
    auto stats = precomputed ? *precomputed : scaling_stats(m.values);
    FeatureMatrix out = m;
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
        auto jj = static_cast<size_t>(j);
        if (stats.iqr[jj] == 0.0) out.values.col(j).setZero();
        else out.values.col(j) = (m.values.col(j).array() - stats.median[jj]) / stats.iqr[jj];
    }
    return out;
}

struct GroupMean {
    std::string group;
    std::string feature;
    double mean = 0;
    double ci_low = 0;
    double ci_high = 0;
    size_t n = 0;
};

struct GroupMeansResult {
    std::vector<GroupMean> means;
    std::vector<std::string> warnings;  // empty groups
};

// Per-group column means with percentile bootstrap CIs over rows resampled
// within the group. groups[name] lists row indices.
inline GroupMeansResult group_means(const FeatureMatrix& m, const std::map<std::string, std::vector<size_t>>& groups,
                                    uint64_t seed, size_t n_boot = 1000, double level = 0.95) {
    GroupMeansResult res;
    uint64_t stream = 0;
    for (const auto& [name, rows] : groups) {
        ++stream;
        if (rows.empty()) {
            res.warnings.push_back("empty group excluded: " + name);
            continue;
        }
        for (auto r : rows)
            if (r >= m.n_rows()) throw Error("group row out of range");
        std::mt19937_64 rng(sub_seed(seed, stream));
        std::uniform_int_distribution<size_t> pick(0, rows.size() - 1);
        const auto cols = m.values.cols();
        std::vector<std::vector<double>> boot(static_cast<size_t>(cols));
        for (size_t b = 0; b < n_boot; ++b) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(cols);
            for (size_t i = 0; i < rows.size(); ++i) acc += m.values.row(static_cast<Eigen::Index>(rows[pick(rng)])).transpose();
            acc /= static_cast<double>(rows.size());
            for (Eigen::Index j = 0; j < cols; ++j) boot[static_cast<size_t>(j)].push_back(acc(j));
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            double sum = 0;
            for (auto r : rows) sum += m.values(static_cast<Eigen::Index>(r), j);
            auto& bj = boot[static_cast<size_t>(j)];
            std::sort(bj.begin(), bj.end());
            GroupMean gm{name, m.columns[static_cast<size_t>(j)], sum / static_cast<double>(rows.size()), 0, 0, rows.size()};
            if (!bj.empty()) {
                gm.ci_low = quantile_sorted(bj, (1 - level) / 2);
                gm.ci_high = quantile_sorted(bj, 1 - (1 - level) / 2);
            }
            res.means.push_back(gm);
        }
    }
    return res;
}

} // namespace nomscreen
