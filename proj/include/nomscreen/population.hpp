#pragma once

// Licensed corporate-service-provider population and the productive-sector
// negative set.
//
//   (i)   register entries joined to company records by registration number
//         (branches included), then to directors by exact and fuzzy name;
//   (iia) individual directors of matched corporate CSP entities;
//   (iib) directors inferred from address / co-director overlap;
//   negatives: corporate directors whose companies avoid CSP-related sectors.

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/csv.hpp"
#include "nomscreen/graph.hpp"
#include "nomscreen/name_match.hpp"

namespace nomscreen {

struct RegisterEntry {
    std::string csp_name;
    std::optional<std::string> registration_number;
    std::vector<AddressKey> addresses;
};

struct LicensedRegister {
    std::vector<RegisterEntry> entries;
};

// (street, number, city) -> postcode, replacing an external geocoder.
class PostcodeLookup {
public:
    static PostcodeLookup load(std::istream& in) {
        PostcodeLookup l;
        csv::Reader r(in);
        auto header = r.next();
        if (!header) return l;
        std::vector<std::string> expected = {"street", "street_number", "city", "postcode"};
        auto fields = header->fields;
        for (auto& f : fields) f = str::trim(f);
        if (fields != expected) throw Error("malformed postcode lookup header");
        while (auto row = r.next()) {
            if (row->fields.size() != 4) continue;
            l.add(row->fields[0], row->fields[1], row->fields[2], row->fields[3]);
        }
        return l;
    }

    void add(std::string_view street, std::string_view number, std::string_view city, std::string_view postcode) {
        map_[key(street, number, city)] = normalize_postcode(postcode);
    }

    std::optional<std::string> find(std::string_view street, std::string_view number, std::string_view city) const {
        auto it = map_.find(key(street, number, city));
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

private:
    static std::string key(std::string_view street, std::string_view number, std::string_view city) {
        return str::to_lower(str::collapse_ws(street)) + "|" + normalize_street_number(number) + "|" +
               str::to_lower(str::collapse_ws(city));
    }
    std::map<std::string, std::string> map_;
};

struct RegisterParseReport {
    std::vector<Rejection> rejections;
};

// register.csv: csp_name,registration_number,postcode,street_number,street,city
// Rows sharing (csp_name, registration_number) are merged into one entry.
inline LicensedRegister parse_register(std::istream& in, const PostcodeLookup* lookup = nullptr,
                                       RegisterParseReport* report = nullptr) {
    LicensedRegister reg;
    csv::Reader r(in);
    auto header = r.next();
    if (!header) return reg;
    const std::vector<std::string> expected = {"csp_name", "registration_number", "postcode",
                                               "street_number", "street", "city"};
    auto fields = header->fields;
    for (auto& f : fields) f = str::trim(f);
    if (fields != expected) throw Error("malformed header in register.csv");
    std::map<std::pair<std::string, std::string>, size_t> pos;
    auto reject = [&](size_t line, std::string reason) {
        if (report) report->rejections.push_back({"register.csv", line, std::move(reason)});
    };
    while (auto row = r.next()) {
        const auto& f = row->fields;
        if (row->malformed || f.size() != expected.size()) {
            reject(row->line, "wrong field count");
            continue;
        }
        auto name = str::collapse_ws(f[0]);
        if (name.empty()) {
            reject(row->line, "missing csp_name");
            continue;
        }
        auto regno = str::trim(f[1]);
        auto [it, fresh] = pos.emplace(std::make_pair(name, regno), reg.entries.size());
        if (fresh) {
            RegisterEntry e;
            e.csp_name = name;
            if (!regno.empty()) e.registration_number = regno;
            reg.entries.push_back(std::move(e));
        }
        auto& entry = reg.entries[it->second];
        auto pc = normalize_postcode(f[2]);
        if (pc.empty() && lookup) pc = lookup->find(f[4], f[3], f[5]).value_or("");
        if (pc.empty()) continue;  // no address on this row
        if (!is_dutch_postcode(pc)) {
            reject(row->line, "invalid postcode");
            continue;
        }
        auto a = make_address(pc, f[3], f[4], f[5]);
        if (std::find(entry.addresses.begin(), entry.addresses.end(), a) == entry.addresses.end())
            entry.addresses.push_back(a);
    }
    return reg;
}

enum class Provenance { MatchedId, NameMatch, EmployeeOfCsp, Affiliated };

inline const char* to_string(Provenance p) {
    switch (p) {
    case Provenance::MatchedId: return "MatchedId";
    case Provenance::NameMatch: return "NameMatch";
    case Provenance::EmployeeOfCsp: return "EmployeeOfCsp";
    case Provenance::Affiliated: return "Affiliated";
    }
    return "";
}

enum class AffiliationCriterion { Register25_20, Augmented50_50, Both };

inline const char* to_string(AffiliationCriterion c) {
    switch (c) {
    case AffiliationCriterion::Register25_20: return "register_25_20";
    case AffiliationCriterion::Augmented50_50: return "augmented_50_50";
    case AffiliationCriterion::Both: return "both";
    }
    return "";
}

enum class AddressTag { Register, Augmented };

struct LicensedEntry {
    Provenance provenance;
    std::optional<AffiliationCriterion> criterion;  // set iff Affiliated
    std::optional<size_t> register_entry;           // for MatchedId / NameMatch
    double similarity = 1.0;                        // name-match score
};

struct PopulationReport {
    std::vector<size_t> unmatched_entries;                      // register entries matching nothing
    std::map<size_t, std::vector<NodeIndex>> matched_companies;  // entry -> companies by registration number
};

struct CspPopulation {
    std::map<NodeIndex, LicensedEntry> licensed;  // director -> provenance
    std::map<AddressKey, AddressTag> csp_addresses;
    std::set<NodeIndex> negatives;
    PopulationReport report;

    bool is_licensed(NodeIndex d) const { return licensed.count(d) > 0; }
    std::set<NodeIndex> licensed_set() const {
        std::set<NodeIndex> s;
        for (const auto& [d, e] : licensed) s.insert(d);
        return s;
    }
    size_t count(Provenance p) const {
        size_t n = 0;
        for (const auto& [d, e] : licensed) n += e.provenance == p;
        return n;
    }

    void write_jsonl(std::ostream& out, const EntityGraph& g) const {
        for (const auto& [d, e] : licensed) {
            nlohmann::json j{{"kind", "licensed"}, {"director_id", g.directors()[d].id},
                             {"provenance", to_string(e.provenance)}};
            if (e.criterion) j["criterion"] = to_string(*e.criterion);
            if (e.provenance == Provenance::NameMatch) j["similarity"] = e.similarity;
            out << j.dump() << '\n';
        }
        for (const auto& [a, tag] : csp_addresses) {
            nlohmann::json j{{"kind", "csp_address"}, {"postcode", a.postcode}, {"number", a.street_number},
                             {"tag", tag == AddressTag::Register ? "Register" : "Augmented"}};
            out << j.dump() << '\n';
        }
        for (auto d : negatives)
            out << nlohmann::json{{"kind", "negative"}, {"director_id", g.directors()[d].id}}.dump() << '\n';
    }
};

struct PopulationConfig {
    double name_threshold = 0.90;
    bool strict_thresholds = true;  // "over 25%" read as >
    double register_address_share = 0.25;
    double register_codirector_share = 0.20;
    double augmented_address_share = 0.50;
    double augmented_codirector_share = 0.50;
    std::set<int> excluded_divisions = {64, 65, 66, 69, 70, 82};
    EligibilityConfig eligibility;
};

// Registration numbers are KvK stems: a company matches when its id, minus an
// optional two-letter country prefix, starts with the number. Branch ids
// share the stem.
inline bool registration_matches(std::string_view company_id, std::string_view registration_number) {
    if (registration_number.empty()) return false;
    std::string_view id = company_id;
    if (id.size() >= 2 && std::isalpha(static_cast<unsigned char>(id[0])) &&
        std::isalpha(static_cast<unsigned char>(id[1])))
        id.remove_prefix(2);
    return id.substr(0, registration_number.size()) == registration_number;
}

// Step (i).
inline CspPopulation match_register(const LicensedRegister& reg, const EntityGraph& g,
                                    const PopulationConfig& cfg = {}) {
    CspPopulation pop;
    for (const auto& e : reg.entries)
        for (const auto& a : e.addresses) pop.csp_addresses[a] = AddressTag::Register;

    // Names per entry: register name plus names of matched companies.
    std::vector<std::set<std::string>> entry_names(reg.entries.size());
    std::map<std::string, NodeIndex> corporate_by_company;
    for (NodeIndex d = 0; d < g.directors().size(); ++d)
        if (g.directors()[d].company_id) corporate_by_company.emplace(*g.directors()[d].company_id, d);

    auto add_licensed = [&](NodeIndex d, Provenance p, size_t entry, double sim) {
        auto it = pop.licensed.find(d);
        if (it == pop.licensed.end()) {
            pop.licensed.emplace(d, LicensedEntry{p, std::nullopt, entry, sim});
        } else if (p == Provenance::MatchedId && it->second.provenance == Provenance::NameMatch) {
            it->second = LicensedEntry{p, std::nullopt, entry, sim};
        }
    };

    std::vector<bool> entry_hit(reg.entries.size(), false);
    for (size_t i = 0; i < reg.entries.size(); ++i) {
        const auto& e = reg.entries[i];
        entry_names[i].insert(e.csp_name);
        if (!e.registration_number) continue;
        for (NodeIndex c = 0; c < g.companies().size(); ++c) {
            const auto& comp = g.companies()[c];
            if (!registration_matches(comp.company_id, *e.registration_number)) continue;
            pop.report.matched_companies[i].push_back(c);
            entry_hit[i] = true;
            if (!comp.name.empty()) entry_names[i].insert(comp.name);
            for (auto role : {AddressRole::Office, AddressRole::Postal})
                if (auto a = g.current_address(c, role)) pop.csp_addresses.emplace(g.addresses()[*a], AddressTag::Augmented);
            if (auto it = corporate_by_company.find(comp.company_id); it != corporate_by_company.end())
                add_licensed(it->second, Provenance::MatchedId, i, 1.0);
        }
    }

    // Exact (normalized) name matches.
    std::map<std::string, std::vector<NodeIndex>> by_name;
    std::vector<std::string> director_names;
    for (NodeIndex d = 0; d < g.directors().size(); ++d) {
        by_name[normalize_name(g.directors()[d].name)].push_back(d);
        director_names.push_back(g.directors()[d].name);
    }
    std::map<std::string, size_t> name_entry;  // csp name -> first entry using it
    for (size_t i = 0; i < reg.entries.size(); ++i)
        for (const auto& n : entry_names[i]) name_entry.emplace(n, i);
    for (const auto& [n, i] : name_entry) {
        auto it = by_name.find(normalize_name(n));
        if (it == by_name.end()) continue;
        for (auto d : it->second) add_licensed(d, Provenance::MatchedId, i, 1.0);
        entry_hit[i] = true;
    }

    // Trigram TF-IDF matches over all names in the dataset.
    std::vector<std::string> queries;
    for (const auto& [n, i] : name_entry) queries.push_back(n);
    if (!queries.empty() && !director_names.empty()) {
        std::vector<std::string> corpus(director_names);
        corpus.insert(corpus.end(), queries.begin(), queries.end());
        auto vocab = TrigramVocabulary::fit(corpus);
        for (const auto& m : match_names(vocab, queries, director_names, cfg.name_threshold)) {
            size_t i = name_entry.at(m.query);
            entry_hit[i] = true;
            for (auto d : by_name.at(normalize_name(m.target))) add_licensed(d, Provenance::NameMatch, i, m.similarity);
        }
    }

    for (size_t i = 0; i < reg.entries.size(); ++i)
        if (!entry_hit[i]) pop.report.unmatched_entries.push_back(i);
    return pop;
}

// Step (iia): individual directors of matched corporate CSP entities.
inline void add_employees(CspPopulation& pop, const EntityGraph& g) {
    std::vector<NodeIndex> added;
    for (const auto& [d, e] : pop.licensed) {
        if (e.provenance != Provenance::MatchedId && e.provenance != Provenance::NameMatch) continue;
        const auto& dir = g.directors()[d];
        if (!dir.company_id) continue;
        auto c = g.company(*dir.company_id);
        if (!c) continue;
        for (auto edge : g.directors_of(*c)) {
            const auto& ds = g.directorships()[edge];
            if (ds.status != Status::Current) continue;
            if (g.directors()[ds.director].is_corporate()) continue;
            added.push_back(ds.director);
        }
    }
    for (auto d : added) pop.licensed.emplace(d, LicensedEntry{Provenance::EmployeeOfCsp, std::nullopt, std::nullopt, 1.0});
}

struct AffiliationShares {
    double register_address = 0;
    double any_csp_address = 0;
    double licensed_codirector = 0;
};

inline AffiliationShares affiliation_shares(const EntityGraph& g, NodeIndex d, const CspPopulation& pop,
                                            const std::set<NodeIndex>& licensed) {
    AffiliationShares s;
    auto companies = g.managed_companies(d);
    if (companies.empty()) return s;
    size_t reg = 0, any = 0, co = 0;
    for (auto c : companies) {
        bool at_reg = false, at_any = false;
        for (auto role : {AddressRole::Office, AddressRole::Postal}) {
            auto a = g.current_address(c, role);
            if (!a) continue;
            auto it = pop.csp_addresses.find(g.addresses()[*a]);
            if (it == pop.csp_addresses.end()) continue;
            at_any = true;
            at_reg = at_reg || it->second == AddressTag::Register;
        }
        bool shares = false;
        for (auto edge : g.directors_of(c)) {
            const auto& ds = g.directorships()[edge];
            if (ds.status == Status::Current && ds.director != d && licensed.count(ds.director)) shares = true;
        }
        reg += at_reg;
        any += at_any;
        co += shares;
    }
    double n = static_cast<double>(companies.size());
    s.register_address = static_cast<double>(reg) / n;
    s.any_csp_address = static_cast<double>(any) / n;
    s.licensed_codirector = static_cast<double>(co) / n;
    return s;
}

// Step (iib). The licensed set used for the co-director condition is frozen
// at entry (steps i + iia).
inline void infer_affiliated(CspPopulation& pop, const EntityGraph& g, const PopulationConfig& cfg = {}) {
    const auto licensed = pop.licensed_set();
    auto over = [&](double share, double threshold) { return cfg.strict_thresholds ? share > threshold : share >= threshold; };
    std::vector<std::pair<NodeIndex, AffiliationCriterion>> added;
    for (auto d : eligible_directors(g, cfg.eligibility)) {
        if (licensed.count(d)) continue;
        auto s = affiliation_shares(g, d, pop, licensed);
        bool c1 = over(s.register_address, cfg.register_address_share) &&
                  over(s.licensed_codirector, cfg.register_codirector_share);
        bool c2 = over(s.any_csp_address, cfg.augmented_address_share) &&
                  over(s.licensed_codirector, cfg.augmented_codirector_share);
        if (c1 && c2) added.emplace_back(d, AffiliationCriterion::Both);
        else if (c1) added.emplace_back(d, AffiliationCriterion::Register25_20);
        else if (c2) added.emplace_back(d, AffiliationCriterion::Augmented50_50);
    }
    for (auto [d, c] : added) pop.licensed.emplace(d, LicensedEntry{Provenance::Affiliated, c, std::nullopt, 1.0});
}

// Eligible corporate directors whose managed companies all sit outside the
// excluded NACE divisions. Unknown-sector companies neither qualify nor
// disqualify; a director with only unknown-sector companies is not a negative.
inline std::set<NodeIndex> select_negatives(const EntityGraph& g, const std::set<NodeIndex>& licensed,
                                            const PopulationConfig& cfg = {}) {
    std::set<NodeIndex> out;
    for (auto d : eligible_directors(g, cfg.eligibility)) {
        if (!g.directors()[d].is_corporate() || licensed.count(d)) continue;
        bool known = false, excluded = false;
        for (auto c : g.managed_companies(d)) {
            int div = g.companies()[c].nace_division();
            if (div < 0) continue;
            known = true;
            if (cfg.excluded_divisions.count(div)) excluded = true;
        }
        if (known && !excluded) out.insert(d);
    }
    return out;
}

inline CspPopulation build_population(const LicensedRegister& reg, const EntityGraph& g,
                                      const PopulationConfig& cfg = {}) {
    auto pop = match_register(reg, g, cfg);
    add_employees(pop, g);
    infer_affiliated(pop, g, cfg);
    pop.negatives = select_negatives(g, pop.licensed_set(), cfg);
    for (auto d : pop.negatives)
        if (pop.is_licensed(d)) throw Error("negative set intersects licensed set");
    return pop;
}

} // namespace nomscreen
