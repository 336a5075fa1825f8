#pragma once

// Synthetic registry bundles with planted licensed and illegal corporate
// service providers, for end-to-end evaluation without proprietary data.
//
// Planted structure (directional, not calibrated):
//   licensed: CSP firms registered in the licensed register, each with one
//     corporate director (the firm itself) and up to four employees; clients
//     are holding companies at the firm's address with foreign owners.
//   illegal: individuals running holding companies with foreign owners under
//     one of four evasion profiles.
//   background: productive-sector directors with power-law position counts,
//     family holding groups and corporate group directors.
// Ground truth goes to labels.csv only.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/common.hpp"
#include "nomscreen/csv.hpp"
#include "nomscreen/estimator.hpp"
#include "nomscreen/registry.hpp"

namespace nomscreen {

enum class EvasionProfile { Concentrated, FragmentedAddresses, Frontmen, RotatingStrawmen };

inline const char* to_string(EvasionProfile p) {
    switch (p) {
    case EvasionProfile::Concentrated: return "Concentrated";
    case EvasionProfile::FragmentedAddresses: return "FragmentedAddresses";
    case EvasionProfile::Frontmen: return "Frontmen";
    case EvasionProfile::RotatingStrawmen: return "RotatingStrawmen";
    }
    return "";
}

inline EvasionProfile parse_profile(std::string_view s) {
    for (auto p : {EvasionProfile::Concentrated, EvasionProfile::FragmentedAddresses, EvasionProfile::Frontmen,
                   EvasionProfile::RotatingStrawmen})
        if (s == to_string(p)) return p;
    throw Error("unknown evasion profile: " + std::string(s));
}

struct SynthConfig {
    uint64_t seed = 1;
    size_t n_directors = 5000;
    size_t n_companies = 6000;  // background company pool
    size_t n_addresses = 4000;  // background address pool
    size_t n_licensed = 50;
    size_t n_illegal = 30;
    std::map<EvasionProfile, double> profile_mix = {{EvasionProfile::Concentrated, 1.0}};
    double position_exponent = 2.2;
    size_t max_positions = 40;

    void validate() const {
        if (n_directors == 0 || n_companies == 0 || n_addresses == 0) throw Error("synth counts must be positive");
        if (n_licensed + n_illegal > n_directors) throw Error("more planted CSPs than directors");
        if (profile_mix.empty()) throw Error("empty evasion profile mix");
        double total = 0;
        for (const auto& [p, w] : profile_mix) {
            if (w < 0) throw Error("negative profile weight");
            total += w;
        }
        if (std::fabs(total - 1.0) > 1e-9) throw Error("profile weights must sum to 1");
        if (!(position_exponent > 0) || max_positions < 3) throw Error("invalid position distribution");
    }

    static SynthConfig from_json(const nlohmann::json& j) {
        SynthConfig c;
        c.seed = j.value("seed", c.seed);
        c.n_directors = j.value("n_directors", c.n_directors);
        c.n_companies = j.value("n_companies", c.n_companies);
        c.n_addresses = j.value("n_addresses", c.n_addresses);
        c.n_licensed = j.value("n_licensed", c.n_licensed);
        c.n_illegal = j.value("n_illegal", c.n_illegal);
        c.position_exponent = j.value("position_exponent", c.position_exponent);
        c.max_positions = j.value("max_positions", c.max_positions);
        if (j.contains("profile_mix")) {
            c.profile_mix.clear();
            for (const auto& [k, v] : j.at("profile_mix").items()) c.profile_mix[parse_profile(k)] = v.get<double>();
        }
        c.validate();
        return c;
    }
};

struct GroundTruth {
    std::string director_id;
    std::string label;  // licensed | illegal | background
    std::string profile;
};

struct RegisterRow {
    std::string csp_name, registration_number, postcode, street_number, street, city;
};

struct SynthBundle {
    std::vector<CompanyRecord> companies;
    std::vector<DirectorshipRecord> directorships;
    std::vector<LegalEvent> events;
    std::vector<RegisterRow> register_rows;
    std::vector<std::array<std::string, 4>> postcode_lookup;  // street, number, city, postcode
    std::vector<std::string> leak_addresses, leak_companies, leak_officers;
    std::vector<GroundTruth> labels;

    // Writes every file into dir (created if needed).
    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        auto open = [&](const char* name) {
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) throw Error(std::string("cannot write ") + (dir / name).string());
            return out;
        };
        {
            auto out = open("companies.csv");
            write_companies(out, companies);
        }
        {
            auto out = open("directorships.csv");
            write_directorships(out, directorships);
        }
        {
            auto out = open("events.csv");
            write_events(out, events);
        }
        {
            auto out = open("register.csv");
            csv::write_row(out, {"csp_name", "registration_number", "postcode", "street_number", "street", "city"});
            for (const auto& r : register_rows)
                csv::write_row(out, {r.csp_name, r.registration_number, r.postcode, r.street_number, r.street, r.city});
        }
        {
            auto out = open("postcode_lookup.csv");
            csv::write_row(out, {"street", "street_number", "city", "postcode"});
            for (const auto& r : postcode_lookup) csv::write_row(out, {r[0], r[1], r[2], r[3]});
        }
        auto lines = [&](const char* name, const std::vector<std::string>& v) {
            auto out = open(name);
            for (const auto& s : v) out << s << '\n';
        };
        lines("leaks_addresses.txt", leak_addresses);
        lines("leaks_companies.txt", leak_companies);
        lines("leaks_officers.txt", leak_officers);
        {
            auto out = open("labels.csv");
            csv::write_row(out, {"director_id", "label", "profile"});
            for (const auto& l : labels) csv::write_row(out, {l.director_id, l.label, l.profile});
        }
    }
};

inline std::vector<GroundTruth> read_labels(std::istream& in) {
    csv::Reader r(in);
    auto header = r.next();
    if (!header || header->fields != std::vector<std::string>{"director_id", "label", "profile"})
        throw Error("malformed labels header");
    std::vector<GroundTruth> out;
    while (auto row = r.next()) {
        if (row->fields.size() != 3) throw Error("labels.csv line " + std::to_string(row->line) + ": wrong field count");
        out.push_back({row->fields[0], row->fields[1], row->fields[2]});
    }
    return out;
}

namespace synth_detail {

inline const std::vector<std::string>& surnames() {
    static const std::vector<std::string> v = {
        "de Vries", "Jansen", "van den Berg", "Bakker", "Visser", "Smit", "Meijer", "de Boer", "Mulder", "de Groot",
        "Bos", "Vos", "Peters", "Hendriks", "van Leeuwen", "Dekker", "Brouwer", "de Wit", "Dijkstra", "Smits",
        "de Graaf", "van der Meer", "van der Linden", "Kok", "Jacobs", "de Haan", "Vermeulen", "van den Heuvel",
        "van der Veen", "van den Broek", "de Bruijn", "de Jong", "van Dijk", "Schouten", "van Beek", "Willems",
        "van Vliet", "van de Ven", "Hoekstra", "Maas", "Verhoeven", "Koster", "van Dam", "Prins", "Blom",
        "Huisman", "Peeters", "de Lange", "Kuijpers", "van Wijk", "Postma", "Kramer", "van Doorn", "Scholten",
        "Wouters", "Veenstra", "Kuipers", "Bosman", "Hermans", "Sanders", "Timmermans", "Groen", "Gerritsen"};
    return v;
}

inline const std::vector<std::string>& first_names() {
    static const std::vector<std::string> v = {
        "Jan", "Pieter", "Kees", "Willem", "Hendrik", "Johannes", "Cornelis", "Gerrit", "Dirk", "Marco",
        "Anna", "Maria", "Johanna", "Elisabeth", "Cornelia", "Wilhelmina", "Sanne", "Lotte", "Eva", "Femke",
        "Thomas", "Daan", "Bram", "Ruben", "Joost", "Martijn", "Bas", "Ingrid", "Marieke", "Annemiek",
        "Sander", "Erik", "Frank", "Hans", "Paul", "Rob", "Linda", "Monique", "Petra", "Sandra"};
    return v;
}

inline const std::vector<std::string>& words() {
    static const std::vector<std::string> v = {
        "Aurora", "Boreal", "Cedar", "Delta", "Ember", "Fjord", "Granite", "Harbor", "Iris", "Juniper", "Kestrel",
        "Lumen", "Meridian", "Nova", "Orion", "Pinnacle", "Quartz", "Raven", "Summit", "Tidal", "Umbra", "Vertex",
        "Willow", "Xenon", "Yarrow", "Zephyr", "Atlas", "Beacon", "Cobalt", "Dune", "Eagle", "Falcon", "Glacier",
        "Helix", "Indigo", "Jade", "Krypton", "Lotus", "Magnet", "Nimbus", "Onyx", "Polaris", "Quill", "Ridge",
        "Sterling", "Titan", "Unity", "Vista", "Wave", "Zenith", "Alder", "Birch", "Coral", "Drift", "Echo"};
    return v;
}

inline const std::vector<std::string>& streets() {
    static const std::vector<std::string> v = {
        "Herengracht", "Keizersgracht", "Prinsengracht", "Strawinskylaan", "Zuidplein", "Parnassusweg",
        "Beethovenstraat", "Kerkstraat", "Dorpsstraat", "Stationsweg", "Molenweg", "Schoolstraat", "Nieuwstraat",
        "Hoofdstraat", "Marktplein", "Industrieweg", "Havenstraat", "Julianalaan", "Wilhelminastraat",
        "Oranjestraat", "Kanaalweg", "Parallelweg", "Lindelaan", "Eikenlaan", "Beukenlaan", "Vondelstraat",
        "Coolsingel", "Weena", "Blaak", "Lange Voorhout", "Catharijnesingel", "Vredenburg"};
    return v;
}

inline const std::vector<std::string>& cities() {
    static const std::vector<std::string> v = {"AMSTERDAM", "ROTTERDAM", "DEN HAAG",  "UTRECHT", "EINDHOVEN",
                                               "GRONINGEN", "TILBURG",   "ALMERE",    "BREDA",   "NIJMEGEN",
                                               "HAARLEM",   "ARNHEM",    "AMERSFOORT", "ZWOLLE", "LEIDEN"};
    return v;
}

inline const std::vector<std::string>& sector_words() {
    static const std::vector<std::string> v = {"Bouw", "Transport", "Installatietechniek", "Bakkerij", "Metaal",
                                               "Logistiek", "Techniek", "Zorg", "Horeca", "Handel", "Agro",
                                               "Software", "Schilders", "Vastgoed", "Advies"};
    return v;
}

struct Addr {
    std::string postcode, number, street, city;
};

struct Comp {
    std::string name;
    std::string form;
    std::string nace;  // empty = unknown
    std::optional<size_t> office, postal;
    std::string po_box;
    std::string owner_id;  // empty = none; placeholders resolved at emit time
    std::string owner_country;
    std::string kvk;
    std::string branch_of;  // kvk of the parent for branch records
    std::optional<size_t> owner_company;  // owner is another generated company
    std::optional<size_t> owner_director;  // owner is a generated director
    double turnover = -1, assets = -1, employees = -1, profit = 0;
};

struct Dir {
    std::string name;
    std::optional<size_t> entity;  // company index for corporate directors
    std::string label = "background";
    std::string profile;
};

struct Pos {
    size_t dir, comp;
    Status status;
    std::string title;
};

class Generator {
public:
    explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

    SynthBundle run() {
        cfg_.validate();
        make_background_addresses();
        make_background_companies();
        plant_licensed();
        plant_illegal();
        make_background_directors();
        add_background_events();
        make_leaks();
        return emit();
    }

private:
    // -- randomness
    size_t uniform(size_t lo, size_t hi) { return std::uniform_int_distribution<size_t>(lo, hi)(rng_); }
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    bool chance(double p) { return unit() < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[uniform(0, v.size() - 1)]; }
    template <class T>
    T weighted(const std::vector<std::pair<T, double>>& options) {
        double total = 0;
        for (const auto& [v, w] : options) total += w;
        double u = unit() * total;
        for (const auto& [v, w] : options) {
            if (u < w) return v;
            u -= w;
        }
        return options.back().first;
    }

    std::string person_name() { return pick(first_names()) + " " + pick(surnames()); }

    size_t new_address() {
        while (true) {
            Addr a;
            a.postcode = std::to_string(uniform(1000, 9999));
            static const char* letters = "ABCEGHJKLMNPRTVWXZ";
            a.postcode.push_back(letters[uniform(0, 17)]);
            a.postcode.push_back(letters[uniform(0, 17)]);
            a.number = std::to_string(uniform(1, 350));
            if (chance(0.1)) a.number += std::string(1, static_cast<char>('A' + uniform(0, 3)));
            if (!used_addr_.insert(a.postcode + "|" + a.number).second) continue;
            a.street = pick(streets());
            a.city = pick(cities());
            addrs_.push_back(a);
            return addrs_.size() - 1;
        }
    }

    std::string new_kvk() {
        while (true) {
            auto k = std::to_string(uniform(10000000, 99999999));
            if (used_kvk_.insert(k).second) return k;
        }
    }

    std::string foreign_owner_id(const std::string& country) {
        return country + std::to_string(uniform(100000, 999999)) + "G" + std::to_string(owner_seq_++);
    }

    size_t add_company(Comp c) {
        if (c.kvk.empty()) c.kvk = new_kvk();
        comps_.push_back(std::move(c));
        return comps_.size() - 1;
    }

    size_t add_director(Dir d) {
        dirs_.push_back(std::move(d));
        return dirs_.size() - 1;
    }

    void add_position(size_t d, size_t c, Status s, std::string title) {
        if (!pos_keys_.insert({d, c, s == Status::Current}).second) return;
        pos_.push_back({d, c, s, std::move(title)});
    }

    size_t current_positions(size_t d) const {
        size_t n = 0;
        for (const auto& p : pos_) n += p.dir == d && p.status == Status::Current;
        return n;
    }

    void former_address_event(size_t company, size_t addr) {
        const auto& a = addrs_[addr];
        events_.push_back({company, "Formerly: " + a.street + " " + a.number + "|" + a.postcode.substr(0, 4) + " " +
                                        a.postcode.substr(4) + " " + a.city});
    }

    static std::string title_csp() { return "Director"; }

    std::string background_title() {
        return weighted<std::string>({{"Director", 0.4}, {"Bestuurder", 0.2}, {"Commissaris", 0.15},
                                      {"Procuratiehouder", 0.1}, {"", 0.15}});
    }

    std::string productive_nace() {
        return weighted<std::string>({{"1011", 3}, {"1071", 3}, {"2562", 4}, {"2829", 2}, {"4120", 6}, {"4321", 6},
                                      {"4332", 4}, {"4511", 3}, {"4690", 5}, {"4711", 5}, {"4778", 4}, {"4941", 5},
                                      {"5610", 6}, {"6201", 5}, {"7112", 3}, {"7311", 2}, {"8559", 2}, {"8621", 3},
                                      {"8690", 3}, {"0111", 3}, {"0150", 2}, {"9602", 2}, {"6810", 3}, {"7022", 2}});
    }

    std::string background_form() {
        return weighted<std::string>({{"BV", 0.75}, {"VOF", 0.08}, {"Foundation", 0.05}, {"Cooperative", 0.02},
                                      {"CV", 0.02}, {"NV", 0.03}, {"Eenmanszaak", 0.05}});
    }

    std::string ofc_country() { return pick(std::vector<std::string>{"CY", "LU", "VG", "KY", "MT", "CH", "JE", "BM", "PA", "IE"}); }
    std::string onshore_foreign_country() { return pick(std::vector<std::string>{"DE", "BE", "GB", "US", "FR", "ES", "IT", "SE"}); }

    void set_financials(Comp& c, bool holding) {
        double scale = holding ? 1.0 : std::exp(unit() * 6);
        c.turnover = holding ? 0 : std::round(scale * 10000);
        c.assets = std::round(std::exp(unit() * 8) * 1000);
        c.employees = holding ? 0 : static_cast<double>(uniform(0, 200));
        c.profit = std::round((unit() - 0.3) * scale * 1000);
    }

    // Holding-style client of a CSP or illegal director.
    Comp client_company(double p_6420) {
        Comp c;
        c.name = pick(words()) + (chance(0.5) ? " " + pick(words()) : "") +
                 weighted<std::string>({{" Holding B.V.", 0.5}, {" Investments B.V.", 0.2}, {" B.V.", 0.2}, {" N.V.", 0.1}});
        c.form = c.name.find("N.V.") != std::string::npos ? "NV" : "BV";
        if (chance(0.07)) {
            c.name = "Stichting Administratiekantoor " + pick(words());
            c.form = "Foundation";
        }
        double u = unit();
        if (u < p_6420) c.nace = "6420";
        else if (u < p_6420 + 0.12) c.nace = pick(std::vector<std::string>{"6619", "7010", "6499"});
        else if (u < p_6420 + 0.24) c.nace = "6810";
        else c.nace = "";
        c.owner_country = chance(0.6) ? ofc_country() : onshore_foreign_country();
        c.owner_id = foreign_owner_id(c.owner_country);
        set_financials(c, true);
        return c;
    }

    void make_background_addresses() {
        for (size_t i = 0; i < cfg_.n_addresses; ++i) bg_addrs_.push_back(new_address());
    }

    void make_background_companies() {
        // Groups of 1..4 companies share a domestic owner.
        size_t made = 0;
        while (made < cfg_.n_companies) {
            size_t group = std::min(cfg_.n_companies - made, weighted<size_t>({{1, 0.6}, {2, 0.2}, {3, 0.12}, {4, 0.08}}));
            double u = unit();
            std::string owner, country;
            if (u < 0.45) {
                country = "NL";
                owner = "NL" + new_kvk();
            } else if (u < 0.58) {
                country = chance(0.12) ? ofc_country() : onshore_foreign_country();
                owner = foreign_owner_id(country);
            }
            std::string surname = pick(surnames());
            for (size_t i = 0; i < group; ++i, ++made) {
                Comp c;
                c.form = background_form();
                std::string suffix = c.form == "BV" ? " B.V." : c.form == "NV" ? " N.V." : c.form == "VOF" ? " V.O.F." : "";
                c.name = (c.form == "Foundation" ? "Stichting " : "") + surname + " " + pick(sector_words()) + suffix;
                c.nace = chance(0.1) ? "" : productive_nace();
                c.office = pick(bg_addrs_);
                if (chance(0.2)) c.postal = pick(bg_addrs_);
                if (chance(0.05)) c.po_box = "Postbus " + std::to_string(uniform(1, 9999));
                c.owner_id = owner;
                c.owner_country = country.empty() ? "" : country;
                if (!owner.empty() && chance(0.08)) c.owner_country = "";  // owner known, country not recorded
                set_financials(c, false);
                bg_comps_.push_back(add_company(std::move(c)));
            }
        }
    }

    void plant_licensed() {
        if (cfg_.n_licensed == 0) return;
        const size_t n_firms = (cfg_.n_licensed + 4) / 5;
        size_t remaining = cfg_.n_licensed;
        struct Firm {
            size_t company, branch, address;
            std::vector<size_t> members;  // corporate first
            std::vector<size_t> clients;
        };
        std::vector<Firm> firms;
        for (size_t f = 0; f < n_firms; ++f) {
            Firm firm;
            firm.address = new_address();
            reg_addrs_.push_back(firm.address);
            Comp c;
            c.name = weighted<std::string>({{pick(surnames()) + " Trust B.V.", 0.4},
                                            {pick(words()) + " Corporate Services B.V.", 0.3},
                                            {pick(words()) + " Management B.V.", 0.3}});
            c.form = "BV";
            c.nace = pick(std::vector<std::string>{"6619", "8211", "6920", "7022"});
            c.office = firm.address;
            c.postal = firm.address;
            set_financials(c, false);
            firm.company = add_company(c);
            Comp branch = c;
            branch.kvk = comps_[firm.company].kvk + "0001";
            branch.branch_of = comps_[firm.company].kvk;
            branch.office = new_address();
            branch.postal.reset();
            firm.branch = add_company(branch);
            size_t members = std::min<size_t>(remaining, 5);
            remaining -= members;
            for (size_t m = 0; m < members; ++m) {
                Dir d;
                d.label = "licensed";
                if (m == 0) {
                    d.name = comps_[firm.company].name;
                    d.entity = firm.company;
                } else {
                    d.name = person_name();
                }
                firm.members.push_back(add_director(d));
            }
            for (size_t m = 1; m < firm.members.size(); ++m) add_position(firm.members[m], firm.company, Status::Current, "Directeur");
            size_t n_clients = uniform(20, 60);
            for (size_t i = 0; i < n_clients; ++i) {
                Comp cl = client_company(0.7);
                cl.office = chance(0.9) ? firm.address : comps_[firm.branch].office;
                if (chance(0.5)) cl.postal = firm.address;
                firm.clients.push_back(add_company(cl));
            }
            firms.push_back(std::move(firm));
        }
        for (auto& firm : firms) {
            std::vector<size_t> employees(firm.members.begin() + 1, firm.members.end());
            for (auto cl : firm.clients) {
                bool any = false;
                if (chance(0.5) || employees.empty()) {
                    add_position(firm.members[0], cl, Status::Current, title_csp());
                    any = true;
                }
                if (!employees.empty()) {
                    size_t n = uniform(any ? 0 : 1, std::min<size_t>(2, employees.size()));
                    for (size_t i = 0; i < n; ++i)
                        add_position(pick(employees), cl, Status::Current, chance(0.8) ? title_csp() : "Procuratiehouder");
                }
            }
            for (auto m : firm.members)
                while (current_positions(m) < 5) add_position(m, pick(firm.clients), Status::Current, title_csp());
        }
        // Clients that moved between trust offices.
        for (size_t f = 0; f < firms.size(); ++f) {
            for (auto cl : firms[f].clients) {
                if (firms.size() > 1 && chance(0.3)) {
                    const auto& other = firms[(f + 1 + uniform(0, firms.size() - 2)) % firms.size()];
                    if (other.members.size() > 1) add_position(pick(std::vector<size_t>(other.members.begin() + 1, other.members.end())), cl, Status::Previous, title_csp());
                    former_address_event(cl, other.address);
                }
            }
        }
        for (const auto& firm : firms) licensed_firms_.push_back({firm.company, firm.branch});
    }

    void plant_illegal() {
        std::vector<std::pair<EvasionProfile, double>> mix(cfg_.profile_mix.begin(), cfg_.profile_mix.end());
        std::optional<size_t> last_shared;
        for (size_t i = 0; i < cfg_.n_illegal; ++i) {
            auto profile = weighted<EvasionProfile>(mix);
            Dir d;
            d.name = person_name();
            d.label = "illegal";
            d.profile = to_string(profile);
            size_t dir = add_director(d);
            size_t shared = (last_shared && chance(0.25)) ? *last_shared : new_address();
            last_shared = shared;
            size_t k = uniform(4, 15);
            std::vector<size_t> held;
            for (size_t j = 0; j < k; ++j) {
                Comp c = client_company(0.6);
                switch (profile) {
                case EvasionProfile::Concentrated:
                case EvasionProfile::Frontmen:
                    c.office = shared;
                    if (chance(0.5)) c.postal = shared;
                    break;
                case EvasionProfile::FragmentedAddresses:
                    c.office = chance(0.3) ? shared : pick(bg_addrs_);
                    break;
                case EvasionProfile::RotatingStrawmen:
                    c.office = shared;
                    break;
                }
                size_t comp = add_company(c);
                held.push_back(comp);
                add_position(dir, comp, Status::Current, chance(0.85) ? "Director" : "Bestuurder");
                if (!reg_addrs_.empty() && chance(0.2)) former_address_event(comp, pick(reg_addrs_));
            }
            if (profile == EvasionProfile::Frontmen) {
                // Hidden principal sits as a foreign corporate co-director.
                Dir principal;
                principal.name = pick(words()) + " International Ltd";
                principal.profile = "principal";
                illegal_support_.push_back(add_director(principal));
                for (auto c : held) add_position(illegal_support_.back(), c, Status::Current, "Director");
            }
            if (profile == EvasionProfile::RotatingStrawmen) {
                // Previous strawmen on the same companies.
                for (auto c : held) {
                    Dir straw;
                    straw.name = person_name();
                    straw.profile = "strawman";
                    size_t s = add_director(straw);
                    illegal_support_.push_back(s);
                    add_position(s, c, Status::Previous, "Director");
                }
            }
        }
    }

    size_t draw_positions() {
        std::vector<std::pair<size_t, double>> w;
        for (size_t k = 1; k <= cfg_.max_positions; ++k) w.emplace_back(k, std::pow(static_cast<double>(k), -cfg_.position_exponent));
        return weighted(w);
    }

    void make_background_directors() {
        // Principals and strawmen of the illegal profiles count as background.
        if (dirs_.size() > cfg_.n_directors) throw Error("planted structure needs more directors than configured");
        while (dirs_.size() < cfg_.n_directors) {
            size_t k = draw_positions();
            Dir d;
            bool corporate = chance(0.15);
            if (corporate) {
                // Corporate group director: its own holding entity manages operating companies.
                Comp own;
                std::string surname = pick(surnames());
                own.name = surname + weighted<std::string>({{" Beheer B.V.", 0.5}, {" Holding B.V.", 0.3}, {" Groep B.V.", 0.2}});
                own.form = "BV";
                own.nace = chance(0.3) ? "6420" : productive_nace();
                own.office = pick(bg_addrs_);
                own.owner_id = "";
                set_financials(own, false);
                size_t e = add_company(own);
                d.name = comps_[e].name;
                d.entity = e;
            } else {
                d.name = person_name();
            }
            size_t dir = add_director(d);
            if (!corporate && k >= 3 && chance(0.25)) {
                // Family holding group at the director's home address.
                size_t home = pick(bg_addrs_);
                std::string surname = d.name.substr(d.name.find(' ') + 1);
                for (size_t j = 0; j < k; ++j) {
                    Comp c;
                    c.form = "BV";
                    c.name = surname + (j == 0 ? " Holding B.V." : " " + pick(sector_words()) + " B.V.");
                    c.nace = j == 0 ? "6420" : productive_nace();
                    c.office = home;
                    c.owner_director = dir;
                    c.owner_country = "NL";
                    set_financials(c, j == 0);
                    add_position(dir, add_company(c), Status::Current, "Director");
                }
            } else {
                for (size_t j = 0; j < k; ++j) add_position(dir, pick(bg_comps_), Status::Current, background_title());
            }
            if (chance(0.3))
                for (size_t j = uniform(1, 2); j > 0; --j) add_position(dir, pick(bg_comps_), Status::Previous, background_title());
        }
    }

    void add_background_events() {
        for (auto c : bg_comps_) {
            double u = unit();
            if (u < 0.10) {
                former_address_event(c, pick(bg_addrs_));
            } else if (u < 0.11) {
                events_.push_back({c, "Formerly: " + std::to_string(uniform(1, 200)) + " High Street|London SW1A 1AA"});
            } else if (u < 0.12) {
                events_.push_back({c, "Formerly: " + std::to_string(uniform(1, 500)) + " Main St|New York 10001"});
            } else if (u < 0.125) {
                events_.push_back({c, "Formerly: unknown"});
            } else if (u < 0.2) {
                events_.push_back({c, "Change of legal form"});
            }
        }
    }

    void make_leaks() {
        auto lower = [](const std::string& s) { return normalize_leak(s); };
        for (size_t d = 0; d < dirs_.size(); ++d) {
            double p = dirs_[d].label == "illegal" ? 0.3 : dirs_[d].label == "licensed" ? 0.15 : 0.005;
            if (chance(p)) leak_officers_.insert(lower(dirs_[d].name));
        }
        for (size_t c = 0; c < comps_.size(); ++c) {
            bool planted_client = comps_[c].nace == "6420" && !comps_[c].owner_id.empty() && comps_[c].owner_country != "NL";
            if (chance(planted_client ? 0.1 : 0.003)) leak_companies_.insert(lower(comps_[c].name));
        }
        for (auto a : reg_addrs_)
            if (chance(0.4)) leak_addresses_.insert(lower(addrs_[a].street + " " + addrs_[a].number + " " + addrs_[a].postcode));
        for (size_t i = 0; i < 25; ++i)
            leak_addresses_.insert(lower("calle " + std::to_string(uniform(1, 90)) + " " + std::to_string(uniform(1, 99)) + " panama"));
        for (size_t i = 0; i < 25; ++i) leak_companies_.insert(lower(pick(words()) + " offshore limited " + std::to_string(i)));
    }

    static std::string normalize_leak(const std::string& s) { return str::collapse_ws(str::to_lower(s)); }

    SynthBundle emit() {
        SynthBundle b;
        // Shuffled, zero-padded director ids so ordering carries no label signal.
        std::vector<size_t> order(dirs_.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::shuffle(order.begin(), order.end(), rng_);
        std::vector<std::string> dir_id(dirs_.size());
        for (size_t i = 0; i < order.size(); ++i) {
            auto n = std::to_string(i + 1);
            dir_id[order[i]] = "P" + std::string(n.size() < 8 ? 8 - n.size() : 0, '0') + n;
        }
        auto company_id = [&](size_t c) { return "NL" + comps_[c].kvk; };
        for (size_t c = 0; c < comps_.size(); ++c) {
            const auto& s = comps_[c];
            CompanyRecord r;
            r.company_id = company_id(c);
            r.name = s.name;
            r.legal_form = parse_legal_form(s.form);
            if (!s.nace.empty()) r.nace = s.nace;
            auto addr = [&](size_t a) {
                const auto& x = addrs_[a];
                return make_address(x.postcode, x.number, x.street, x.city);
            };
            if (s.office) r.office_address = addr(*s.office);
            if (s.postal) r.postal_address = addr(*s.postal);
            if (!s.po_box.empty()) r.po_box = s.po_box;
            if (s.owner_director) r.guo_id = dir_id[*s.owner_director];
            else if (!s.owner_id.empty()) r.guo_id = s.owner_id;
            if (r.guo_id && !s.owner_country.empty()) r.guo_country = s.owner_country;
            if (s.turnover >= 0) r.turnover = s.turnover;
            if (s.assets >= 0) r.assets = s.assets;
            if (s.employees >= 0) r.employees = s.employees;
            if (s.turnover >= 0) r.profit = s.profit;
            b.companies.push_back(std::move(r));
        }
        std::sort(b.companies.begin(), b.companies.end(), [](const auto& x, const auto& y) { return x.company_id < y.company_id; });
        for (const auto& p : pos_) {
            DirectorshipRecord r;
            r.director_id = dir_id[p.dir];
            r.director_name = dirs_[p.dir].name;
            if (dirs_[p.dir].entity) r.director_company_id = company_id(*dirs_[p.dir].entity);
            r.company_id = company_id(p.comp);
            if (!p.title.empty()) r.title = p.title;
            r.status = p.status;
            b.directorships.push_back(std::move(r));
        }
        std::sort(b.directorships.begin(), b.directorships.end(), [](const auto& x, const auto& y) {
            return std::tie(x.director_id, x.company_id, x.status) < std::tie(y.director_id, y.company_id, y.status);
        });
        for (const auto& [c, desc] : events_) {
            LegalEvent e;
            e.company_id = company_id(c);
            e.description = desc;
            b.events.push_back(std::move(e));
        }
        std::stable_sort(b.events.begin(), b.events.end(), [](const auto& x, const auto& y) { return x.company_id < y.company_id; });

        for (size_t f = 0; f < licensed_firms_.size(); ++f) {
            auto [firm, branch] = licensed_firms_[f];
            const auto& a = addrs_[*comps_[firm].office];
            const auto& ba = addrs_[*comps_[branch].office];
            b.register_rows.push_back({comps_[firm].name, comps_[firm].kvk, a.postcode, a.number, a.street, a.city});
            if (f == 0) {
                // Register row without a postcode, resolved through the lookup table.
                b.register_rows.push_back({comps_[firm].name, comps_[firm].kvk, "", ba.number, ba.street, ba.city});
                b.postcode_lookup.push_back({ba.street, ba.number, ba.city, ba.postcode});
            } else {
                b.register_rows.push_back({comps_[firm].name, comps_[firm].kvk, ba.postcode, ba.number, ba.street, ba.city});
            }
        }
        // Licensed entities absent from the registry extract.
        for (size_t i = 0; i < 2; ++i) b.register_rows.push_back({pick(words()) + " Trustees B.V.", new_kvk(), "", "", "", ""});

        b.leak_addresses.assign(leak_addresses_.begin(), leak_addresses_.end());
        b.leak_companies.assign(leak_companies_.begin(), leak_companies_.end());
        b.leak_officers.assign(leak_officers_.begin(), leak_officers_.end());

        for (size_t d = 0; d < dirs_.size(); ++d)
            b.labels.push_back({dir_id[d], dirs_[d].label, dirs_[d].profile});
        std::sort(b.labels.begin(), b.labels.end(), [](const auto& x, const auto& y) { return x.director_id < y.director_id; });
        return b;
    }

    SynthConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<Addr> addrs_;
    std::set<std::string> used_addr_, used_kvk_;
    std::vector<size_t> bg_addrs_, reg_addrs_, bg_comps_;
    std::vector<Comp> comps_;
    std::vector<Dir> dirs_;
    std::vector<Pos> pos_;
    std::set<std::tuple<size_t, size_t, bool>> pos_keys_;
    std::vector<std::pair<size_t, std::string>> events_;
    std::vector<std::pair<size_t, size_t>> licensed_firms_;
    std::vector<size_t> illegal_support_;
    std::set<std::string> leak_addresses_, leak_companies_, leak_officers_;
    uint64_t owner_seq_ = 0;
};

} // namespace synth_detail

inline SynthBundle synth_generate(const SynthConfig& cfg) { return synth_detail::Generator(cfg).run(); }

// Directors per k with licensure probability c * k^slope, for checking the
// log-log extrapolation against planted counts. The default population keeps
// binomial noise in the k <= 10 bins well under 10%.
struct PowerLawLicensure {
    std::vector<KFraction> observed;       // k = min_observed_k..10
    std::map<int, double> population_at;   // all k
    std::map<int, double> licensed_at;     // realized licensed counts, all k
};

inline PowerLawLicensure planted_power_law(uint64_t seed, double c = 0.002, double slope = 1.5,
                                           double n_at_1 = 5000000, double size_exponent = 2.5,
                                           int min_observed_k = 3) {
    std::mt19937_64 rng(seed);
    PowerLawLicensure out;
    for (int k = 1; k <= 10; ++k) {
        auto n = static_cast<long long>(std::llround(n_at_1 * std::pow(k, -size_exponent)));
        double p = std::min(1.0, c * std::pow(k, slope));
        std::binomial_distribution<long long> draw(n, p);
        double licensed = static_cast<double>(draw(rng));
        out.population_at[k] = static_cast<double>(n);
        out.licensed_at[k] = licensed;
        if (k >= min_observed_k) out.observed.push_back({k, static_cast<double>(n), licensed / static_cast<double>(n)});
    }
    return out;
}

// Evaluation-only stand-in for a human coder, driven by ground truth.
class SimulatedCoder {
public:
    SimulatedCoder(std::map<std::string, std::string> truth, uint64_t seed, double p_unsure = 0.05)
        : truth_(std::move(truth)), rng_(seed), p_unsure_(p_unsure) {}

    int score(const std::string& director_id) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng_) < p_unsure_) return 3;
        auto it = truth_.find(director_id);
        bool csp = it != truth_.end() && (it->second == "illegal" || it->second == "licensed");
        bool high = u(rng_) < 0.5;
        return csp ? (high ? 5 : 4) : (high ? 1 : 2);
    }

private:
    std::map<std::string, std::string> truth_;
    std::mt19937_64 rng_;
    double p_unsure_;
};

} // namespace nomscreen
