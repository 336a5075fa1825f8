#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace nomscreen;
using nomscreen::testing::company;
using nomscreen::testing::position;

namespace {

const AddressKey kRegisterAddr = make_address("1017CE", "500", "Herengracht", "Amsterdam");
const AddressKey kOther = make_address("3011AA", "12", "Coolsingel", "Rotterdam");

LicensedRegister one_entry(std::string name, std::optional<std::string> regno) {
    RegisterEntry e;
    e.csp_name = std::move(name);
    e.registration_number = std::move(regno);
    e.addresses = {kRegisterAddr};
    return LicensedRegister{{e}};
}

std::string id_of(const EntityGraph& g, NodeIndex d) { return g.directors()[d].id; }

} // namespace

TEST(Population, RegisterParsingMergesRowsAndUsesLookup) {
    std::istringstream lookup_in("street,street_number,city,postcode\nRokin,55,Amsterdam,1012 kk\n");
    auto lookup = PostcodeLookup::load(lookup_in);
    std::istringstream in(
        "csp_name,registration_number,postcode,street_number,street,city\n"
        "Alpha Trust B.V.,3000001,1017 CE,500,Herengracht,Amsterdam\n"
        "Alpha Trust B.V.,3000001,,55,Rokin,Amsterdam\n"
        "Alpha Trust B.V.,3000001,1017CE,500,Herengracht,Amsterdam\n"
        "Beta Trust,,XX,1,S,C\n"
        ",1,,,,\n");
    RegisterParseReport rep;
    auto reg = parse_register(in, &lookup, &rep);
    ASSERT_EQ(reg.entries.size(), 2u);
    EXPECT_EQ(reg.entries[0].addresses.size(), 2u);
    EXPECT_EQ(reg.entries[0].addresses[1].postcode, "1012KK");
    EXPECT_FALSE(reg.entries[1].registration_number);
    ASSERT_EQ(rep.rejections.size(), 2u);
    EXPECT_EQ(rep.rejections[0].reason, "invalid postcode");
    EXPECT_EQ(rep.rejections[1].reason, "missing csp_name");
}

TEST(Population, RegistrationNumberCoversBranches) {
    EXPECT_TRUE(registration_matches("NL30000010", "3000001"));
    EXPECT_TRUE(registration_matches("NL30000019", "3000001"));
    EXPECT_TRUE(registration_matches("30000010", "3000001"));
    EXPECT_FALSE(registration_matches("NL30000020", "3000001"));
    EXPECT_FALSE(registration_matches("NL30000010", ""));
}

TEST(Population, MatchedIdEmployeesAndAugmentedAddresses) {
    std::vector<CompanyRecord> cs = {
        company("NL30000010", "Alpha Trust B.V.", kOther),
        company("NL30000011", "Alpha Trust Branch", std::nullopt, make_address("1076AZ", "1")),
        company("NL50000000", "Client One B.V.", kRegisterAddr),
    };
    std::vector<DirectorshipRecord> ds = {
        position("CORP", "NL50000000", Status::Current, "Alpha Trust B.V.", "NL30000010"),
        position("E1", "NL30000010", Status::Current, "E. One"),
        position("E2", "NL30000010", Status::Previous, "E. Two"),
        position("OTHER", "NL50000000", Status::Current, "Someone Else"),
    };
    auto g = EntityGraph::build(cs, ds, {});
    auto pop = match_register(one_entry("Alpha Trust B.V.", "3000001"), g);
    ASSERT_EQ(pop.licensed.size(), 1u);
    EXPECT_EQ(id_of(g, pop.licensed.begin()->first), "CORP");
    EXPECT_EQ(pop.licensed.begin()->second.provenance, Provenance::MatchedId);
    EXPECT_EQ(pop.report.matched_companies.at(0).size(), 2u);
    EXPECT_EQ(pop.csp_addresses.at(kRegisterAddr), AddressTag::Register);
    EXPECT_EQ(pop.csp_addresses.at(kOther), AddressTag::Augmented);
    EXPECT_EQ(pop.csp_addresses.at(make_address("1076AZ", "1")), AddressTag::Augmented);

    add_employees(pop, g);
    std::set<std::string> ids;
    for (const auto& [d, e] : pop.licensed) ids.insert(id_of(g, d));
    EXPECT_EQ(ids, (std::set<std::string>{"CORP", "E1"}));
    EXPECT_EQ(pop.count(Provenance::EmployeeOfCsp), 1u);
}

TEST(Population, FuzzyNameMatchAboveThresholdOnly) {
    std::vector<CompanyRecord> cs = {company("NL1", "A"), company("NL2", "B")};
    std::vector<DirectorshipRecord> ds = {
        position("NEAR", "NL1", Status::Current, "Sempter Fidelis Beheer B.V.", "NL900"),
        position("FAR", "NL2", Status::Current, "Vita Management Services B.V.", "NL901"),
    };
    auto g = EntityGraph::build(cs, ds, {});
    LicensedRegister reg{{RegisterEntry{"Sempter Fidelis B.V.", std::nullopt, {}},
                          RegisterEntry{"Vistra Management Services B.V.", std::nullopt, {}}}};
    // Same corpus the matcher fits on: director names plus register names.
    auto vocab = TrigramVocabulary::fit({"Sempter Fidelis Beheer B.V.", "Vita Management Services B.V.",
                                         "Sempter Fidelis B.V.", "Vistra Management Services B.V."});
    double near = cosine(vocab.vectorize("Sempter Fidelis B.V."), vocab.vectorize("Sempter Fidelis Beheer B.V."));
    double far = cosine(vocab.vectorize("Vistra Management Services B.V."), vocab.vectorize("Vita Management Services B.V."));
    ASSERT_GT(near, far);
    PopulationConfig cfg;
    cfg.name_threshold = (near + far) / 2;
    auto pop = match_register(reg, g, cfg);
    ASSERT_EQ(pop.licensed.size(), 1u);
    EXPECT_EQ(id_of(g, pop.licensed.begin()->first), "NEAR");
    EXPECT_EQ(pop.licensed.begin()->second.provenance, Provenance::NameMatch);
    EXPECT_DOUBLE_EQ(pop.licensed.begin()->second.similarity, near);
    EXPECT_EQ(pop.report.unmatched_entries, (std::vector<size_t>{1}));
}

TEST(Population, AffiliationThresholdsAgainstBruteForce) {
    std::mt19937_64 rng(17);
    std::vector<AddressKey> pool;
    for (int i = 0; i < 12; ++i) pool.push_back(make_address(std::to_string(2000 + i) + "AB", "1"));
    std::vector<CompanyRecord> cs;
    for (int i = 0; i < 200; ++i) {
        auto c = company("NL" + std::to_string(100 + i), "C" + std::to_string(i), pool[rng() % pool.size()]);
        if (rng() % 4 == 0) c.postal_address = pool[rng() % pool.size()];
        cs.push_back(c);
    }
    std::vector<DirectorshipRecord> ds;
    std::set<std::pair<int, int>> seen;
    for (int k = 0; k < 1200; ++k) {
        int d = static_cast<int>(rng() % 150), c = static_cast<int>(rng() % 200);
        if (!seen.insert({d, c}).second) continue;
        ds.push_back(position("D" + std::to_string(d), cs[static_cast<size_t>(c)].company_id));
    }
    auto g = EntityGraph::build(cs, ds, {});

    CspPopulation pop;
    for (int i = 0; i < 3; ++i) pop.csp_addresses[pool[static_cast<size_t>(i)]] = AddressTag::Register;
    for (int i = 3; i < 6; ++i) pop.csp_addresses[pool[static_cast<size_t>(i)]] = AddressTag::Augmented;
    std::set<std::string> seed_ids;
    for (NodeIndex d = 0; d < g.directors().size(); d += 9) {
        pop.licensed[d] = LicensedEntry{Provenance::MatchedId, {}, {}};
        seed_ids.insert(id_of(g, d));
    }

    // Oracle over raw records.
    std::map<std::string, std::set<std::string>> managed;
    std::map<std::string, std::set<std::string>> board;
    for (const auto& r : ds) {
        managed[r.director_id].insert(r.company_id);
        board[r.company_id].insert(r.director_id);
    }
    std::map<std::string, const CompanyRecord*> by_id;
    for (const auto& c : cs) by_id[c.company_id] = &c;
    auto tag = [&](const std::optional<AddressKey>& a) -> int {
        if (!a) return 0;
        auto it = pop.csp_addresses.find(*a);
        if (it == pop.csp_addresses.end()) return 0;
        return it->second == AddressTag::Register ? 2 : 1;
    };
    std::map<std::string, AffiliationCriterion> want;
    for (const auto& [d, comps] : managed) {
        if (comps.size() < 3 || seed_ids.count(d)) continue;
        double reg = 0, any = 0, co = 0;
        for (const auto& c : comps) {
            int t = std::max(tag(by_id[c]->office_address), tag(by_id[c]->postal_address));
            reg += t == 2;
            any += t >= 1;
            bool shared = false;
            for (const auto& o : board[c]) shared = shared || (o != d && seed_ids.count(o));
            co += shared;
        }
        double n = static_cast<double>(comps.size());
        bool c1 = reg / n > 0.25 && co / n > 0.20;
        bool c2 = any / n > 0.50 && co / n > 0.50;
        if (c1 && c2) want[d] = AffiliationCriterion::Both;
        else if (c1) want[d] = AffiliationCriterion::Register25_20;
        else if (c2) want[d] = AffiliationCriterion::Augmented50_50;
    }
    ASSERT_GT(want.size(), 3u);

    infer_affiliated(pop, g);
    std::map<std::string, AffiliationCriterion> got;
    for (const auto& [d, e] : pop.licensed)
        if (e.provenance == Provenance::Affiliated) got[id_of(g, d)] = *e.criterion;
    EXPECT_EQ(got, want);
}

TEST(Population, NegativesAvoidExcludedSectors) {
    std::vector<CompanyRecord> cs;
    for (int i = 0; i < 9; ++i) {
        std::optional<std::string> nace = "4711";
        if (i == 5) nace = "6420";
        if (i >= 6) nace = std::nullopt;
        cs.push_back(company("NL" + std::to_string(i), "C", std::nullopt, std::nullopt, std::nullopt, std::nullopt, nace));
    }
    std::vector<DirectorshipRecord> ds;
    auto corp = [&](std::string d, std::vector<int> comps, bool corporate = true) {
        for (int c : comps)
            ds.push_back(position(d, "NL" + std::to_string(c), Status::Current, d + " B.V.",
                                  corporate ? std::optional<std::string>("NL9" + d) : std::nullopt));
    };
    corp("GOOD", {0, 1, 2});
    corp("MIXED", {0, 1, 6});     // unknown sector neither qualifies nor disqualifies
    corp("FIN", {0, 1, 5});       // one excluded company disqualifies
    corp("UNKNOWN", {6, 7, 8});   // no known sector
    corp("SMALL", {0, 1});        // not eligible
    corp("PERSON", {2, 3, 4}, false);
    corp("LIC", {2, 3, 4});
    auto g = EntityGraph::build(cs, ds, {});
    std::set<NodeIndex> licensed = {*g.director("LIC")};
    std::set<std::string> got;
    for (auto d : select_negatives(g, licensed)) got.insert(id_of(g, d));
    EXPECT_EQ(got, (std::set<std::string>{"GOOD", "MIXED"}));
}

TEST(Population, BuildKeepsNegativesDisjointOnSyntheticBundle) {
    SynthConfig cfg;
    cfg.n_directors = 1500;
    cfg.n_companies = 2000;
    cfg.n_addresses = 1000;
    cfg.n_licensed = 20;
    cfg.n_illegal = 10;
    auto b = synth_generate(cfg);
    auto g = EntityGraph::build(b.companies, b.directorships, b.events);
    auto dir = nomscreen::testing::scratch_dir("population_bundle");
    b.write(dir);
    std::ifstream lookup_in(dir / "postcode_lookup.csv"), reg_in(dir / "register.csv");
    auto lookup = PostcodeLookup::load(lookup_in);
    auto reg = parse_register(reg_in, &lookup);
    auto pop = build_population(reg, g);
    EXPECT_GT(pop.licensed.size(), 0u);
    EXPECT_GT(pop.negatives.size(), 0u);
    for (auto d : pop.negatives) EXPECT_FALSE(pop.is_licensed(d));
}
