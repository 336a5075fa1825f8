#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace nomscreen;

namespace {

const char* kCompanyHeader =
    "company_id,name,legal_form,nace,office_postcode,office_number,office_street,office_city,postal_postcode,"
    "postal_number,postal_street,postal_city,po_box,guo_id,guo_country,turnover,assets,employees,profit\n";

std::vector<CompanyRecord> parse(const std::string& body, ParseReport& rep) {
    std::istringstream in(kCompanyHeader + body);
    return parse_companies(in, rep);
}

} // namespace

TEST(Registry, ParsesCompanyRow) {
    ParseReport rep;
    auto cs = parse("NL123,\"Alpha, Holding B.V.\",B.V.,6420,1017 ce,500,Herengracht,Amsterdam,,,,,,GUO1,nl,10.5,,3,-2\n", rep);
    ASSERT_EQ(cs.size(), 1u);
    EXPECT_TRUE(rep.rejections.empty());
    const auto& c = cs[0];
    EXPECT_EQ(c.name, "Alpha, Holding B.V.");
    EXPECT_EQ(c.legal_form.form, LegalForm::BV);
    EXPECT_EQ(c.nace_division(), 64);
    EXPECT_EQ(c.nace_code(), 6420);
    ASSERT_TRUE(c.office_address);
    EXPECT_EQ(c.office_address->postcode, "1017CE");
    EXPECT_FALSE(c.postal_address);
    EXPECT_EQ(c.guo_country, "NL");
    EXPECT_DOUBLE_EQ(*c.profit, -2.0);
    EXPECT_FALSE(c.assets);
}

TEST(Registry, RejectsInvalidRowsWithLineNumbers) {
    ParseReport rep;
    auto cs = parse(
        "NL1,A,BV,6420,1017CE,1,S,C,,,,,,,,,,,\n"
        "NL1,Dup,BV,6420,1017CE,1,S,C,,,,,,,,,,,\n"
        "NL2,B,BV,64,1017CE,1,S,C,,,,,,,,,,,\n"
        "NL3,C,BV,,ABCDEF,1,S,C,,,,,,,,,,,\n"
        "NL4,D,BV,,,1,Street,C,,,,,,,,,,,\n"
        "NL5,E,BV,,,,,,,,,,,,NLD,,,,\n"
        "NL6,F,BV,,,,,,,,,,,,,-5,,,\n"
        "NL7,G,BV\n"
        "NL8,H,BV,unknown,,,,,,,,,,,,,,,\n",
        rep);
    ASSERT_EQ(cs.size(), 2u);
    EXPECT_EQ(cs[1].company_id, "NL8");
    EXPECT_FALSE(cs[1].nace);
    ASSERT_EQ(rep.rejections.size(), 7u);
    EXPECT_EQ(rep.rejections[0].line, 3u);
    EXPECT_EQ(rep.rejections[0].reason, "duplicate company_id");
    EXPECT_EQ(rep.rejections[1].reason, "invalid nace");
    EXPECT_EQ(rep.rejections[2].reason, "invalid postcode");
    EXPECT_EQ(rep.rejections[3].reason, "address without postcode");
    EXPECT_EQ(rep.rejections[4].reason, "invalid guo_country");
    EXPECT_EQ(rep.rejections[5].reason, "invalid financial value");
    EXPECT_EQ(rep.rejections[6].reason, "wrong field count");
}

TEST(Registry, MalformedHeaderThrows) {
    ParseReport rep;
    std::istringstream in("id,name\nNL1,A\n");
    EXPECT_THROW(parse_companies(in, rep), Error);
}

TEST(Registry, DirectorshipStatusAndDuplicates) {
    std::istringstream in(
        "director_id,director_name,director_company_id,company_id,title,status\n"
        "D1,  A.  Jansen ,,NL1,  Managing   Director ,Current\n"
        "D1,A. Jansen,,NL1,,previous\n"
        "D1,A. Jansen,,NL1,,C\n"
        "D2,Beheer B.V.,NL9,NL1,,sometimes\n");
    ParseReport rep;
    auto ds = parse_directorships(in, rep);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds[0].director_name, "A. Jansen");
    EXPECT_EQ(ds[0].title, "Managing Director");
    EXPECT_EQ(ds[1].status, Status::Previous);
    EXPECT_FALSE(ds[1].title);
    ASSERT_EQ(rep.rejections.size(), 2u);
    EXPECT_EQ(rep.rejections[0].reason, "duplicate directorship");
    EXPECT_EQ(rep.rejections[1].reason, "invalid status");
}

TEST(Registry, EventDates) {
    std::istringstream in(
        "company_id,date,description\n"
        "NL1,2019-02-30,Formerly: Dam 1|1012 JS AMSTERDAM\n"
        "NL1,2019-13-01,x\n"
        "NL1,,undated\n"
        "NL1,2019-01-01,\n");
    ParseReport rep;
    auto es = parse_events(in, rep);
    ASSERT_EQ(es.size(), 2u);
    EXPECT_FALSE(es[1].date);
    ASSERT_EQ(rep.rejections.size(), 2u);
    EXPECT_EQ(rep.rejections[0].reason, "invalid date");
    EXPECT_EQ(rep.rejections[1].reason, "empty description");
}

TEST(Registry, ThousandCompanyRoundTripIsByteIdentical) {
    std::mt19937_64 rng(42);
    std::vector<CompanyRecord> cs;
    const char* forms[] = {"BV", "Stichting", "VOF", "NV", "Cooperatie", "CV", "Ltd"};
    for (int i = 0; i < 1000; ++i) {
        CompanyRecord c;
        c.company_id = "NL" + std::to_string(10000000 + i);
        c.name = "Company \"" + std::to_string(i) + "\", part " + std::to_string(rng() % 7);
        c.legal_form = parse_legal_form(forms[rng() % 7]);
        if (rng() % 5) c.nace = std::to_string(1000 + rng() % 9000);
        if (rng() % 4) c.office_address = make_address(std::to_string(1000 + rng() % 9000) + "AB", std::to_string(rng() % 300), "Street", "City");
        if (rng() % 3 == 0) c.postal_address = make_address("1017CE", "500", "Herengracht", "Amsterdam");
        if (rng() % 2) c.guo_id = "G" + std::to_string(rng() % 100);
        if (rng() % 2) c.guo_country = "NL";
        if (rng() % 2) c.turnover = static_cast<double>(rng() % 1000000) / 7.0;
        if (rng() % 2) c.profit = -static_cast<double>(rng() % 1000) / 3.0;
        cs.push_back(std::move(c));
    }
    std::ostringstream first;
    write_companies(first, cs);
    ParseReport rep;
    std::istringstream in(first.str());
    auto back = parse_companies(in, rep);
    ASSERT_TRUE(rep.rejections.empty());
    ASSERT_EQ(back.size(), 1000u);
    std::ostringstream second;
    write_companies(second, back);
    EXPECT_EQ(first.str(), second.str());
    for (size_t i = 0; i < cs.size(); ++i) {
        EXPECT_EQ(back[i].name, cs[i].name);
        EXPECT_EQ(back[i].turnover, cs[i].turnover);
        EXPECT_EQ(back[i].profit, cs[i].profit);
    }
}

TEST(Registry, LegalFormLabels) {
    EXPECT_EQ(parse_legal_form("Besloten Vennootschap").form, LegalForm::BV);
    EXPECT_EQ(parse_legal_form("stichting").label(), "Foundation");
    EXPECT_EQ(parse_legal_form("V.O.F.").form, LegalForm::VOF);
    EXPECT_EQ(parse_legal_form("Co\xc3\xb6peratie").form, LegalForm::Cooperative);
    EXPECT_EQ(parse_legal_form("  Limited   Partnership ").label(), "Limited Partnership");
}
