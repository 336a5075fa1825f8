#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace nomscreen;

TEST(Address, LocatellikadeExample) {
    auto s = split_former_address("Formerly: Locatellikade 1|1076 AZ AMSTERDAM");
    ASSERT_TRUE(s);
    EXPECT_EQ(s->street, "Locatellikade");
    EXPECT_EQ(s->number, "1");
    EXPECT_EQ(s->postcode, "1076AZ");
    EXPECT_EQ(s->city, "AMSTERDAM");
    EXPECT_EQ(s->postcode_kind, PostcodeKind::Dutch);
}

TEST(Address, HandLabeledCorpus) {
    auto corpus = nomscreen::testing::load_address_corpus();
    ASSERT_EQ(corpus.size(), 50u);
    for (const auto& row : corpus) {
        auto s = split_former_address(row.description);
        ASSERT_TRUE(s) << row.description;
        EXPECT_EQ(s->street, row.expected.street) << row.description;
        EXPECT_EQ(s->number, row.expected.number) << row.description;
        EXPECT_EQ(s->postcode, row.expected.postcode) << row.description;
        EXPECT_EQ(s->city, row.expected.city) << row.description;
        EXPECT_EQ(s->postcode_kind, row.expected.postcode_kind) << row.description;
    }
}

TEST(Address, NothingMatches) {
    EXPECT_FALSE(split_former_address("Formerly: unknown"));
    EXPECT_FALSE(split_former_address("Formerly: "));
}

TEST(Address, MarkerIsCaseInsensitive) {
    EXPECT_TRUE(has_former_marker("FORMERLY: Dam 1"));
    EXPECT_FALSE(has_former_marker("Change of legal form"));
}

TEST(Address, PreviousAddressesPerCompany) {
    std::vector<LegalEvent> events = {
        {"NL1", "2010-01-01", "Formerly: Dam 1|1012 JS AMSTERDAM"},
        {"NL1", "2011-01-01", "Formerly: 14 Baker Street|London NW1 6XE"},
        {"NL1", "2012-01-01", "Change of legal form"},
        {"NL2", std::nullopt, "Formerly: address unknown"},
        {"NL2", std::nullopt, "Formerly: Rokin 55 |1012 KK AMSTERDAM"},
        {"NL3", std::nullopt, "formerly: Weena 505 a|3013 AL ROTTERDAM"},
    };
    PreviousAddressDiagnostics diag;
    auto prev = extract_previous_addresses(events, &diag);
    EXPECT_EQ(diag.marked_events, 5u);
    EXPECT_EQ(diag.parsed, 4u);
    EXPECT_EQ(diag.unparseable, 1u);
    ASSERT_EQ(prev["NL1"].size(), 2u);
    EXPECT_TRUE(prev["NL1"][0].joinable());
    EXPECT_EQ(prev["NL1"][0].id(), "1012JS|1");
    EXPECT_FALSE(prev["NL1"][1].joinable());
    EXPECT_EQ(prev["NL1"][1].kind, PostcodeKind::UK);
    ASSERT_EQ(prev["NL2"].size(), 1u);
    EXPECT_EQ(prev["NL3"][0].street_number, "505A");
}
