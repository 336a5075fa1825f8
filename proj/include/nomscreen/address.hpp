#pragma once

// Splitting of legacy "Formerly: Street Number|Postcode CITY" legal-event
// strings into address fields.
//
// Right of the bar: postcode patterns tried in order (Dutch, UK, US), first
// match wins. Left of the bar: street-first pattern, then number-first.
// The postcode patterns are anchored on word boundaries so that a five-digit
// US zip ("10001 NEW YORK") is not read as a Dutch "0001 NE", and the right
// part is upper-cased before matching.

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "nomscreen/common.hpp"
#include "nomscreen/registry.hpp"

namespace nomscreen {

struct SplitAddress {
    std::string street;
    std::string number;
    std::optional<std::string> postcode;  // normalized: no spaces, uppercase
    std::optional<std::string> city;
    PostcodeKind postcode_kind = PostcodeKind::None;

    friend bool operator==(const SplitAddress&, const SplitAddress&) = default;
};

namespace detail {

struct AddressPatterns {
    std::regex dutch{R"(\b\d{4}\s?[A-Z]{2}\b)"};
    std::regex uk{R"(\b([A-Z][A-HJ-Y]?\d[A-Z\d]? ?\d[A-Z]{2}|GIR ?0A{2})\b)"};
    std::regex us{R"(\b([A-Z]?-?\d{4,5})(-\d{4})*\b)"};
    std::regex street_first{R"(^(.*?)\s+(\d*\w*(\-|\/)?\d+.*)$)"};
    std::regex number_first{R"(^(\d*\w*(\-|\/)?\d+.*?)\s+(.*?)$)"};
};

inline const AddressPatterns& patterns() {
    static const AddressPatterns p;
    return p;
}

} // namespace detail

inline bool has_former_marker(std::string_view description) {
    return str::contains(str::to_lower(description), "formerly:");
}

// Returns std::nullopt when neither side matches any pattern.
inline std::optional<SplitAddress> split_former_address(std::string_view description) {
    const auto& pat = detail::patterns();
    std::string s(description);
    auto lower = str::to_lower(s);
    if (auto pos = lower.find("formerly:"); pos != std::string::npos) s = s.substr(pos + 9);
    std::string left, right;
    if (auto bar = s.find('|'); bar != std::string::npos) {
        left = str::collapse_ws(s.substr(0, bar));
        right = str::collapse_ws(s.substr(bar + 1));
    } else {
        left = str::collapse_ws(s);
    }

    SplitAddress out;
    bool matched = false;

    std::smatch m;
    if (std::regex_match(left, m, pat.street_first)) {
        out.street = str::trim(m[1].str());
        out.number = str::trim(m[2].str());
        matched = true;
    } else if (std::regex_match(left, m, pat.number_first)) {
        out.number = str::trim(m[1].str());
        out.street = str::trim(m[3].str());
        matched = true;
    }

    if (!right.empty()) {
        const std::string upper = str::to_upper(right);
        const std::pair<const std::regex*, PostcodeKind> order[] = {
            {&pat.dutch, PostcodeKind::Dutch}, {&pat.uk, PostcodeKind::UK}, {&pat.us, PostcodeKind::US}};
        for (const auto& [re, kind] : order) {
            std::smatch pm;
            if (std::regex_search(upper, pm, *re)) {
                out.postcode = normalize_postcode(pm.str(0));
                out.postcode_kind = kind;
                auto before = str::trim(right.substr(0, static_cast<size_t>(pm.position(0))));
                auto after = str::trim(right.substr(static_cast<size_t>(pm.position(0) + pm.length(0))));
                auto city = str::collapse_ws(before.empty() ? after : (after.empty() ? before : before + " " + after));
                if (!city.empty()) out.city = city;
                matched = true;
                break;
            }
        }
        // No postcode: the whole right part is the city.
        if (!out.postcode) out.city = right;
    }
    if (!matched) return std::nullopt;
    return out;
}

struct PreviousAddressDiagnostics {
    size_t marked_events = 0;
    size_t parsed = 0;
    size_t unparseable = 0;
};

// company_id -> previous addresses in event order. Foreign postcodes are
// kept (kind UK/US/None) but never join with Dutch keys.
inline std::map<std::string, std::vector<AddressKey>> extract_previous_addresses(
    const std::vector<LegalEvent>& events, PreviousAddressDiagnostics* diag = nullptr) {
    std::map<std::string, std::vector<AddressKey>> out;
    PreviousAddressDiagnostics d;
    for (const auto& e : events) {
        if (!has_former_marker(e.description)) continue;
        ++d.marked_events;
        auto split = split_former_address(e.description);
        if (!split) {
            ++d.unparseable;
            continue;
        }
        ++d.parsed;
        AddressKey a;
        a.postcode = split->postcode.value_or("");
        a.street_number = normalize_street_number(split->number);
        a.street = split->street;
        a.city = split->city.value_or("");
        a.kind = split->postcode_kind;
        out[e.company_id].push_back(std::move(a));
    }
    if (diag) *diag = d;
    return out;
}

} // namespace nomscreen
