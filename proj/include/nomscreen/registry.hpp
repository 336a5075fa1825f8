#pragma once

// Registry extract records (companies, directorships, legal events) and
// their CSV ingestion. Rows that fail validation are rejected with a
// line-numbered reason; nothing is dropped silently.

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/common.hpp"
#include "nomscreen/csv.hpp"

namespace nomscreen {

enum class PostcodeKind { Dutch, UK, US, None };

inline const char* to_string(PostcodeKind k) {
    switch (k) {
    case PostcodeKind::Dutch: return "NL";
    case PostcodeKind::UK: return "UK";
    case PostcodeKind::US: return "US";
    case PostcodeKind::None: return "none";
    }
    return "none";
}

// "1076 az" -> "1076AZ"
inline std::string normalize_postcode(std::string_view raw) {
    return str::to_upper(str::remove_spaces(raw));
}

inline std::string normalize_street_number(std::string_view raw) {
    return str::to_upper(str::remove_spaces(raw));
}

inline bool is_dutch_postcode(std::string_view pc) {
    return pc.size() == 6 && str::all_digits(pc.substr(0, 4)) && pc[4] >= 'A' && pc[4] <= 'Z' &&
           pc[5] >= 'A' && pc[5] <= 'Z';
}

// Identity is (postcode, street_number); street and city are display-only.
struct AddressKey {
    std::string postcode;
    std::string street_number;
    std::string street;
    std::string city;
    PostcodeKind kind = PostcodeKind::Dutch;

    // Only Dutch keys take part in address identity joins.
    bool joinable() const { return kind == PostcodeKind::Dutch && !postcode.empty(); }
    std::string id() const { return postcode + "|" + street_number; }

    friend bool operator==(const AddressKey& a, const AddressKey& b) {
        return a.postcode == b.postcode && a.street_number == b.street_number;
    }
    friend bool operator<(const AddressKey& a, const AddressKey& b) {
        return std::tie(a.postcode, a.street_number) < std::tie(b.postcode, b.street_number);
    }
};

inline AddressKey make_address(std::string_view postcode, std::string_view number, std::string_view street = {},
                               std::string_view city = {}) {
    AddressKey a;
    a.postcode = normalize_postcode(postcode);
    a.street_number = normalize_street_number(number);
    a.street = str::collapse_ws(street);
    a.city = str::collapse_ws(city);
    a.kind = PostcodeKind::Dutch;
    return a;
}

enum class LegalForm { BV, NV, Foundation, VOF, Cooperative, CV, Other };

struct LegalFormValue {
    LegalForm form = LegalForm::Other;
    std::string other;  // raw text when form == Other

    std::string label() const {
        switch (form) {
        case LegalForm::BV: return "BV";
        case LegalForm::NV: return "NV";
        case LegalForm::Foundation: return "Foundation";
        case LegalForm::VOF: return "VOF";
        case LegalForm::Cooperative: return "Cooperative";
        case LegalForm::CV: return "CV";
        case LegalForm::Other: return other;
        }
        return other;
    }
    friend bool operator==(const LegalFormValue&, const LegalFormValue&) = default;
};

inline LegalFormValue parse_legal_form(std::string_view raw) {
    std::string t = str::to_lower(str::collapse_ws(raw));
    std::string compact;
    for (char c : t)
        if (c != '.' && c != ' ') compact.push_back(c);
    if (compact == "bv" || str::contains(t, "besloten vennootschap")) return {LegalForm::BV, {}};
    if (compact == "nv" || str::contains(t, "naamloze vennootschap")) return {LegalForm::NV, {}};
    if (compact == "foundation" || compact == "stichting") return {LegalForm::Foundation, {}};
    if (compact == "vof" || str::contains(t, "vennootschap onder firma")) return {LegalForm::VOF, {}};
    if (compact == "cooperative" || compact == "cooperatie" || compact == "co\xc3\xb6peratie")
        return {LegalForm::Cooperative, {}};
    if (compact == "cv" || str::contains(t, "commanditaire vennootschap")) return {LegalForm::CV, {}};
    return {LegalForm::Other, str::collapse_ws(raw)};
}

struct CompanyRecord {
    std::string company_id;
    std::string name;
    LegalFormValue legal_form;
    std::optional<std::string> nace;  // exactly 4 digits
    std::optional<AddressKey> office_address;
    std::optional<AddressKey> postal_address;
    std::optional<std::string> po_box;
    std::optional<std::string> guo_id;
    std::optional<std::string> guo_country;  // ISO-3166 alpha-2, uppercase
    std::optional<double> turnover;
    std::optional<double> assets;
    std::optional<double> employees;
    std::optional<double> profit;

    // NACE division (first two digits), or -1 when unknown.
    int nace_division() const { return nace ? std::stoi(nace->substr(0, 2)) : -1; }
    int nace_code() const { return nace ? std::stoi(*nace) : -1; }
};

enum class Status { Current, Previous };

inline const char* to_string(Status s) { return s == Status::Current ? "Current" : "Previous"; }

struct DirectorshipRecord {
    std::string director_id;
    std::string director_name;
    std::optional<std::string> director_company_id;  // set for corporate directors
    std::string company_id;
    std::optional<std::string> title;
    Status status = Status::Current;

    bool is_corporate() const { return director_company_id.has_value(); }
    friend bool operator==(const DirectorshipRecord&, const DirectorshipRecord&) = default;
};

struct LegalEvent {
    std::string company_id;
    std::optional<std::string> date;  // YYYY-MM-DD
    std::string description;
    friend bool operator==(const LegalEvent&, const LegalEvent&) = default;
};

struct Rejection {
    std::string file;
    size_t line = 0;
    std::string reason;
};

struct ParseReport {
    size_t companies_accepted = 0;
    size_t directorships_accepted = 0;
    size_t events_accepted = 0;
    std::vector<Rejection> rejections;

    size_t rejected(std::string_view file) const {
        size_t n = 0;
        for (const auto& r : rejections) n += r.file == file;
        return n;
    }

    void write_jsonl(std::ostream& out) const {
        for (const auto& r : rejections) {
            nlohmann::json j{{"file", r.file}, {"line", r.line}, {"reason", r.reason}};
            out << j.dump() << '\n';
        }
    }
};

struct Registry {
    std::vector<CompanyRecord> companies;
    std::vector<DirectorshipRecord> directorships;
    std::vector<LegalEvent> events;
    ParseReport report;
};

inline const std::vector<std::string>& company_columns() {
    static const std::vector<std::string> cols = {
        "company_id",     "name",           "legal_form",    "nace",         "office_postcode",
        "office_number",  "office_street",  "office_city",   "postal_postcode", "postal_number",
        "postal_street",  "postal_city",    "po_box",        "guo_id",       "guo_country",
        "turnover",       "assets",         "employees",     "profit"};
    return cols;
}

inline const std::vector<std::string>& directorship_columns() {
    static const std::vector<std::string> cols = {"director_id", "director_name", "director_company_id",
                                                  "company_id",  "title",         "status"};
    return cols;
}

inline const std::vector<std::string>& event_columns() {
    static const std::vector<std::string> cols = {"company_id", "date", "description"};
    return cols;
}

namespace detail {

inline void check_header(csv::Reader& reader, const std::vector<std::string>& expected, const std::string& file,
                         bool& empty) {
    auto header = reader.next();
    empty = !header.has_value();
    if (empty) return;
    auto fields = header->fields;
    if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
    for (auto& f : fields) f = str::trim(f);
    if (header->malformed || fields != expected)
        throw Error("malformed header in " + file + ": expected " + std::to_string(expected.size()) +
                    " columns starting with '" + expected.front() + "'");
}

inline std::optional<std::string> opt(const std::string& s) {
    auto t = str::trim(s);
    if (t.empty()) return std::nullopt;
    return t;
}

// Returns false on parse failure; empty -> nullopt.
inline bool parse_amount(const std::string& raw, std::optional<double>& out, bool allow_negative) {
    auto t = str::trim(raw);
    if (t.empty()) {
        out.reset();
        return true;
    }
    double v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || !std::isfinite(v)) return false;
    if (!allow_negative && v < 0) return false;
    out = v;
    return true;
}

inline bool valid_date(std::string_view d) {
    if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
    if (!str::all_digits(d.substr(0, 4)) || !str::all_digits(d.substr(5, 2)) || !str::all_digits(d.substr(8, 2)))
        return false;
    int m = std::stoi(std::string(d.substr(5, 2)));
    int day = std::stoi(std::string(d.substr(8, 2)));
    return m >= 1 && m <= 12 && day >= 1 && day <= 31;
}

// Returns an error reason, or empty string when the address parsed.
inline std::string parse_address(const std::string& pc, const std::string& num, const std::string& street,
                                 const std::string& city, std::optional<AddressKey>& out) {
    auto npc = normalize_postcode(pc);
    if (npc.empty()) {
        out.reset();
        if (!str::trim(num).empty() || !str::trim(street).empty()) return "address without postcode";
        return {};
    }
    if (!is_dutch_postcode(npc)) return "invalid postcode";
    out = make_address(npc, num, street, city);
    return {};
}

inline std::string fmt_amount(const std::optional<double>& v) {
    if (!v) return {};
    return csv::format_double(*v);
}

} // namespace detail

inline std::vector<CompanyRecord> parse_companies(std::istream& in, ParseReport& report,
                                                  const std::string& file = "companies.csv") {
    std::vector<CompanyRecord> out;
    csv::Reader reader(in);
    bool empty = false;
    detail::check_header(reader, company_columns(), file, empty);
    if (empty) return out;
    std::set<std::string> seen;
    auto reject = [&](size_t line, std::string reason) { report.rejections.push_back({file, line, std::move(reason)}); };
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (row->malformed) { reject(row->line, "malformed quoting"); continue; }
        if (f.size() != company_columns().size()) { reject(row->line, "wrong field count"); continue; }
        CompanyRecord c;
        c.company_id = str::trim(f[0]);
        if (c.company_id.empty()) { reject(row->line, "missing company_id"); continue; }
        if (seen.count(c.company_id)) { reject(row->line, "duplicate company_id"); continue; }
        c.name = str::collapse_ws(f[1]);
        c.legal_form = parse_legal_form(f[2]);
        auto nace = str::trim(f[3]);
        if (!nace.empty() && str::to_lower(nace) != "unknown") {
            if (nace.size() != 4 || !str::all_digits(nace)) { reject(row->line, "invalid nace"); continue; }
            c.nace = nace;
        }
        if (auto e = detail::parse_address(f[4], f[5], f[6], f[7], c.office_address); !e.empty()) {
            reject(row->line, e);
            continue;
        }
        if (auto e = detail::parse_address(f[8], f[9], f[10], f[11], c.postal_address); !e.empty()) {
            reject(row->line, e);
            continue;
        }
        c.po_box = detail::opt(f[12]);
        c.guo_id = detail::opt(f[13]);
        auto country = str::to_upper(str::trim(f[14]));
        if (!country.empty() && country != "UNKNOWN") {
            if (country.size() != 2 || !std::isupper(static_cast<unsigned char>(country[0])) ||
                !std::isupper(static_cast<unsigned char>(country[1]))) {
                reject(row->line, "invalid guo_country");
                continue;
            }
            c.guo_country = country;
        }
        if (!detail::parse_amount(f[15], c.turnover, false) || !detail::parse_amount(f[16], c.assets, false) ||
            !detail::parse_amount(f[17], c.employees, false) || !detail::parse_amount(f[18], c.profit, true)) {
            reject(row->line, "invalid financial value");
            continue;
        }
        seen.insert(c.company_id);
        out.push_back(std::move(c));
        ++report.companies_accepted;
    }
    return out;
}

inline std::optional<Status> parse_status(std::string_view raw) {
    auto t = str::to_lower(str::trim(raw));
    if (t == "current" || t == "c") return Status::Current;
    if (t == "previous" || t == "p" || t == "former") return Status::Previous;
    return std::nullopt;
}

inline std::vector<DirectorshipRecord> parse_directorships(std::istream& in, ParseReport& report,
                                                          const std::string& file = "directorships.csv") {
    std::vector<DirectorshipRecord> out;
    csv::Reader reader(in);
    bool empty = false;
    detail::check_header(reader, directorship_columns(), file, empty);
    if (empty) return out;
    std::set<std::tuple<std::string, std::string, Status>> seen;
    auto reject = [&](size_t line, std::string reason) { report.rejections.push_back({file, line, std::move(reason)}); };
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (row->malformed) { reject(row->line, "malformed quoting"); continue; }
        if (f.size() != directorship_columns().size()) { reject(row->line, "wrong field count"); continue; }
        DirectorshipRecord d;
        d.director_id = str::trim(f[0]);
        d.director_name = str::collapse_ws(f[1]);
        d.director_company_id = detail::opt(f[2]);
        d.company_id = str::trim(f[3]);
        d.title = detail::opt(f[4]);
        if (d.title) d.title = str::collapse_ws(*d.title);
        if (d.director_id.empty()) { reject(row->line, "missing director_id"); continue; }
        if (d.company_id.empty()) { reject(row->line, "missing company_id"); continue; }
        auto st = parse_status(f[5]);
        if (!st) { reject(row->line, "invalid status"); continue; }
        d.status = *st;
        if (!seen.insert({d.director_id, d.company_id, d.status}).second) {
            reject(row->line, "duplicate directorship");
            continue;
        }
        out.push_back(std::move(d));
        ++report.directorships_accepted;
    }
    return out;
}

inline std::vector<LegalEvent> parse_events(std::istream& in, ParseReport& report,
                                            const std::string& file = "events.csv") {
    std::vector<LegalEvent> out;
    csv::Reader reader(in);
    bool empty = false;
    detail::check_header(reader, event_columns(), file, empty);
    if (empty) return out;
    auto reject = [&](size_t line, std::string reason) { report.rejections.push_back({file, line, std::move(reason)}); };
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (row->malformed) { reject(row->line, "malformed quoting"); continue; }
        if (f.size() != event_columns().size()) { reject(row->line, "wrong field count"); continue; }
        LegalEvent e;
        e.company_id = str::trim(f[0]);
        e.date = detail::opt(f[1]);
        e.description = str::trim(f[2]);
        if (e.company_id.empty()) { reject(row->line, "missing company_id"); continue; }
        if (e.description.empty()) { reject(row->line, "empty description"); continue; }
        if (e.date && !detail::valid_date(*e.date)) { reject(row->line, "invalid date"); continue; }
        out.push_back(std::move(e));
        ++report.events_accepted;
    }
    return out;
}

inline Registry parse_registry(std::istream& companies, std::istream& directorships, std::istream& events) {
    Registry r;
    r.companies = parse_companies(companies, r.report);
    r.directorships = parse_directorships(directorships, r.report);
    r.events = parse_events(events, r.report);
    return r;
}

inline void write_companies(std::ostream& out, const std::vector<CompanyRecord>& companies) {
    csv::write_row(out, company_columns());
    for (const auto& c : companies) {
        auto addr = [](const std::optional<AddressKey>& a) -> std::array<std::string, 4> {
            if (!a) return {};
            return {a->postcode, a->street_number, a->street, a->city};
        };
        auto o = addr(c.office_address);
        auto p = addr(c.postal_address);
        csv::write_row(out, {c.company_id, c.name, c.legal_form.label(), c.nace.value_or(""), o[0], o[1], o[2], o[3],
                             p[0], p[1], p[2], p[3], c.po_box.value_or(""), c.guo_id.value_or(""),
                             c.guo_country.value_or(""), detail::fmt_amount(c.turnover),
                             detail::fmt_amount(c.assets), detail::fmt_amount(c.employees),
                             detail::fmt_amount(c.profit)});
    }
}

inline void write_directorships(std::ostream& out, const std::vector<DirectorshipRecord>& ds) {
    csv::write_row(out, directorship_columns());
    for (const auto& d : ds)
        csv::write_row(out, {d.director_id, d.director_name, d.director_company_id.value_or(""), d.company_id,
                             d.title.value_or(""), to_string(d.status)});
}

inline void write_events(std::ostream& out, const std::vector<LegalEvent>& es) {
    csv::write_row(out, event_columns());
    for (const auto& e : es) csv::write_row(out, {e.company_id, e.date.value_or(""), e.description});
}

} // namespace nomscreen
