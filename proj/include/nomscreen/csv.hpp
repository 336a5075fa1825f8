#pragma once

// Minimal RFC 4180 reader/writer. Quoted fields may contain commas,
// doubled quotes and newlines; line numbers refer to the physical line on
// which a record starts (header is line 1).

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nomscreen/common.hpp"

namespace nomscreen::csv {

struct Row {
    std::vector<std::string> fields;
    size_t line = 0;
    bool malformed = false;  // unterminated quote or stray quote inside a field
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::optional<Row> next() {
        Row row;
        std::string field;
        bool in_quotes = false;
        bool field_was_quoted = false;
        bool any = false;
        row.line = line_ + 1;
        int ch;
        while ((ch = in_.get()) != EOF) {
            any = true;
            char c = static_cast<char>(ch);
            if (in_quotes) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"') {
                if (field.empty() && !field_was_quoted) {
                    in_quotes = true;
                    field_was_quoted = true;
                } else {
                    row.malformed = true;
                    field.push_back(c);
                }
            } else if (c == ',') {
                row.fields.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
            } else if (c == '\r') {
                if (in_.peek() == '\n') continue;
            } else if (c == '\n') {
                ++line_;
                row.fields.push_back(std::move(field));
                if (row.fields.size() == 1 && row.fields[0].empty() && !field_was_quoted) {
                    // blank line
                    row = Row{};
                    row.line = line_ + 1;
                    field.clear();
                    any = false;
                    continue;
                }
                return row;
            } else {
                if (field_was_quoted) row.malformed = true;
                field.push_back(c);
            }
        }
        if (!any) return std::nullopt;
        if (in_quotes) row.malformed = true;
        ++line_;
        row.fields.push_back(std::move(field));
        return row;
    }

private:
    std::istream& in_;
    size_t line_ = 0;
};

inline std::string quote(const std::string& s) {
    bool needs = s.find_first_of(",\"\n\r") != std::string::npos ||
                 (!s.empty() && (str::is_space(s.front()) || str::is_space(s.back())));
    if (!needs) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << quote(fields[i]);
    }
    out << '\n';
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace nomscreen::csv
