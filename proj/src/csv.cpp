#include "splitsmooth/csv.hpp"

#include "splitsmooth/common.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace splitsmooth::csv {

std::vector<Record> parse(const std::string& text, char delimiter) {
    std::vector<Record> out;
    Record rec;
    std::string field;
    bool quoted = false;
    bool any = false;  // current record has content
    std::size_t line = 1;
    rec.line = 1;

    auto end_record = [&] {
        if (any || !rec.fields.empty()) {
            rec.fields.push_back(std::move(field));
            out.push_back(std::move(rec));
        }
        rec = Record{};
        field.clear();
        any = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == delimiter) {
            rec.fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (ch == '\r') {
            // tolerated before \n
        } else if (ch == '\n') {
            end_record();
            ++line;
            rec.line = line;
        } else {
            field.push_back(ch);
            any = true;
        }
    }
    if (quoted) throw InvalidArgument("unterminated quoted field starting on line " + std::to_string(rec.line));
    end_record();
    return out;
}

std::string escape(const std::string& field, char delimiter) {
    if (field.find_first_of(std::string{'"', '\n', '\r', delimiter}) == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << delimiter;
        out << escape(fields[i], delimiter);
    }
    out << '\n';
}

double parse_number(const std::string& field) {
    std::size_t b = 0;
    std::size_t e = field.size();
    while (b < e && (field[b] == ' ' || field[b] == '\t')) ++b;
    while (e > b && (field[e - 1] == ' ' || field[e - 1] == '\t')) --e;
    if (b == e) throw InvalidArgument("empty numeric field");
    if (field[b] == '+') ++b;
    double value = 0.0;
    const auto res = std::from_chars(field.data() + b, field.data() + e, value);
    if (res.ec != std::errc{} || res.ptr != field.data() + e || !std::isfinite(value)) {
        throw InvalidArgument("'" + field + "' is not a number");
    }
    return value;
}

}  // namespace splitsmooth::csv
