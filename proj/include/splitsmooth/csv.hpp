#pragma once

// Minimal RFC 4180 reading and writing.

#include <iosfwd>
#include <string>
#include <vector>

namespace splitsmooth::csv {

struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;  ///< 1-based line where the record starts
};

/// Splits text into records. Quoted fields may contain delimiters, doubled
/// quotes and line breaks. Blank lines are skipped. Throws InvalidArgument on
/// an unterminated quote.
std::vector<Record> parse(const std::string& text, char delimiter = ',');

std::string escape(const std::string& field, char delimiter = ',');

/// Shortest round-trip decimal form.
std::string format_number(double value);

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

/// Strict decimal parse of a whole field; throws InvalidArgument otherwise.
double parse_number(const std::string& field);

}  // namespace splitsmooth::csv
