#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace narrative::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes, and newlines.
/// Records are returned with the 1-based physical line on which each one starts.
struct Record {
    std::size_t line = 0;
    Row fields;
};

std::vector<Record> read(std::istream& in);
std::vector<Record> read_file(const std::string& path);

/// Quotes a field only when it needs it.
std::string escape(const std::string& field);
void write_row(std::ostream& out, const Row& row);

}  // namespace narrative::csv
