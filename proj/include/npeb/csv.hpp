#pragma once

// Minimal CSV reading: comma separated, mandatory header row, optional double
// quotes around fields. Errors carry the 1-based line number.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace npeb {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // source line of each row
    std::string source;

    std::optional<std::size_t> column(const std::string& name) const;
    std::size_t require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<input>");

std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& field, const std::string& what, std::size_t line);
long parse_long(const std::string& field, const std::string& what, std::size_t line);

/// Full-precision formatting that round-trips through parse_double.
std::string format_exact(double v);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace npeb
