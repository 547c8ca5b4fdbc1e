#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "braingraph/numerics/tensor.hpp"

namespace braingraph::csv {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws SchemaError when absent
};

// Headered text table. Rejects rows whose width differs from the header.
Table read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const Table& table);

// Headerless numeric CSV: rows x columns matrix. Throws DataError on bad or non-finite cells.
Tensor read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Tensor& matrix);

}  // namespace braingraph::csv
