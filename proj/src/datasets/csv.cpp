#include "braingraph/datasets/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "braingraph/errors.hpp"

namespace braingraph::csv {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw DataError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw SchemaError("missing column '" + std::string(name) + "'");
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  return out;
}

}  // namespace

Table read_table(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty file");
  table.header = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " columns, found " + std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_table(const std::filesystem::path& path, const Table& table) {
  std::ofstream out = open_output(path);
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
}

Tensor read_matrix(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (rows == 0) cols = cells.size();
    if (cells.size() != cols) {
      throw SchemaError(path.string() + ": row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                        " columns, expected " + std::to_string(cols));
    }
    for (const auto& cell : cells) {
      double v = 0.0;
      try {
        v = parse_double(cell);
      } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
      }
      if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite value at row " + std::to_string(rows + 1));
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path.string() + ": no data rows");
  return Tensor(Shape{rows, cols}, std::move(values));
}

void write_matrix(const std::filesystem::path& path, const Tensor& matrix) {
  if (matrix.rank() != 2) throw DimensionError("write_matrix needs a rank-2 tensor");
  std::ofstream out = open_output(path);
  std::string line;
  for (std::size_t i = 0; i < matrix.dim(0); ++i) {
    line.clear();
    for (std::size_t j = 0; j < matrix.dim(1); ++j) {
      if (j) line += ',';
      line += format_double(matrix(i, j));
    }
    line += '\n';
    out << line;
  }
}

}  // namespace braingraph::csv
