#include "varreg/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace varreg::csv {
namespace {

std::vector<double> parse_line(const std::string& line) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    if (first == std::string::npos) throw std::invalid_argument("csv: empty field");
    const std::string trimmed = field.substr(first, last - first + 1);
    double value = 0.0;
    const auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
    if (res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size()) {
      throw std::invalid_argument("csv: cannot parse '" + trimmed + "'");
    }
    values.push_back(value);
  }
  return values;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

void write_grid(std::ostream& out, const DenseMatrix& grid) {
  out << grid.rows() << ',' << grid.cols() << '\n';
  for (Index r = 0; r < grid.rows(); ++r) {
    for (Index c = 0; c < grid.cols(); ++c) {
      if (c) out << ',';
      out << format_double(grid(r, c));
    }
    out << '\n';
  }
}

DenseMatrix read_grid(std::istream& in) {
  std::string line;
  while (std::getline(in, line) && blank(line)) {
  }
  const auto dims = parse_line(line);
  if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1) {
    throw std::invalid_argument("csv grid: header must be 'rows,cols'");
  }
  const auto rows = static_cast<Index>(dims[0]);
  const auto cols = static_cast<Index>(dims[1]);
  DenseMatrix grid(rows, cols);
  Index r = 0;
  while (r < rows && std::getline(in, line)) {
    if (blank(line)) continue;
    const auto values = parse_line(line);
    if (static_cast<Index>(values.size()) != cols) {
      throw std::invalid_argument("csv grid: row " + std::to_string(r) + " has wrong length");
    }
    for (Index c = 0; c < cols; ++c) grid(r, c) = values[static_cast<std::size_t>(c)];
    ++r;
  }
  if (r != rows) throw std::invalid_argument("csv grid: too few rows");
  return grid;
}

DenseMatrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    rows.push_back(parse_line(line));
    if (rows.back().size() != rows.front().size()) {
      throw std::invalid_argument("csv matrix: ragged rows");
    }
  }
  if (rows.empty()) throw std::invalid_argument("csv matrix: empty input");
  DenseMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

DenseMatrix as_grid(const Vector& flat, Index rows, Index cols) {
  if (flat.size() != rows * cols) throw DimensionError("as_grid: size mismatch");
  DenseMatrix grid(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) grid(r, c) = flat[r * cols + c];
  }
  return grid;
}

Vector flatten(const DenseMatrix& grid) {
  Vector flat(grid.size());
  for (Index r = 0; r < grid.rows(); ++r) {
    for (Index c = 0; c < grid.cols(); ++c) flat[r * grid.cols() + c] = grid(r, c);
  }
  return flat;
}

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw std::invalid_argument("csv table: row has " + std::to_string(row.size()) +
                                " cells, schema has " + std::to_string(columns_.size()));
  }
  rows_.push_back(std::move(row));
}

void Table::write(std::ostream& out) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out << ',';
    out << columns_[i];
  }
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      std::visit(
          [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out << format_double(v);
            } else if constexpr (std::is_same_v<T, bool>) {
              out << (v ? "true" : "false");
            } else {
              out << v;
            }
          },
          row[i]);
    }
    out << '\n';
  }
}

}  // namespace varreg::csv
