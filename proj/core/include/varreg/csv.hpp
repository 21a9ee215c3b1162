#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "varreg/core.hpp"

namespace varreg::csv {

/// Shortest round-trip decimal representation; identical input gives
/// identical text on every run.
std::string format_double(double x);

/// Image or sinogram as CSV: first line "rows,cols", then `rows` lines of
/// `cols` comma-separated values (row-major).
void write_grid(std::ostream& out, const DenseMatrix& grid);
DenseMatrix read_grid(std::istream& in);

/// Reads a plain numeric CSV (no header) into a dense matrix.
DenseMatrix read_matrix(std::istream& in);

/// Reshapes a row-major flattened image of `rows * cols` entries.
DenseMatrix as_grid(const Vector& flat, Index rows, Index cols);
Vector flatten(const DenseMatrix& grid);

using Cell = std::variant<double, long long, std::string, bool>;

/// Table with a fixed column schema, written with a header line.
class Table {
 public:
  explicit Table(std::vector<std::string> columns);

  void add_row(std::vector<Cell> row);
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }

  void write(std::ostream& out) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace varreg::csv
