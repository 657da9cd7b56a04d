#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbat {

using Labels = std::vector<int>;

/// Row-major dense matrix of doubles. Plain value type used for batches,
/// perturbations and designs; autodiff happens on Tensor.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != rows * cols) {
      throw std::invalid_argument("Matrix: " + std::to_string(values.size()) + " values do not fill " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  bool empty() const { return rows == 0; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Rows of `m` picked by `indices`, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

/// `m` stacked vertically `copies` times (block by copy).
Matrix repeat_rows(const Matrix& m, std::size_t copies);

/// Vertical concatenation; column counts must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);

/// Largest absolute entry of a - b.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace bbat
