#include "bbat/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace bbat {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m.rows) throw std::out_of_range("gather_rows: row index out of range");
    std::ranges::copy(m.row(indices[r]), out.row(r).begin());
  }
  return out;
}

Matrix repeat_rows(const Matrix& m, std::size_t copies) {
  Matrix out(m.rows * copies, m.cols);
  for (std::size_t c = 0; c < copies; ++c) {
    std::ranges::copy(m.values, out.values.begin() + static_cast<std::ptrdiff_t>(c * m.values.size()));
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.empty()) return bottom;
  if (bottom.empty()) return top;
  if (top.cols != bottom.cols) throw std::invalid_argument("vstack: column counts differ");
  Matrix out(top.rows + bottom.rows, top.cols);
  std::ranges::copy(top.values, out.values.begin());
  std::ranges::copy(bottom.values, out.values.begin() + static_cast<std::ptrdiff_t>(top.values.size()));
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  return worst;
}

}  // namespace bbat
