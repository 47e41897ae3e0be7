#include "lossforge/dense.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lossforge/error.hpp"

namespace lossforge {

Dense2::Dense2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Dense2::Dense2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Dense2: " + std::to_string(data_.size()) + " values for a " +
                     std::to_string(rows_) + "x" + std::to_string(cols_) + " array");
  }
}

Dense2 Dense2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Dense2::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Dense2(r, c, std::move(data));
}

Dense2 Dense2::identity(std::size_t n) {
  Dense2 m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Dense2::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

bool Dense2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Dense2 Dense2::gather_rows(std::span<const std::size_t> indices) const {
  Dense2 out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ShapeError("Dense2::gather_rows: row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

}  // namespace lossforge
