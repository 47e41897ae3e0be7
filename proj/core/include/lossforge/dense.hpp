#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lossforge {

/// Row-major dense 2-D array of doubles. Holds network outputs, probability
/// estimates and label encodings alike, one sample per row.
class Dense2 {
 public:
  Dense2() = default;
  Dense2(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `data`; throws ShapeError unless data.size() == rows * cols.
  Dense2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Dense2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Dense2 identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v) noexcept;
  bool all_finite() const noexcept;

  /// Copies the listed rows, in order, into a new array.
  Dense2 gather_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Dense2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace lossforge
