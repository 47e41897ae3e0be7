#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lossforge/dense.hpp"

namespace lossforge {

/// Probabilities are clamped to [kProbFloor, 1] before any logarithm.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kDefaultFdStep = 1e-5;

// Probability transforms. All throw DomainError on non-finite input.

/// Max-subtracted softmax; never overflows.
std::vector<double> softmax(std::span<const double> o);
void softmax_into(std::span<const double> o, std::span<double> out);
Dense2 softmax_rows(const Dense2& o);
double log_sum_exp(std::span<const double> o);

double sigmoid(double x);
std::vector<double> sigmoid(std::span<const double> o);
Dense2 sigmoid_rows(const Dense2& o);
/// log(sigmoid(x)) without cancellation.
double log_sigmoid(double x);

/// log(max(p, kProbFloor)).
double clamped_log(double p);

// Gradient oracle.

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for every j.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x,
                                     double h = kDefaultFdStep);

/// |a - b| / max(1, |a|, |b|).
double relative_error(double a, double b) noexcept;
/// Largest elementwise relative_error; ShapeError on length mismatch.
double max_relative_error(std::span<const double> a, std::span<const double> b);

// Dense kernels. ShapeError on mismatched operands.

Dense2 matmul(const Dense2& a, const Dense2& b);
/// aᵀ · b without materializing the transpose.
Dense2 matmul_at_b(const Dense2& a, const Dense2& b);
/// a · bᵀ without materializing the transpose.
Dense2 matmul_a_bt(const Dense2& a, const Dense2& b);
Dense2 transpose(const Dense2& a);
/// Adds `bias` to every row in place.
void add_bias(Dense2& a, std::span<const double> bias);
/// Column sums; the bias gradient of a dense layer.
std::vector<double> column_sums(const Dense2& a);
/// Index of the largest entry of each row; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Dense2& a);

}  // namespace lossforge
