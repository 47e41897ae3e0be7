#include "lossforge/numerics.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "lossforge/error.hpp"

namespace lossforge {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Dense2& a) {
  return ConstMap(a.values().data(), static_cast<Eigen::Index>(a.rows()),
                  static_cast<Eigen::Index>(a.cols()));
}

MutMap view(Dense2& a) {
  return MutMap(a.values().data(), static_cast<Eigen::Index>(a.rows()),
                static_cast<Eigen::Index>(a.cols()));
}

std::string dims(const Dense2& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_finite(std::span<const double> o, const char* what) {
  for (double v : o) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

void softmax_into(std::span<const double> o, std::span<double> out) {
  require_finite(o, "softmax");
  if (out.size() != o.size()) throw ShapeError("softmax: output length mismatch");
  if (o.empty()) return;
  const double top = *std::max_element(o.begin(), o.end());
  double total = 0.0;
  for (std::size_t j = 0; j < o.size(); ++j) {
    out[j] = std::exp(o[j] - top);
    total += out[j];
  }
  for (double& v : out) v /= total;
}

std::vector<double> softmax(std::span<const double> o) {
  std::vector<double> p(o.size());
  softmax_into(o, p);
  return p;
}

Dense2 softmax_rows(const Dense2& o) {
  Dense2 p(o.rows(), o.cols());
  for (std::size_t i = 0; i < o.rows(); ++i) softmax_into(o.row(i), p.row(i));
  return p;
}

double log_sum_exp(std::span<const double> o) {
  require_finite(o, "log_sum_exp");
  if (o.empty()) throw ShapeError("log_sum_exp: empty input");
  const double top = *std::max_element(o.begin(), o.end());
  double total = 0.0;
  for (double v : o) total += std::exp(v - top);
  return top + std::log(total);
}

double sigmoid(double x) {
  if (!std::isfinite(x)) throw DomainError("sigmoid: non-finite input");
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> sigmoid(std::span<const double> o) {
  std::vector<double> p(o.size());
  std::transform(o.begin(), o.end(), p.begin(), [](double x) { return sigmoid(x); });
  return p;
}

Dense2 sigmoid_rows(const Dense2& o) {
  Dense2 p(o.rows(), o.cols());
  std::transform(o.values().begin(), o.values().end(), p.values().begin(),
                 [](double x) { return sigmoid(x); });
  return p;
}

double log_sigmoid(double x) {
  if (!std::isfinite(x)) throw DomainError("log_sigmoid: non-finite input");
  // log σ(x) = -softplus(-x)
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double clamped_log(double p) { return std::log(std::clamp(p, kProbFloor, 1.0)); }

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double up = f(probe);
    probe[j] = x[j] - h;
    const double down = f(probe);
    probe[j] = x[j];
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b) noexcept {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

Dense2 matmul(const Dense2& a, const Dense2& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + dims(a) + " * " + dims(b));
  Dense2 out(a.rows(), b.cols());
  view(out).noalias() = view(a) * view(b);
  return out;
}

Dense2 matmul_at_b(const Dense2& a, const Dense2& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_at_b: " + dims(a) + "^T * " + dims(b));
  Dense2 out(a.cols(), b.cols());
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Dense2 matmul_a_bt(const Dense2& a, const Dense2& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_a_bt: " + dims(a) + " * " + dims(b) + "^T");
  Dense2 out(a.rows(), b.rows());
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Dense2 transpose(const Dense2& a) {
  Dense2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

void add_bias(Dense2& a, std::span<const double> bias) {
  if (bias.size() != a.cols()) throw ShapeError("add_bias: bias length != " + dims(a) + " cols");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

std::vector<double> column_sums(const Dense2& a) {
  std::vector<double> sums(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) sums[j] += r[j];
  }
  return sums;
}

std::vector<std::size_t> argmax_rows(const Dense2& a) {
  std::vector<std::size_t> out(a.rows(), 0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j) {
      if (r[j] > r[best]) best = j;
    }
    out[i] = best;
  }
  return out;
}

}  // namespace lossforge
