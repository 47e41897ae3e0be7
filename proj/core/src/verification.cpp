#include "lossforge/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace lossforge {

namespace {

constexpr double kKinkClearance = 1e-3;

bool is_hinge(LossId id) {
  return id == LossId::Hinge || id == LossId::Hinge2 || id == LossId::Hinge3;
}

// Top two |p_j - y_j| must differ, otherwise the Chebyshev max switches
// coordinates inside the finite-difference stencil. With two softmax classes
// both gaps equal 1 - p_label identically, so the max is smooth.
bool chebyshev_untied(const Dense2& y, const Dense2& o, Squash sigma) {
  if (sigma == Squash::Softmax && o.cols() == 2) return true;
  const auto p = sigma == Squash::Sigmoid ? sigmoid(o.row(0)) : softmax(o.row(0));
  std::vector<double> gaps(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) gaps[j] = std::abs(p[j] - y(0, j));
  std::sort(gaps.begin(), gaps.end(), std::greater<>());
  return gaps.size() < 2 || gaps[0] - gaps[1] > kKinkClearance;
}

}  // namespace

GradProbe sample_smooth_point(LossId loss, Rng& rng, const LossOptions& options) {
  const std::size_t k = 2 + static_cast<std::size_t>(rng.below(9));
  const std::size_t label = static_cast<std::size_t>(rng.below(k));
  GradProbe probe{Dense2(1, k), Dense2(1, k)};
  probe.y(0, label) = 1.0;
  const Squash sigma = options.squash.value_or(spec_of(loss).squash);
  const double margin = options.hinge_margin;
  for (;;) {
    for (std::size_t j = 0; j < k; ++j) {
      double& o = probe.o(0, j);
      const double yj = probe.y(0, j);
      for (;;) {
        o = rng.normal(0.0, 2.0);
        if (loss == LossId::L1 && std::abs(o - yj) <= kKinkClearance) continue;
        if (is_hinge(loss) && std::abs(margin - (2.0 * yj - 1.0) * o) <= kKinkClearance) continue;
        break;
      }
    }
    if (loss != LossId::Chebyshev || chebyshev_untied(probe.y, probe.o, sigma)) break;
  }
  return probe;
}

GradCheckResult check_loss_gradient(LossId loss, const GradCheckOptions& options) {
  Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(loss)));
  GradCheckResult result;
  result.loss = loss;
  for (std::size_t t = 0; t < options.trials; ++t) {
    const auto probe = sample_smooth_point(loss, rng, options.loss_options);
    const auto analytic = evaluate(loss, probe.y, probe.o, options.loss_options).grad;
    const std::size_t k = probe.o.cols();
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> v) {
          Dense2 o(1, k, std::vector<double>(v.begin(), v.end()));
          return evaluate(loss, probe.y, o, options.loss_options).value;
        },
        probe.o.values(), options.step);
    result.max_rel_error =
        std::max(result.max_rel_error, max_relative_error(analytic.values(), numeric));
    ++result.points;
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

double log_closed_form_gap(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(8));
    const std::size_t k = 2 + static_cast<std::size_t>(rng.below(9));
    Dense2 o(n, k);
    std::vector<int> labels(n);
    for (double& v : o.values()) v = rng.normal(0.0, 3.0);
    for (int& l : labels) l = static_cast<int>(rng.below(k));
    const Dense2 y = one_hot(labels, k);
    const Dense2 p = softmax_rows(o);
    const auto grad = log_loss(1, y, o).grad;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double closed = (p(i, j) - y(i, j)) / static_cast<double>(n);
        worst = std::max(worst, std::abs(grad(i, j) - closed));
      }
    }
  }
  return worst;
}

bool TheoryReport::expectation_passed() const noexcept {
  return expectation_l1 < kExpectationTolerance && expectation_l2 < kExpectationTolerance;
}

bool TheoryReport::cs_passed() const noexcept { return cs_decomposition < kCsTolerance; }

bool TheoryReport::probes_passed() const noexcept {
  const double left = std::abs(probes[0].gradient);
  const double mid = std::abs(probes[1].gradient);
  const double right = std::abs(probes[2].gradient);
  return std::abs(probes[1].gradient + 0.25) <= kProbeAtZeroTolerance &&
         left < kVanishingTolerance && right < kVanishingTolerance && mid > left && mid > right;
}

TheoryReport verify_theory(const TheoryOptions& options) {
  Rng rng(options.seed);
  TheoryReport report;
  const std::size_t n = std::max<std::size_t>(1, options.batch);
  for (std::size_t t = 0; t < options.trials; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.below(9));
    Dense2 o(n, k);
    std::vector<int> labels(n);
    for (double& v : o.values()) v = rng.normal(0.0, 2.0);
    for (int& l : labels) l = static_cast<int>(rng.below(k));
    const Dense2 y = one_hot(labels, k);
    const Dense2 p = softmax_rows(o);

    Dense2 rhs_p = p;
    if (options.perturb > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        auto row = rhs_p.row(i);
        double sum = 0.0;
        for (double& v : row) {
          v += options.perturb * rng.uniform();
          sum += v;
        }
        for (double& v : row) v /= sum;
      }
    }

    // Identity on (y, p) alone.
    const auto direct = verify_expectation_identity(y, p);
    const double direct_cs = verify_cs_decomposition(y, p);

    // Loss implementations against the closed-form right-hand sides.
    double agreement = 0.0;
    double p_norm = 0.0;
    double y_norm = 0.0;
    double log_norms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row_norm = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        agreement += y(i, j) * rhs_p(i, j);
        row_norm += rhs_p(i, j) * rhs_p(i, j);
        y_norm += y(i, j) * y(i, j);
      }
      p_norm += row_norm;
      log_norms += std::log(row_norm);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    agreement *= inv_n;
    p_norm *= inv_n;
    y_norm *= inv_n;
    const double l1 = expectation_loss(1, y, o).value;
    const double l2 = expectation_loss(2, y, o).value;
    const double cs = cauchy_schwarz_loss(y, o).value;
    const double ce = log_loss(1, y, o).value;
    const double cross_l1 = std::abs(l1 - (2.0 - 2.0 * agreement));
    const double cross_l2 = std::abs(l2 - (y_norm - 2.0 * agreement + p_norm));
    const double cross_cs = std::abs(cs - ce - 0.5 * inv_n * log_norms);

    report.expectation_l1 = std::max({report.expectation_l1, direct.l1, cross_l1});
    report.expectation_l2 = std::max({report.expectation_l2, direct.l2, cross_l2});
    report.cs_decomposition = std::max({report.cs_decomposition, direct_cs, cross_cs});
  }

  const Dense2 positive = Dense2::from_rows({{1.0}});
  const std::array<double, 3> outputs{-30.0, 0.0, 30.0};
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const Dense2 o = Dense2::from_rows({{outputs[i]}});
    report.probes[i] = {outputs[i], expectation_loss(1, positive, o, Squash::Sigmoid).grad(0, 0)};
  }
  return report;
}

}  // namespace lossforge
