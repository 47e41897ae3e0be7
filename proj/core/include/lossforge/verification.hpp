#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "lossforge/dense.hpp"
#include "lossforge/losses.hpp"
#include "lossforge/numerics.hpp"
#include "lossforge/rng.hpp"

namespace lossforge {

struct GradCheckOptions {
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  LossOptions loss_options;
  double step = kDefaultFdStep;
  double tolerance = 1e-5;
};

struct GradCheckResult {
  LossId loss = LossId::Log;
  std::size_t points = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// A single-sample (y, o) probe with K in [2, 10] classes, kept at least
/// 1e-3 away from every kink of `loss` (|o - y| for L1, the hinge margin,
/// Chebyshev ties) so central differences are valid.
struct GradProbe {
  Dense2 y;
  Dense2 o;
};
GradProbe sample_smooth_point(LossId loss, Rng& rng, const LossOptions& options = {});

/// Analytic gradient of evaluate() against finite_diff_grad at `trials`
/// random smooth points.
GradCheckResult check_loss_gradient(LossId loss, const GradCheckOptions& options);

/// Largest |∂ log loss / ∂o - (softmax(o) - y) / N| over `trials` random batches.
double log_closed_form_gap(std::size_t trials, std::uint64_t seed);

struct TheoryOptions {
  std::uint64_t seed = 1;
  std::size_t batch = 32;
  std::size_t trials = 1000;
  /// When positive, the right-hand sides are evaluated on a perturbed and
  /// renormalized copy of p. Used as a negative control: the checks must fail.
  double perturb = 0.0;
};

inline constexpr double kExpectationTolerance = 1e-12;
inline constexpr double kCsTolerance = 1e-10;
inline constexpr double kProbeAtZeroTolerance = 1e-12;
inline constexpr double kVanishingTolerance = 1e-10;

struct ProbePoint {
  double output = 0.0;
  double gradient = 0.0;
};

struct TheoryReport {
  /// Worst residuals over all trials; each combines the direct identity on
  /// (y, p) and the cross-check between the loss implementations and the
  /// closed-form right-hand side.
  double expectation_l1 = 0.0;
  double expectation_l2 = 0.0;
  double cs_decomposition = 0.0;
  /// ∂(L1∘σ)/∂o for a binary sigmoid unit with a positive label at o = -30, 0, 30.
  std::array<ProbePoint, 3> probes{};

  bool expectation_passed() const noexcept;
  bool cs_passed() const noexcept;
  bool probes_passed() const noexcept;
  bool passed() const noexcept { return expectation_passed() && cs_passed() && probes_passed(); }
};

TheoryReport verify_theory(const TheoryOptions& options);

}  // namespace lossforge
