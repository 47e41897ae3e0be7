#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "lossforge/dense.hpp"

namespace lossforge {

/// The twelve classification objectives, in table order.
enum class LossId {
  L1,
  L2,
  ExpectationL1,
  ExpectationL2,
  Chebyshev,
  Hinge,
  Hinge2,
  Hinge3,
  Log,
  Log2,
  Tanimoto,
  CauchySchwarz,
};

inline constexpr std::size_t kLossCount = 12;

/// What the loss formula consumes: the raw last-layer output o, or σ(o).
enum class InputDomain { RawOutput, Probability };
enum class LabelEncoding { OneHot, Sign };
/// Probability transform σ applied to o before the loss formula.
enum class Squash { None, Softmax, Sigmoid };

struct LossSpec {
  LossId id;
  /// Stable ASCII identifier used on the command line and in result paths.
  std::string_view name;
  /// Human-readable symbol for plots and reports.
  std::string_view symbol;
  InputDomain domain;
  LabelEncoding encoding;
  Squash squash;
};

std::span<const LossSpec> all_losses() noexcept;
const LossSpec& spec_of(LossId id) noexcept;
std::string_view name_of(LossId id) noexcept;
std::optional<LossId> parse_loss(std::string_view name) noexcept;
std::optional<Squash> parse_squash(std::string_view name) noexcept;
std::string_view name_of(Squash s) noexcept;
/// Comma separated list of every loss name.
std::string loss_names();

/// Batch-mean loss value and its gradient with respect to the output batch o.
struct LossEval {
  double value = 0.0;
  Dense2 grad;
};

struct LossOptions {
  /// Overrides the σ of probability-based losses; ignored by raw-output ones.
  std::optional<Squash> squash;
  double hinge_margin = 0.5;
  /// Use the squared log loss with the leading minus exactly as printed in the
  /// original loss table (unbounded below). Off by default.
  bool literal_log2_sign = false;
};

/// Sum over classes of |y - o| (order 1) or (y - o)^2 (order 2).
LossEval lp_loss(int order, const Dense2& y, const Dense2& o);
/// The Lp losses applied to p = σ(o).
LossEval expectation_loss(int order, const Dense2& y, const Dense2& o,
                          Squash sigma = Squash::Softmax);
/// max_j |σ(o)_j - y_j|; the subgradient follows the lowest maximizing index.
LossEval chebyshev_loss(const Dense2& y, const Dense2& o, Squash sigma = Squash::Softmax);
/// Σ_j max(0, margin - ŷ_j o_j)^power, ŷ in {-1, +1}.
LossEval hinge_loss(int power, const Dense2& y_sign, const Dense2& o, double margin = 0.5);
/// Cross entropy (power 1) or Σ_j (y_j log p_j)^2 (power 2).
LossEval log_loss(int power, const Dense2& y, const Dense2& o, Squash sigma = Squash::Softmax,
                  bool literal_sign = false);
/// -<p,y> / (|p|^2 + |y|^2 - <p,y>).
LossEval tanimoto_loss(const Dense2& y, const Dense2& o, Squash sigma = Squash::Softmax);
/// -log(<p,y> / (|p| |y|)).
LossEval cauchy_schwarz_loss(const Dense2& y, const Dense2& o, Squash sigma = Squash::Softmax);

/// Dispatches on `id`. `y` is always the one-hot batch; sign labels are
/// derived as 2y - 1 for the hinge family.
LossEval evaluate(LossId id, const Dense2& y, const Dense2& o, const LossOptions& options = {});

Dense2 one_hot(std::span<const int> labels, std::size_t classes);
/// ŷ = 2y - 1.
Dense2 sign_encode(const Dense2& y);

/// Residuals of the expectation identities on probability rows p:
///   l1 = |mean Σ|p - y| - (2 - 2 mean <y,p>)|
///   l2 = |mean Σ(p - y)^2 - (mean |y|^2 - 2 mean <y,p> + mean |p|^2)|
struct ExpectationResiduals {
  double l1 = 0.0;
  double l2 = 0.0;
};

/// Throws DomainError if a row of p is not a distribution (sum off by more
/// than 1e-9, or a negative entry) or a row of y is not one-hot.
ExpectationResiduals verify_expectation_identity(const Dense2& y, const Dense2& p);

/// |mean D_CS - mean log loss - (1/2N) Σ log |p_i|^2|, with the same input
/// checks as verify_expectation_identity.
double verify_cs_decomposition(const Dense2& y, const Dense2& p);

}  // namespace lossforge
