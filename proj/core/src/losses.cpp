#include "lossforge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lossforge/error.hpp"
#include "lossforge/numerics.hpp"

namespace lossforge {

namespace {

constexpr std::array<LossSpec, kLossCount> kSpecs{{
    {LossId::L1, "l1", "L1", InputDomain::RawOutput, LabelEncoding::OneHot, Squash::None},
    {LossId::L2, "l2", "L2", InputDomain::RawOutput, LabelEncoding::OneHot, Squash::None},
    {LossId::ExpectationL1, "exp-l1", "L1∘σ", InputDomain::Probability, LabelEncoding::OneHot,
     Squash::Softmax},
    {LossId::ExpectationL2, "exp-l2", "L2∘σ", InputDomain::Probability, LabelEncoding::OneHot,
     Squash::Softmax},
    {LossId::Chebyshev, "chebyshev", "L∞∘σ", InputDomain::Probability, LabelEncoding::OneHot,
     Squash::Softmax},
    {LossId::Hinge, "hinge", "hinge", InputDomain::RawOutput, LabelEncoding::Sign, Squash::None},
    {LossId::Hinge2, "hinge2", "hinge²", InputDomain::RawOutput, LabelEncoding::Sign,
     Squash::None},
    {LossId::Hinge3, "hinge3", "hinge³", InputDomain::RawOutput, LabelEncoding::Sign,
     Squash::None},
    {LossId::Log, "log", "log", InputDomain::Probability, LabelEncoding::OneHot, Squash::Softmax},
    {LossId::Log2, "log2", "log²", InputDomain::Probability, LabelEncoding::OneHot,
     Squash::Softmax},
    {LossId::Tanimoto, "tanimoto", "tan", InputDomain::Probability, LabelEncoding::OneHot,
     Squash::Softmax},
    {LossId::CauchySchwarz, "cs", "D_CS", InputDomain::Probability, LabelEncoding::OneHot,
     Squash::Softmax},
}};

double sign_of(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_same_shape(const Dense2& y, const Dense2& o, const char* what) {
  if (y.rows() != o.rows() || y.cols() != o.cols()) {
    throw ShapeError(std::string(what) + ": labels " + std::to_string(y.rows()) + "x" +
                     std::to_string(y.cols()) + " vs outputs " + std::to_string(o.rows()) + "x" +
                     std::to_string(o.cols()));
  }
  if (o.rows() == 0) throw ShapeError(std::string(what) + ": empty batch");
}

void require_order(int order, int max_order, const char* what) {
  if (order < 1 || order > max_order) {
    throw DomainError(std::string(what) + ": unsupported order " + std::to_string(order));
  }
}

void require_probability_squash(Squash sigma, const char* what) {
  if (sigma == Squash::None) {
    throw DomainError(std::string(what) + ": needs a softmax or sigmoid probability transform");
  }
}

void squash_row(Squash sigma, std::span<const double> o, std::span<double> p) {
  if (sigma == Squash::Softmax) {
    softmax_into(o, p);
  } else {
    for (std::size_t j = 0; j < o.size(); ++j) p[j] = sigmoid(o[j]);
  }
}

// Chains dL/dp into dL/do in place.
//   softmax: dL/do_k = p_k (d_k - Σ_j d_j p_j)
//   sigmoid: dL/do_k = d_k p_k (1 - p_k)
void chain_through_squash(Squash sigma, std::span<const double> p, std::span<double> d) {
  if (sigma == Squash::Softmax) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += d[j] * p[j];
    for (std::size_t j = 0; j < p.size(); ++j) d[j] = p[j] * (d[j] - dot);
  } else {
    for (std::size_t j = 0; j < p.size(); ++j) d[j] *= p[j] * (1.0 - p[j]);
  }
}

// Shared driver for losses defined on p = σ(o). `per_sample(y, p, dldp)`
// returns the sample's loss and writes dL/dp.
template <typename PerSample>
LossEval probability_loss(const Dense2& y, const Dense2& o, Squash sigma, const char* what,
                          PerSample per_sample) {
  require_same_shape(y, o, what);
  require_probability_squash(sigma, what);
  const std::size_t n = o.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossEval out{0.0, Dense2(n, o.cols())};
  std::vector<double> p(o.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    squash_row(sigma, o.row(i), p);
    auto g = out.grad.row(i);
    total += per_sample(y.row(i), std::span<const double>(p), g);
    chain_through_squash(sigma, p, g);
    for (double& v : g) v *= inv_n;
  }
  out.value = total * inv_n;
  return out;
}

// log σ(o)_j computed without forming p, so tiny probabilities keep full precision.
void log_probabilities(Squash sigma, std::span<const double> o, std::span<double> out) {
  if (sigma == Squash::Softmax) {
    const double lse = log_sum_exp(o);
    for (std::size_t j = 0; j < o.size(); ++j) out[j] = o[j] - lse;
  } else {
    for (std::size_t j = 0; j < o.size(); ++j) out[j] = log_sigmoid(o[j]);
  }
}

const double kLogFloor = std::log(kProbFloor);

void check_distribution_rows(const Dense2& y, const Dense2& p, const char* what) {
  require_same_shape(y, p, what);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (double v : p.row(i)) {
      if (!(v >= 0.0)) throw DomainError(std::string(what) + ": negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DomainError(std::string(what) + ": row " + std::to_string(i) +
                        " of p is not a distribution");
    }
    int ones = 0;
    for (double v : y.row(i)) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) {
      throw DomainError(std::string(what) + ": row " + std::to_string(i) + " of y is not one-hot");
    }
  }
}

}  // namespace

std::span<const LossSpec> all_losses() noexcept { return kSpecs; }

const LossSpec& spec_of(LossId id) noexcept { return kSpecs[static_cast<std::size_t>(id)]; }

std::string_view name_of(LossId id) noexcept { return spec_of(id).name; }

std::optional<LossId> parse_loss(std::string_view name) noexcept {
  for (const auto& s : kSpecs) {
    if (s.name == name) return s.id;
  }
  return std::nullopt;
}

std::optional<Squash> parse_squash(std::string_view name) noexcept {
  if (name == "softmax") return Squash::Softmax;
  if (name == "sigmoid") return Squash::Sigmoid;
  if (name == "none") return Squash::None;
  return std::nullopt;
}

std::string_view name_of(Squash s) noexcept {
  switch (s) {
    case Squash::Softmax:
      return "softmax";
    case Squash::Sigmoid:
      return "sigmoid";
    case Squash::None:
      break;
  }
  return "none";
}

std::string loss_names() {
  std::string out;
  for (const auto& s : kSpecs) {
    if (!out.empty()) out += ", ";
    out += s.name;
  }
  return out;
}

LossEval lp_loss(int order, const Dense2& y, const Dense2& o) {
  require_same_shape(y, o, "lp_loss");
  require_order(order, 2, "lp_loss");
  const double inv_n = 1.0 / static_cast<double>(o.rows());
  LossEval out{0.0, Dense2(o.rows(), o.cols())};
  auto yv = y.values();
  auto ov = o.values();
  auto gv = out.grad.values();
  double total = 0.0;
  for (std::size_t k = 0; k < ov.size(); ++k) {
    const double diff = ov[k] - yv[k];
    if (order == 1) {
      total += std::abs(diff);
      gv[k] = sign_of(diff) * inv_n;
    } else {
      total += diff * diff;
      gv[k] = 2.0 * diff * inv_n;
    }
  }
  out.value = total * inv_n;
  return out;
}

LossEval expectation_loss(int order, const Dense2& y, const Dense2& o, Squash sigma) {
  require_order(order, 2, "expectation_loss");
  return probability_loss(
      y, o, sigma, "expectation_loss",
      [order](std::span<const double> yr, std::span<const double> p, std::span<double> d) {
        double value = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
          const double diff = p[j] - yr[j];
          if (order == 1) {
            value += std::abs(diff);
            d[j] = sign_of(diff);
          } else {
            value += diff * diff;
            d[j] = 2.0 * diff;
          }
        }
        return value;
      });
}

LossEval chebyshev_loss(const Dense2& y, const Dense2& o, Squash sigma) {
  return probability_loss(
      y, o, sigma, "chebyshev_loss",
      [](std::span<const double> yr, std::span<const double> p, std::span<double> d) {
        std::size_t best = 0;
        double worst = -1.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
          const double gap = std::abs(p[j] - yr[j]);
          if (gap > worst) {
            worst = gap;
            best = j;
          }
        }
        std::fill(d.begin(), d.end(), 0.0);
        d[best] = sign_of(p[best] - yr[best]);
        return worst;
      });
}

LossEval hinge_loss(int power, const Dense2& y_sign, const Dense2& o, double margin) {
  require_same_shape(y_sign, o, "hinge_loss");
  require_order(power, 3, "hinge_loss");
  const double inv_n = 1.0 / static_cast<double>(o.rows());
  LossEval out{0.0, Dense2(o.rows(), o.cols())};
  auto yv = y_sign.values();
  auto ov = o.values();
  auto gv = out.grad.values();
  double total = 0.0;
  for (std::size_t k = 0; k < ov.size(); ++k) {
    if (yv[k] != 1.0 && yv[k] != -1.0) {
      throw DomainError("hinge_loss: sign label " + std::to_string(yv[k]) + " is not +1 or -1");
    }
    const double violation = margin - yv[k] * ov[k];
    if (violation <= 0.0) continue;
    // d/do max(0, m - ŷo)^q = -q ŷ (m - ŷo)^(q-1)
    switch (power) {
      case 1:
        total += violation;
        gv[k] = -yv[k] * inv_n;
        break;
      case 2:
        total += violation * violation;
        gv[k] = -2.0 * yv[k] * violation * inv_n;
        break;
      default:
        total += violation * violation * violation;
        gv[k] = -3.0 * yv[k] * violation * violation * inv_n;
        break;
    }
  }
  out.value = total * inv_n;
  return out;
}

LossEval log_loss(int power, const Dense2& y, const Dense2& o, Squash sigma, bool literal_sign) {
  require_same_shape(y, o, "log_loss");
  require_order(power, 2, "log_loss");
  require_probability_squash(sigma, "log_loss");
  // The reported value uses log p clamped at log(kProbFloor); the gradient is
  // that of the unclamped loss, which stays finite because log p comes from
  // the log-domain transform.
  //   softmax, power 1: dL/do = p Σy - y
  //   softmax, power 2: dL/do_k = 2 y_k^2 ℓ_k - p_k Σ_j 2 y_j^2 ℓ_j
  //   sigmoid, power 1: dL/do_j = -y_j (1 - p_j)
  //   sigmoid, power 2: dL/do_j = 2 y_j^2 ℓ_j (1 - p_j)
  const std::size_t n = o.rows();
  const std::size_t k = o.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double sign = (power == 2 && literal_sign) ? -1.0 : 1.0;
  LossEval out{0.0, Dense2(n, k)};
  std::vector<double> logp(k);
  std::vector<double> p(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto yr = y.row(i);
    auto g = out.grad.row(i);
    log_probabilities(sigma, o.row(i), logp);
    squash_row(sigma, o.row(i), p);
    double value = 0.0;
    if (power == 1) {
      double ysum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        value -= yr[j] * std::max(logp[j], kLogFloor);
        ysum += yr[j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        g[j] = sigma == Squash::Softmax ? p[j] * ysum - yr[j] : -yr[j] * (1.0 - p[j]);
      }
    } else {
      double weighted = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double term = yr[j] * std::max(logp[j], kLogFloor);
        value += term * term;
        weighted += 2.0 * yr[j] * yr[j] * logp[j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        const double own = 2.0 * yr[j] * yr[j] * logp[j];
        g[j] = sigma == Squash::Softmax ? own - p[j] * weighted : own * (1.0 - p[j]);
      }
    }
    total += sign * value;
    for (double& v : g) v *= sign * inv_n;
  }
  out.value = total * inv_n;
  return out;
}

LossEval tanimoto_loss(const Dense2& y, const Dense2& o, Squash sigma) {
  return probability_loss(
      y, o, sigma, "tanimoto_loss",
      [](std::span<const double> yr, std::span<const double> p, std::span<double> d) {
        double dot = 0.0;
        double pp = 0.0;
        double yy = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
          dot += p[j] * yr[j];
          pp += p[j] * p[j];
          yy += yr[j] * yr[j];
        }
        const double den = pp + yy - dot;
        // d/dp_j (-s/D) = -(y_j D - s (2 p_j - y_j)) / D^2
        for (std::size_t j = 0; j < p.size(); ++j) {
          d[j] = -(yr[j] * den - dot * (2.0 * p[j] - yr[j])) / (den * den);
        }
        return -dot / den;
      });
}

LossEval cauchy_schwarz_loss(const Dense2& y, const Dense2& o, Squash sigma) {
  if (sigma != Squash::Softmax) {
    return probability_loss(
        y, o, sigma, "cauchy_schwarz_loss",
        [](std::span<const double> yr, std::span<const double> p, std::span<double> d) {
          double dot = 0.0;
          double pp = 0.0;
          double yy = 0.0;
          for (std::size_t j = 0; j < p.size(); ++j) {
            dot += p[j] * yr[j];
            pp += p[j] * p[j];
            yy += yr[j] * yr[j];
          }
          const double s = std::max(dot, kProbFloor);
          for (std::size_t j = 0; j < p.size(); ++j) d[j] = -yr[j] / s + p[j] / pp;
          return -clamped_log(dot) + 0.5 * std::log(pp) + 0.5 * std::log(yy);
        });
  }
  // Softmax closed form: dL/do_k = p_k^2 / |p|^2 - w_k, where
  // w_k = y_k p_k / <y,p> is evaluated in the log domain.
  require_same_shape(y, o, "cauchy_schwarz_loss");
  const std::size_t n = o.rows();
  const std::size_t k = o.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossEval out{0.0, Dense2(n, k)};
  std::vector<double> logp(k);
  std::vector<double> p(k);
  std::vector<double> logw;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto yr = y.row(i);
    auto g = out.grad.row(i);
    log_probabilities(Squash::Softmax, o.row(i), logp);
    squash_row(Squash::Softmax, o.row(i), p);
    double pp = 0.0;
    double yy = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      pp += p[j] * p[j];
      yy += yr[j] * yr[j];
    }
    logw.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (yr[j] > 0.0) logw.push_back(std::log(yr[j]) + logp[j]);
    }
    if (logw.empty()) throw DomainError("cauchy_schwarz_loss: label row has no positive entry");
    const double log_dot = log_sum_exp(logw);
    for (std::size_t j = 0; j < k; ++j) {
      const double w = yr[j] > 0.0 ? std::exp(std::log(yr[j]) + logp[j] - log_dot) : 0.0;
      g[j] = (p[j] * p[j] / pp - w) * inv_n;
    }
    total += -std::max(log_dot, kLogFloor) + 0.5 * std::log(pp) + 0.5 * std::log(yy);
  }
  out.value = total * inv_n;
  return out;
}

LossEval evaluate(LossId id, const Dense2& y, const Dense2& o, const LossOptions& options) {
  const Squash sigma = options.squash.value_or(spec_of(id).squash);
  switch (id) {
    case LossId::L1:
      return lp_loss(1, y, o);
    case LossId::L2:
      return lp_loss(2, y, o);
    case LossId::ExpectationL1:
      return expectation_loss(1, y, o, sigma);
    case LossId::ExpectationL2:
      return expectation_loss(2, y, o, sigma);
    case LossId::Chebyshev:
      return chebyshev_loss(y, o, sigma);
    case LossId::Hinge:
      return hinge_loss(1, sign_encode(y), o, options.hinge_margin);
    case LossId::Hinge2:
      return hinge_loss(2, sign_encode(y), o, options.hinge_margin);
    case LossId::Hinge3:
      return hinge_loss(3, sign_encode(y), o, options.hinge_margin);
    case LossId::Log:
      return log_loss(1, y, o, sigma);
    case LossId::Log2:
      return log_loss(2, y, o, sigma, options.literal_log2_sign);
    case LossId::Tanimoto:
      return tanimoto_loss(y, o, sigma);
    case LossId::CauchySchwarz:
      return cauchy_schwarz_loss(y, o, sigma);
  }
  throw DomainError("evaluate: unknown loss id");
}

Dense2 one_hot(std::span<const int> labels, std::size_t classes) {
  Dense2 y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DomainError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

Dense2 sign_encode(const Dense2& y) {
  Dense2 s(y.rows(), y.cols());
  auto in = y.values();
  auto out = s.values();
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = 2.0 * in[k] - 1.0;
  return s;
}

ExpectationResiduals verify_expectation_identity(const Dense2& y, const Dense2& p) {
  check_distribution_rows(y, p, "verify_expectation_identity");
  const double inv_n = 1.0 / static_cast<double>(p.rows());
  double l1 = 0.0;
  double l2 = 0.0;
  double agreement = 0.0;
  double y_norm = 0.0;
  double p_norm = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto yr = y.row(i);
    auto pr = p.row(i);
    for (std::size_t j = 0; j < pr.size(); ++j) {
      const double diff = pr[j] - yr[j];
      l1 += std::abs(diff);
      l2 += diff * diff;
      agreement += yr[j] * pr[j];
      y_norm += yr[j] * yr[j];
      p_norm += pr[j] * pr[j];
    }
  }
  l1 *= inv_n;
  l2 *= inv_n;
  agreement *= inv_n;
  y_norm *= inv_n;
  p_norm *= inv_n;
  return {std::abs(l1 - (2.0 - 2.0 * agreement)),
          std::abs(l2 - (y_norm - 2.0 * agreement + p_norm))};
}

double verify_cs_decomposition(const Dense2& y, const Dense2& p) {
  check_distribution_rows(y, p, "verify_cs_decomposition");
  const double n = static_cast<double>(p.rows());
  double divergence = 0.0;
  double cross_entropy = 0.0;
  double log_norms = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto yr = y.row(i);
    auto pr = p.row(i);
    double dot = 0.0;
    double pp = 0.0;
    double yy = 0.0;
    for (std::size_t j = 0; j < pr.size(); ++j) {
      dot += pr[j] * yr[j];
      pp += pr[j] * pr[j];
      yy += yr[j] * yr[j];
      cross_entropy -= yr[j] * clamped_log(pr[j]);
    }
    divergence -= clamped_log(dot / (std::sqrt(pp) * std::sqrt(yy)));
    log_norms += std::log(pp);
  }
  return std::abs(divergence / n - cross_entropy / n - log_norms / (2.0 * n));
}

}  // namespace lossforge
