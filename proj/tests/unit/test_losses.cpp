#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "generators.hpp"
#include "lossforge/error.hpp"
#include "lossforge/losses.hpp"
#include "lossforge/numerics.hpp"
#include "lossforge/verification.hpp"

namespace lossforge {
namespace {

using testing::for_all;
using testing::gen_distribution;
using testing::gen_normal;
using testing::gen_one_hot;
using testing::gen_size;

const double kLn2 = std::numbers::ln2;

Dense2 row(std::initializer_list<double> v) { return Dense2::from_rows({v}); }

// Straight transcription of the per-sample table formulas, written without
// sharing any code with the library. Used as the value oracle.
double reference_value(LossId id, std::span<const double> y, std::span<const double> o) {
  const std::size_t k = y.size();
  const auto p = softmax(o);
  double s = 0.0;
  switch (id) {
    case LossId::L1:
      for (std::size_t j = 0; j < k; ++j) s += std::abs(y[j] - o[j]);
      return s;
    case LossId::L2:
      for (std::size_t j = 0; j < k; ++j) s += (y[j] - o[j]) * (y[j] - o[j]);
      return s;
    case LossId::ExpectationL1:
      for (std::size_t j = 0; j < k; ++j) s += std::abs(y[j] - p[j]);
      return s;
    case LossId::ExpectationL2:
      for (std::size_t j = 0; j < k; ++j) s += (y[j] - p[j]) * (y[j] - p[j]);
      return s;
    case LossId::Chebyshev:
      for (std::size_t j = 0; j < k; ++j) s = std::max(s, std::abs(p[j] - y[j]));
      return s;
    case LossId::Hinge:
    case LossId::Hinge2:
    case LossId::Hinge3: {
      const int q = id == LossId::Hinge ? 1 : id == LossId::Hinge2 ? 2 : 3;
      for (std::size_t j = 0; j < k; ++j) {
        s += std::pow(std::max(0.0, 0.5 - (2 * y[j] - 1) * o[j]), q);
      }
      return s;
    }
    case LossId::Log:
      for (std::size_t j = 0; j < k; ++j) s -= y[j] * std::log(p[j]);
      return s;
    case LossId::Log2:
      for (std::size_t j = 0; j < k; ++j) s += std::pow(y[j] * std::log(p[j]), 2);
      return s;
    case LossId::Tanimoto: {
      double py = 0, pp = 0, yy = 0;
      for (std::size_t j = 0; j < k; ++j) {
        py += p[j] * y[j];
        pp += p[j] * p[j];
        yy += y[j] * y[j];
      }
      return -py / (pp + yy - py);
    }
    case LossId::CauchySchwarz: {
      double py = 0, pp = 0, yy = 0;
      for (std::size_t j = 0; j < k; ++j) {
        py += p[j] * y[j];
        pp += p[j] * p[j];
        yy += y[j] * y[j];
      }
      return -std::log(py / (std::sqrt(pp) * std::sqrt(yy)));
    }
  }
  return 0.0;
}

TEST(LossCatalog, TwelveLossesWithMetadata) {
  ASSERT_EQ(all_losses().size(), kLossCount);
  for (const auto& s : all_losses()) {
    EXPECT_EQ(parse_loss(s.name), s.id);
    EXPECT_EQ(&spec_of(s.id), &s);
    const bool raw = s.id == LossId::L1 || s.id == LossId::L2 || s.id == LossId::Hinge ||
                     s.id == LossId::Hinge2 || s.id == LossId::Hinge3;
    EXPECT_EQ(s.domain == InputDomain::RawOutput, raw) << s.name;
    EXPECT_EQ(s.squash == Squash::None, raw) << s.name;
    if (!raw) EXPECT_EQ(s.squash, Squash::Softmax) << s.name;
    const bool hinge = s.id == LossId::Hinge || s.id == LossId::Hinge2 || s.id == LossId::Hinge3;
    EXPECT_EQ(s.encoding == LabelEncoding::Sign, hinge) << s.name;
  }
  EXPECT_FALSE(parse_loss("nope"));
  EXPECT_EQ(parse_squash("sigmoid"), Squash::Sigmoid);
  EXPECT_FALSE(parse_squash("tanh"));
}

TEST(LpLoss, Examples) {
  auto e = lp_loss(1, row({1, 0}), row({1, 0}));
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.grad, row({0, 0}));
  e = lp_loss(2, row({1, 0}), row({1, 0}));
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.grad, row({0, 0}));
  e = lp_loss(2, row({1, 0}), row({0.5, 0.5}));
  EXPECT_DOUBLE_EQ(e.value, 0.5);
  EXPECT_EQ(e.grad, row({-1, 1}));
  EXPECT_DOUBLE_EQ(lp_loss(1, row({1, 0}), row({0.7, 0.3})).value, 0.6);
}

TEST(LpLoss, BatchMeanAndShapeError) {
  const auto y = Dense2::from_rows({{1, 0}, {0, 1}});
  const auto o = Dense2::from_rows({{0, 0}, {0, 1}});
  const auto e = lp_loss(2, y, o);
  EXPECT_DOUBLE_EQ(e.value, 0.5);
  EXPECT_EQ(e.grad, Dense2::from_rows({{-1, 0}, {0, 0}}));
  EXPECT_THROW(lp_loss(1, row({1, 0}), row({1, 0, 0})), ShapeError);
}

TEST(ExpectationLoss, UniformBinarySoftmax) {
  EXPECT_DOUBLE_EQ(expectation_loss(1, row({1, 0}), row({0, 0})).value, 1.0);
  EXPECT_DOUBLE_EQ(expectation_loss(2, row({1, 0}), row({0, 0})).value, 0.5);
}

TEST(ExpectationLoss, SigmoidGradientProbes) {
  const Dense2 y(1, 1, 1.0);
  EXPECT_NEAR(expectation_loss(1, y, Dense2(1, 1, 0.0), Squash::Sigmoid).grad(0, 0), -0.25,
              1e-12);
  const double left = expectation_loss(1, y, Dense2(1, 1, -30.0), Squash::Sigmoid).grad(0, 0);
  const double right = expectation_loss(1, y, Dense2(1, 1, 30.0), Squash::Sigmoid).grad(0, 0);
  EXPECT_LT(std::abs(left), 1e-10);
  EXPECT_LT(std::abs(right), 1e-10);
  EXPECT_GT(0.25, std::abs(left));
  EXPECT_GT(0.25, std::abs(right));
}

TEST(ChebyshevLoss, Examples) {
  EXPECT_DOUBLE_EQ(chebyshev_loss(row({0, 1, 0, 0}), row({0, 0, 0, 0})).value, 0.75);
  EXPECT_NEAR(chebyshev_loss(row({0, 1}), row({-40, 40})).value, 0.0, 1e-30);
}

TEST(ChebyshevLoss, TieRoutesToLowestIndex) {
  // Under sigmoid with o = 0 both gaps are 0.5; only coordinate 0 carries gradient.
  const auto e = chebyshev_loss(row({1, 0}), row({0, 0}), Squash::Sigmoid);
  EXPECT_DOUBLE_EQ(e.value, 0.5);
  EXPECT_DOUBLE_EQ(e.grad(0, 0), -0.25);
  EXPECT_EQ(e.grad(0, 1), 0.0);
}

TEST(HingeLoss, Examples) {
  for (int q : {1, 2, 3}) EXPECT_EQ(hinge_loss(q, row({1, -1}), row({1, -1})).value, 0.0);
  EXPECT_DOUBLE_EQ(hinge_loss(1, row({1, -1}), row({0, 0})).value, 1.0);
  EXPECT_DOUBLE_EQ(hinge_loss(2, row({1, -1}), row({0, 0})).value, 0.5);
  EXPECT_DOUBLE_EQ(hinge_loss(3, row({1, -1}), row({0, 0})).value, 0.25);
}

TEST(HingeLoss, RejectsNonSignLabels) {
  EXPECT_THROW(hinge_loss(1, row({1, 0}), row({0, 0})), DomainError);
  EXPECT_THROW(hinge_loss(2, row({0.5, -1}), row({0, 0})), DomainError);
}

TEST(HingeLoss, KinkSubgradientIsZero) {
  const auto e = hinge_loss(1, row({1, -1}), row({0.5, -0.5}));
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.grad, row({0, 0}));
}

TEST(HingeLoss, MarginIsConfigurable) {
  EXPECT_DOUBLE_EQ(hinge_loss(1, row({1, -1}), row({0, 0}), 1.0).value, 2.0);
  LossOptions opt;
  opt.hinge_margin = 1.0;
  EXPECT_DOUBLE_EQ(evaluate(LossId::Hinge, row({1, 0}), row({0, 0}), opt).value, 2.0);
}

TEST(HingeLoss, ViolatedGradientMatchesFiniteDifferences) {
  for_all(21, 100, [](Rng& rng, std::size_t) {
    const std::size_t k = gen_size(rng, 2, 8);
    const Dense2 y = sign_encode(gen_one_hot(rng, 1, k));
    Dense2 o(1, k);
    // Every margin strictly violated: yhat * o < 0.5 - 0.01.
    for (std::size_t j = 0; j < k; ++j) o(0, j) = y(0, j) * (0.49 - rng.uniform(0.0, 3.0));
    for (int q : {1, 2, 3}) {
      const auto analytic = hinge_loss(q, y, o).grad;
      const auto numeric = finite_diff_grad(
          [&](std::span<const double> v) {
            return hinge_loss(q, y, Dense2(1, k, {v.begin(), v.end()})).value;
          },
          o.values());
      EXPECT_LT(max_relative_error(analytic.values(), numeric), 1e-6);
    }
  });
}

TEST(LogLoss, Examples) {
  EXPECT_NEAR(log_loss(1, row({1, 0}), row({0, 0})).value, kLn2, 1e-15);
  // p_true = e^-1 with K = 2: logits (0, log(e - 1)) give p_0 = 1/e.
  const auto o = row({0, std::log(std::numbers::e - 1.0)});
  EXPECT_NEAR(log_loss(2, row({1, 0}), o).value, 1.0, 1e-14);
  EXPECT_NEAR(log_loss(2, row({1, 0}), o, Squash::Softmax, true).value, -1.0, 1e-14);
}

TEST(LogLoss, GradientIsPMinusY) {
  for_all(22, 200, [](Rng& rng, std::size_t) {
    const std::size_t n = gen_size(rng, 1, 5), k = gen_size(rng, 2, 10);
    const Dense2 y = gen_one_hot(rng, n, k);
    const Dense2 o = gen_normal(rng, n, k, 3.0);
    const auto e = log_loss(1, y, o);
    const Dense2 p = softmax_rows(o);
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_NEAR(e.grad.values()[i], (p.values()[i] - y.values()[i]) / double(n), 1e-15);
    }
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> v) {
          return log_loss(1, y, Dense2(n, k, {v.begin(), v.end()})).value;
        },
        o.values());
    EXPECT_LT(max_relative_error(e.grad.values(), numeric), 1e-7);
  });
}

TEST(LogLoss, ClampKeepsValuesFinite) {
  const auto e = log_loss(1, row({1, 0}), row({-1000, 1000}));
  EXPECT_TRUE(std::isfinite(e.value));
  EXPECT_TRUE(e.grad.all_finite());
  const auto t = tanimoto_loss(row({1, 0}), row({-1000, 1000}));
  EXPECT_TRUE(std::isfinite(t.value));
  const auto c = cauchy_schwarz_loss(row({1, 0}), row({-1000, 1000}));
  EXPECT_TRUE(std::isfinite(c.value));
  EXPECT_TRUE(c.grad.all_finite());
}

TEST(TanimotoLoss, Examples) {
  EXPECT_NEAR(tanimoto_loss(row({0, 0, 1, 0}), row({0, 0, 0, 0})).value, -0.25, 1e-15);
  EXPECT_NEAR(tanimoto_loss(row({0, 1}), row({-40, 40})).value, -1.0, 1e-15);
}

TEST(CauchySchwarzLoss, Examples) {
  EXPECT_NEAR(cauchy_schwarz_loss(row({1, 0, 0, 0}), row({0, 0, 0, 0})).value, kLn2, 1e-15);
  EXPECT_NEAR(cauchy_schwarz_loss(row({0, 1}), row({-40, 40})).value, 0.0, 1e-15);
}

TEST(AllLosses, ValuesMatchReferenceEvaluator) {
  for (const auto& s : all_losses()) {
    for_all(23, 100, [&](Rng& rng, std::size_t) {
      const std::size_t n = gen_size(rng, 1, 4), k = gen_size(rng, 2, 9);
      const Dense2 y = gen_one_hot(rng, n, k);
      const Dense2 o = gen_normal(rng, n, k, 2.0);
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += reference_value(s.id, y.row(i), o.row(i));
      mean /= double(n);
      EXPECT_NEAR(evaluate(s.id, y, o).value, mean, 1e-12 * std::max(1.0, std::abs(mean)))
          << s.name;
    });
  }
}

TEST(AllLosses, GradientOracle) {
  GradCheckOptions options;
  options.trials = 200;
  for (const auto& s : all_losses()) {
    const auto r = check_loss_gradient(s.id, options);
    EXPECT_EQ(r.points, 200u);
    EXPECT_LT(r.max_rel_error, 1e-5) << s.name;
    EXPECT_TRUE(r.passed) << s.name;
  }
}

TEST(AllLosses, GradientOracleUnderSigmoid) {
  GradCheckOptions options;
  options.trials = 100;
  options.loss_options.squash = Squash::Sigmoid;
  for (const auto& s : all_losses()) {
    if (s.domain != InputDomain::Probability) continue;
    EXPECT_TRUE(check_loss_gradient(s.id, options).passed) << s.name;
  }
}

TEST(AllLosses, SmoothSamplerAvoidsKinks) {
  for_all(24, 300, [](Rng& rng, std::size_t) {
    const auto l1 = sample_smooth_point(LossId::L1, rng);
    for (std::size_t j = 0; j < l1.o.cols(); ++j) {
      EXPECT_GT(std::abs(l1.o(0, j) - l1.y(0, j)), 1e-3);
    }
    const auto h = sample_smooth_point(LossId::Hinge2, rng);
    for (std::size_t j = 0; j < h.o.cols(); ++j) {
      EXPECT_GT(std::abs(0.5 - (2 * h.y(0, j) - 1) * h.o(0, j)), 1e-3);
    }
  });
}

TEST(AllLosses, PermutationEquivariance) {
  for (const auto& s : all_losses()) {
    for_all(25, 50, [&](Rng& rng, std::size_t) {
      const std::size_t k = gen_size(rng, 2, 8);
      const Dense2 y = gen_one_hot(rng, 2, k);
      const Dense2 o = gen_normal(rng, 2, k, 2.0);
      std::vector<std::size_t> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span(perm));
      Dense2 yp(2, k), op(2, k);
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          yp(i, j) = y(i, perm[j]);
          op(i, j) = o(i, perm[j]);
        }
      }
      const auto a = evaluate(s.id, y, o);
      const auto b = evaluate(s.id, yp, op);
      EXPECT_NEAR(a.value, b.value, 1e-12 * std::max(1.0, std::abs(a.value))) << s.name;
      // Chebyshev breaks ties by index, which is not permutation invariant;
      // random continuous draws are untied with probability one.
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          EXPECT_NEAR(b.grad(i, j), a.grad(i, perm[j]), 1e-12) << s.name;
        }
      }
    });
  }
}

Dense2 minimizer_output(const LossSpec& s, const Dense2& y) {
  Dense2 o = y;
  if (s.domain == InputDomain::RawOutput && s.encoding == LabelEncoding::OneHot) return o;
  for (double& v : o.values()) v = (2 * v - 1) * 30.0;
  return o;
}

TEST(AllLosses, MinimizerSanity) {
  // Probability losses only approach p = y in the limit, so compare against
  // the value at p = y (0, or -1 for Tanimoto) rather than a finite point.
  for (const auto& s : all_losses()) {
    const double at_target = s.id == LossId::Tanimoto ? -1.0 : 0.0;
    for_all(26, 20, [&](Rng& rng, std::size_t) {
      const std::size_t k = gen_size(rng, 2, 8);
      const Dense2 y = gen_one_hot(rng, 1, k);
      const Dense2 best = minimizer_output(s, y);
      EXPECT_NEAR(evaluate(s.id, y, best).value, at_target, 1e-11) << s.name;
      for (int t = 0; t < 100; ++t) {
        Dense2 o = best;
        for (double& v : o.values()) v += rng.normal(0.0, 1.0);
        EXPECT_LE(at_target, evaluate(s.id, y, o).value) << s.name;
      }
    });
  }
}

TEST(AllLosses, PiecewiseLinearGradients) {
  // On each linear piece the second difference of the gradient vanishes.
  for (LossId id : {LossId::L2, LossId::Hinge2}) {
    for_all(27, 100, [&](Rng& rng, std::size_t) {
      const std::size_t k = gen_size(rng, 2, 6);
      const Dense2 y = gen_one_hot(rng, 1, k);
      const Dense2 o = gen_normal(rng, 1, k, 2.0);
      const Dense2 dir = gen_normal(rng, 1, k);
      const double t = 1e-4;
      Dense2 lo = o, hi = o;
      for (std::size_t j = 0; j < k; ++j) {
        lo(0, j) -= t * dir(0, j);
        hi(0, j) += t * dir(0, j);
      }
      if (id == LossId::Hinge2) {
        const Dense2 ys = sign_encode(y);
        bool crosses = false;
        for (std::size_t j = 0; j < k; ++j) {
          const bool a = 0.5 - ys(0, j) * lo(0, j) > 0, b = 0.5 - ys(0, j) * hi(0, j) > 0;
          crosses = crosses || a != b;
        }
        if (crosses) return;
      }
      const auto g0 = evaluate(id, y, lo).grad, g1 = evaluate(id, y, o).grad,
                 g2 = evaluate(id, y, hi).grad;
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_NEAR(g2(0, j) - 2 * g1(0, j) + g0(0, j), 0.0, 1e-12);
      }
    });
  }
}

TEST(Encodings, OneHotAndSign) {
  const std::vector<int> labels{2, 0};
  const Dense2 y = one_hot(labels, 3);
  EXPECT_EQ(y, Dense2::from_rows({{0, 0, 1}, {1, 0, 0}}));
  EXPECT_EQ(sign_encode(y), Dense2::from_rows({{-1, -1, 1}, {1, -1, -1}}));
  EXPECT_THROW(one_hot(std::vector<int>{3}, 3), DomainError);
}

TEST(ExpectationIdentity, Examples) {
  const auto r = verify_expectation_identity(row({1, 0}), row({0.7, 0.3}));
  EXPECT_LT(r.l1, 1e-15);
  EXPECT_LT(r.l2, 1e-15);
  const auto exact = verify_expectation_identity(row({0, 1, 0}), row({0, 1, 0}));
  EXPECT_EQ(exact.l1, 0.0);
  EXPECT_EQ(exact.l2, 0.0);
}

TEST(ExpectationIdentity, RandomBatchesExact) {
  for_all(28, 1000, [](Rng& rng, std::size_t) {
    const std::size_t n = gen_size(rng, 1, 64), k = gen_size(rng, 2, 10);
    const auto r = verify_expectation_identity(gen_one_hot(rng, n, k), gen_distribution(rng, n, k));
    EXPECT_LT(r.l1, 1e-12);
    EXPECT_LT(r.l2, 1e-12);
  });
}

TEST(ExpectationIdentity, RejectsInvalidInputs) {
  EXPECT_THROW(verify_expectation_identity(row({1, 0}), row({0.7, 0.4})), DomainError);
  EXPECT_THROW(verify_expectation_identity(row({1, 1}), row({0.7, 0.3})), DomainError);
  EXPECT_THROW(verify_cs_decomposition(row({1, 0}), row({0.5, 0.49})), DomainError);
  EXPECT_THROW(verify_cs_decomposition(row({1, 0}), row({0.7, 0.3, 0.0})), ShapeError);
}

TEST(CsDecomposition, Examples) {
  EXPECT_EQ(verify_cs_decomposition(row({0, 0, 1}), row({0, 0, 1})), 0.0);
  const Dense2 y = row({1, 0, 0, 0}), p = row({0.25, 0.25, 0.25, 0.25});
  // D_CS = ln 2, log loss = ln 4, half log ||p||^2 = -ln 2.
  EXPECT_NEAR(cauchy_schwarz_loss(y, Dense2(1, 4)).value, kLn2, 1e-15);
  EXPECT_NEAR(log_loss(1, y, Dense2(1, 4)).value, 2 * kLn2, 1e-15);
  EXPECT_LT(verify_cs_decomposition(y, p), 1e-15);
}

TEST(CsDecomposition, RandomBatchesExact) {
  for_all(29, 1000, [](Rng& rng, std::size_t) {
    const std::size_t n = gen_size(rng, 1, 64), k = gen_size(rng, 2, 10);
    EXPECT_LT(verify_cs_decomposition(gen_one_hot(rng, n, k), gen_distribution(rng, n, k)), 1e-10);
  });
}

TEST(Theory, DefaultRunPassesAndPerturbedFails) {
  const auto ok = verify_theory({});
  EXPECT_TRUE(ok.passed());
  EXPECT_NEAR(ok.probes[1].gradient, -0.25, 1e-12);
  TheoryOptions bad;
  bad.trials = 50;
  bad.perturb = 1e-3;
  const auto r = verify_theory(bad);
  EXPECT_FALSE(r.expectation_passed());
  EXPECT_FALSE(r.cs_passed());
  EXPECT_TRUE(r.probes_passed());
}

TEST(Theory, LogClosedForm) { EXPECT_LT(log_closed_form_gap(200, 3), 1e-15); }

}  // namespace
}  // namespace lossforge
