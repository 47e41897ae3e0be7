#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "generators.hpp"
#include "lossforge/error.hpp"
#include "lossforge/losses.hpp"
#include "lossforge/nn.hpp"
#include "lossforge/numerics.hpp"

namespace lossforge {
namespace {

using testing::for_all;
using testing::gen_normal;
using testing::gen_one_hot;

MlpModel identity_model(std::size_t d) {
  Rng rng(1);
  MlpModel m = MlpModel::init({{d, d, Activation::Linear, 1.0}}, rng);
  m.layers()[0].weights = Dense2::identity(d);
  std::fill(m.layers()[0].bias.begin(), m.layers()[0].bias.end(), 0.0);
  return m;
}

// Loss of the whole network as a function of its flattened parameters.
double network_loss(MlpModel model, std::span<const double> flat, const Dense2& x,
                    const Dense2& y, LossId loss) {
  std::size_t at = 0;
  for (auto& block : model.parameters()) {
    for (double& v : block.values) v = flat[at++];
  }
  Rng rng(0);
  return evaluate(loss, y, model.forward(x, rng).output).value;
}

std::vector<double> flat_params(MlpModel& model) {
  std::vector<double> out;
  for (const auto& block : model.parameters()) out.insert(out.end(), block.values.begin(), block.values.end());
  return out;
}

TEST(MlpSpecs, LinearModelHasOneLayer) {
  const auto specs = mlp_specs(784, 0, 512, 10, 0.5);
  ASSERT_EQ(specs.size(), 1u);
  EXPECT_EQ(specs[0], (LayerSpec{784, 10, Activation::Linear, 1.0}));
  Rng rng(1);
  const auto m = MlpModel::init(specs, rng);
  EXPECT_EQ(m.layers()[0].weights.rows(), 784u);
  EXPECT_EQ(m.layers()[0].weights.cols(), 10u);
  EXPECT_EQ(m.parameter_count(), 7850u);
}

TEST(MlpSpecs, HiddenLayersReluWithDropout) {
  const auto specs = mlp_specs(2, 3, 200, 4, 0.5);
  ASSERT_EQ(specs.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(specs[i].activation, Activation::Relu);
    EXPECT_EQ(specs[i].dropout_keep, 0.5);
  }
  EXPECT_EQ(specs[3], (LayerSpec{200, 4, Activation::Linear, 1.0}));
}

TEST(MlpInit, RejectsBrokenChainAndBadKeep) {
  Rng rng(1);
  EXPECT_THROW(MlpModel::init({{2, 3, Activation::Relu, 1.0}, {4, 2, Activation::Linear, 1.0}}, rng),
               ShapeError);
  EXPECT_THROW(MlpModel::init({{2, 3, Activation::Relu, 0.0}}, rng), DomainError);
  EXPECT_THROW(MlpModel::init({{2, 3, Activation::Relu, 1.5}}, rng), DomainError);
  EXPECT_THROW(MlpModel::init({}, rng), ShapeError);
}

TEST(MlpInit, SeedDeterministic) {
  Rng a(9), b(9);
  const auto specs = mlp_specs(5, 2, 7, 3, 1.0);
  EXPECT_TRUE(MlpModel::init(specs, a) == MlpModel::init(specs, b));
}

TEST(MlpInit, HeVariance) {
  Rng rng(10);
  const auto m = MlpModel::init(mlp_specs(2, 1, 200, 4, 1.0), rng);
  for (const auto& layer : m.layers()) {
    double s2 = 0.0;
    for (double w : layer.weights.values()) s2 += w * w;
    const double var = s2 / double(layer.weights.size());
    const double want = 2.0 / double(layer.spec.in_dim);
    EXPECT_NEAR(var, want, 0.2 * want);
    for (double b : layer.bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(MlpForward, IdentityIsPassThrough) {
  const MlpModel m = identity_model(3);
  Rng rng(1);
  const auto x = Dense2::from_rows({{1, -2, 3}, {0.5, 0, -1}});
  EXPECT_EQ(m.forward(x, rng).output, x);
  EXPECT_EQ(m.infer(x), x);
}

TEST(MlpForward, EvalDeterministic) {
  Rng rng(2);
  MlpModel m = MlpModel::init(mlp_specs(4, 2, 8, 3, 0.5), rng);
  m.set_mode(Mode::Eval);
  const Dense2 x = gen_normal(rng, 5, 4);
  Rng r1(100), r2(200);
  EXPECT_EQ(m.forward(x, r1).output, m.forward(x, r2).output);
  EXPECT_EQ(m.forward(x, r1).output, m.infer(x));
}

TEST(MlpForward, NegativePreactivationsGiveZeroHidden) {
  Rng rng(3);
  MlpModel m = MlpModel::init({{2, 3, Activation::Relu, 1.0}, {3, 2, Activation::Linear, 1.0}}, rng);
  m.layers()[0].bias = {-100, -100, -100};
  const auto x = Dense2::from_rows({{0.1, 0.2}, {-0.3, 0.4}});
  const auto r = m.forward(x, rng);
  for (double v : r.cache.inputs[1].values()) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(r.output(i, j), m.layers()[1].bias[j]);
  }
}

TEST(MlpForward, ShapeMismatchThrows) {
  Rng rng(4);
  const MlpModel m = MlpModel::init(mlp_specs(3, 1, 4, 2, 1.0), rng);
  EXPECT_THROW(m.forward(Dense2(2, 4), rng), ShapeError);
  EXPECT_THROW(m.infer(Dense2(2, 2)), ShapeError);
}

TEST(MlpForward, DropoutExpectationMatchesEval) {
  Rng rng(5);
  MlpModel m = MlpModel::init(mlp_specs(3, 1, 6, 2, 0.5), rng);
  const Dense2 x = gen_normal(rng, 1, 3);
  const Dense2 eval = m.infer(x);
  std::vector<double> mean(2, 0.0);
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const auto o = m.forward(x, rng).output;
    for (std::size_t j = 0; j < 2; ++j) mean[j] += o(0, j) / n;
  }
  // Dropout feeds straight into the linear output layer, so the train-mode
  // mean is unbiased for the eval output.
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(mean[j], eval(0, j), 0.02 * std::max(1.0, std::abs(eval(0, j))));
  }
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(6);
  const MlpModel m = MlpModel::init(mlp_specs(3, 2, 5, 4, 1.0), rng);
  const Dense2 x = gen_normal(rng, 7, 3);
  const auto r = m.forward(x, rng);
  const auto g = m.backward(r.cache, Dense2(7, 4));
  for (const auto& block : MlpModel::flatten(g)) {
    for (double v : block) EXPECT_EQ(v, 0.0);
  }
}

TEST(MlpBackward, LinearL2ClosedForm) {
  Rng rng(7);
  const MlpModel m = MlpModel::init(mlp_specs(3, 0, 1, 2, 1.0), rng);
  const Dense2 x = gen_normal(rng, 5, 3);
  const Dense2 y = gen_one_hot(rng, 5, 2);
  const auto r = m.forward(x, rng);
  const auto loss = lp_loss(2, y, r.output);
  const auto g = m.backward(r.cache, loss.grad);
  Dense2 resid = r.output;
  for (std::size_t i = 0; i < resid.size(); ++i) {
    resid.values()[i] = 2.0 * (r.output.values()[i] - y.values()[i]) / 5.0;
  }
  const Dense2 want = matmul_at_b(x, resid);
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(g.layers[0].weights.values()[i], want.values()[i], 1e-14);
  }
  const auto db = column_sums(resid);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(g.layers[0].bias[j], db[j], 1e-14);
}

TEST(MlpBackward, StaleCacheThrows) {
  Rng rng(8);
  const MlpModel a = MlpModel::init(mlp_specs(3, 1, 4, 2, 1.0), rng);
  const MlpModel b = MlpModel::init(mlp_specs(3, 2, 4, 2, 1.0), rng);
  const auto r = a.forward(gen_normal(rng, 2, 3), rng);
  EXPECT_THROW(b.backward(r.cache, r.output), ShapeError);
  EXPECT_THROW(a.backward(r.cache, Dense2(3, 2)), ShapeError);
}

TEST(MlpBackward, EndToEndMatchesFiniteDifferencesForEveryLoss) {
  for (const auto& s : all_losses()) {
    for_all(30 + static_cast<std::uint64_t>(s.id), 5, [&](Rng& rng, std::size_t) {
      MlpModel m = MlpModel::init({{2, 3, Activation::Relu, 1.0}, {3, 2, Activation::Linear, 1.0}}, rng);
      for (auto& b : m.layers()[0].bias) b = rng.uniform(0.1, 0.5);
      const Dense2 x = gen_normal(rng, 3, 2);
      const Dense2 y = gen_one_hot(rng, 3, 2);
      const auto r = m.forward(x, rng);
      // Skip points where a loss kink or a ReLU boundary lies inside the stencil.
      bool near_kink = false;
      for (double v : r.cache.inputs[1].values()) near_kink = near_kink || (v != 0 && v < 1e-3);
      const Dense2 ys = sign_encode(y);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double o = r.output.values()[i];
        if (s.id == LossId::L1) near_kink = near_kink || std::abs(o - y.values()[i]) < 1e-3;
        if (s.encoding == LabelEncoding::Sign) {
          near_kink = near_kink || std::abs(0.5 - ys.values()[i] * o) < 1e-3;
        }
      }
      if (near_kink) return;
      const auto loss = evaluate(s.id, y, r.output);
      std::vector<double> analytic;
      const Gradients grads = m.backward(r.cache, loss.grad);
      for (const auto& block : MlpModel::flatten(grads)) {
        analytic.insert(analytic.end(), block.begin(), block.end());
      }
      const auto flat = flat_params(m);
      const auto numeric = finite_diff_grad(
          [&](std::span<const double> v) { return network_loss(m, v, x, y, s.id); }, flat);
      EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << s.name;
    });
  }
}

TEST(MlpPredict, ArgmaxWithLowestTie) {
  const MlpModel m = identity_model(3);
  const auto x = Dense2::from_rows({{0.1, 2.0, -1.0}, {1, 1, 0}});
  EXPECT_EQ(m.predict_classes(x), (std::vector<std::size_t>{1, 0}));
  EXPECT_DOUBLE_EQ(m.accuracy(x, std::vector<int>{1, 1}), 0.5);
}

TEST(MlpPredict, UntrainedTenClassNearChance) {
  double total = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(1000 + s);
    const MlpModel m = MlpModel::init(mlp_specs(20, 1, 32, 10, 1.0), rng);
    const Dense2 x = gen_normal(rng, 1000, 20);
    std::vector<int> labels(1000);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
    total += m.accuracy(x, labels);
  }
  EXPECT_NEAR(total / seeds, 0.10, 0.03);
}

TEST(MlpCheckpoint, RoundTripIsExact) {
  Rng rng(11);
  MlpModel m = MlpModel::init(mlp_specs(5, 2, 7, 3, 0.5), rng);
  std::stringstream buf;
  m.save(buf);
  const MlpModel back = MlpModel::load(buf);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.mode(), Mode::Eval);
  const Dense2 x = gen_normal(rng, 4, 5);
  EXPECT_EQ(back.infer(x), m.infer(x));
  std::stringstream again;
  back.save(again);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(MlpCheckpoint, RejectsCorruptInput) {
  std::stringstream bad_version("lossforge-mlp 9\n");
  EXPECT_THROW(MlpModel::load(bad_version), Error);
  Rng rng(12);
  const MlpModel m = MlpModel::init(mlp_specs(2, 1, 3, 2, 1.0), rng);
  std::stringstream buf;
  m.save(buf);
  std::string text = buf.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(MlpModel::load(truncated), Error);
  std::stringstream garbage("not a checkpoint");
  EXPECT_THROW(MlpModel::load(garbage), Error);
}

}  // namespace
}  // namespace lossforge
