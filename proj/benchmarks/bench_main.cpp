#include <benchmark/benchmark.h>

#include "lossforge/losses.hpp"
#include "lossforge/nn.hpp"
#include "lossforge/numerics.hpp"
#include "lossforge/optim.hpp"
#include "lossforge/rng.hpp"

namespace {

using namespace lossforge;

Dense2 normal(Rng& rng, std::size_t r, std::size_t c) {
  Dense2 out(r, c);
  for (double& v : out.values()) v = rng.normal();
  return out;
}

void BM_Loss(benchmark::State& state) {
  const auto id = static_cast<LossId>(state.range(0));
  Rng rng(1);
  const Dense2 o = normal(rng, 100, 10);
  std::vector<int> labels(100);
  for (int& l : labels) l = static_cast<int>(rng.below(10));
  const Dense2 y = one_hot(labels, 10);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(id, y, o));
  state.SetLabel(std::string(name_of(id)));
}
BENCHMARK(BM_Loss)->DenseRange(0, static_cast<int>(kLossCount) - 1);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Dense2 a = normal(rng, 100, n), b = normal(rng, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 100 * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(200)->Arg(512);

// One training step of the MNIST-shaped network: forward, loss, backward, Adam.
void BM_TrainStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  MlpModel model = MlpModel::init(mlp_specs(784, hidden, 512, 10, 0.5), rng);
  const Dense2 x = normal(rng, 100, 784);
  std::vector<int> labels(100);
  for (int& l : labels) l = static_cast<int>(rng.below(10));
  const Dense2 y = one_hot(labels, 10);
  AdamState adam{AdamConfig{}, 0, {}, {}};
  for (auto _ : state) {
    const auto fwd = model.forward(x, rng);
    const auto loss = evaluate(LossId::Log, y, fwd.output);
    const auto grads = model.backward(fwd.cache, loss.grad);
    adam_step(adam, model.parameters(), MlpModel::flatten(grads));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
