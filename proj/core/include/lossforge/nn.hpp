#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "lossforge/dense.hpp"
#include "lossforge/optim.hpp"
#include "lossforge/rng.hpp"

namespace lossforge {

enum class Activation { Linear, Relu };

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::Linear;
  /// Probability of keeping a unit in train mode; 1 disables dropout.
  double dropout_keep = 1.0;

  bool operator==(const LayerSpec&) const = default;
};

/// Specs for `hidden` ReLU layers of `width` units, each followed by dropout
/// with keep probability `keep`, then a linear output layer of `classes`
/// units. hidden == 0 yields the single-layer linear model.
std::vector<LayerSpec> mlp_specs(std::size_t input_dim, std::size_t hidden, std::size_t width,
                                 std::size_t classes, double keep);

struct DenseLayer {
  LayerSpec spec;
  Dense2 weights;  // in_dim x out_dim
  std::vector<double> bias;
};

enum class Mode { Train, Eval };

/// What backward needs from forward: each layer's input and, for layers with
/// a ReLU or dropout, the elementwise derivative of activation-then-dropout.
struct ForwardCache {
  std::vector<Dense2> inputs;
  std::vector<Dense2> factors;
};

struct ForwardResult {
  Dense2 output;
  ForwardCache cache;
};

struct LayerGrads {
  Dense2 weights;
  std::vector<double> bias;
};

struct Gradients {
  std::vector<LayerGrads> layers;
};

class MlpModel {
 public:
  MlpModel() = default;

  /// He initialization: weights ~ N(0, 2 / in_dim), biases 0. Throws
  /// ShapeError if the dims do not chain and DomainError for keep outside (0, 1].
  static MlpModel init(std::vector<LayerSpec> specs, Rng& rng);

  /// In train mode applies inverted dropout after every hidden activation,
  /// drawing masks from `rng`; eval mode is deterministic and ignores rng.
  ForwardResult forward(const Dense2& x, Rng& rng) const;
  /// Eval-mode forward without a cache, regardless of the current mode.
  Dense2 infer(const Dense2& x) const;

  /// Parameter gradients of the loss whose output gradient is `dl_do`.
  Gradients backward(const ForwardCache& cache, const Dense2& dl_do) const;

  /// argmax of the eval-mode output; ties resolve to the lowest class.
  std::vector<std::size_t> predict_classes(const Dense2& x) const;
  double accuracy(const Dense2& x, std::span<const int> labels) const;

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode m) noexcept { mode_ = m; }

  std::span<const DenseLayer> layers() const noexcept { return layers_; }
  std::span<DenseLayer> layers() noexcept { return layers_; }
  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t parameter_count() const noexcept;

  /// Weights then bias of each layer, named "layer <i> weights|bias".
  std::vector<ParamBlock> parameters();
  static std::vector<std::span<const double>> flatten(const Gradients& grads);

  void save(std::ostream& out) const;
  static MlpModel load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static MlpModel load(const std::filesystem::path& path);

  bool operator==(const MlpModel& other) const;

 private:
  std::vector<DenseLayer> layers_;
  Mode mode_ = Mode::Train;
};

}  // namespace lossforge
