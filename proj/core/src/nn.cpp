#include "lossforge/nn.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lossforge/error.hpp"
#include "lossforge/numerics.hpp"

namespace lossforge {

namespace {

constexpr std::string_view kCheckpointMagic = "lossforge-mlp";
constexpr int kCheckpointVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw Error("checkpoint: bad number '" + token + "'");
  return v;
}

std::string_view activation_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

void expect_token(std::istream& in, std::string_view want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw Error("checkpoint: expected '" + std::string(want) + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, std::string_view what) {
  T v{};
  if (!(in >> v)) throw Error("checkpoint: truncated while reading " + std::string(what));
  return v;
}

void read_values(std::istream& in, std::span<double> out) {
  std::string token;
  for (double& v : out) {
    if (!(in >> token)) throw Error("checkpoint: truncated parameter data");
    v = parse_hex(token);
  }
}

void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ShapeError("MlpModel: no layers");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.in_dim == 0 || s.out_dim == 0) {
      throw ShapeError("MlpModel: layer " + std::to_string(i) + " has a zero dimension");
    }
    if (!(s.dropout_keep > 0.0 && s.dropout_keep <= 1.0)) {
      throw DomainError("MlpModel: layer " + std::to_string(i) + " dropout_keep outside (0, 1]");
    }
    if (i + 1 < specs.size() && s.out_dim != specs[i + 1].in_dim) {
      throw ShapeError("MlpModel: layer " + std::to_string(i) + " out_dim " +
                       std::to_string(s.out_dim) + " != layer " + std::to_string(i + 1) +
                       " in_dim " + std::to_string(specs[i + 1].in_dim));
    }
  }
}

}  // namespace

std::vector<LayerSpec> mlp_specs(std::size_t input_dim, std::size_t hidden, std::size_t width,
                                 std::size_t classes, double keep) {
  std::vector<LayerSpec> specs;
  std::size_t in = input_dim;
  for (std::size_t h = 0; h < hidden; ++h) {
    specs.push_back({in, width, Activation::Relu, keep});
    in = width;
  }
  specs.push_back({in, classes, Activation::Linear, 1.0});
  return specs;
}

MlpModel MlpModel::init(std::vector<LayerSpec> specs, Rng& rng) {
  validate_specs(specs);
  MlpModel model;
  for (const auto& s : specs) {
    DenseLayer layer{s, Dense2(s.in_dim, s.out_dim), std::vector<double>(s.out_dim, 0.0)};
    const double sd = std::sqrt(2.0 / static_cast<double>(s.in_dim));
    for (double& w : layer.weights.values()) w = rng.normal(0.0, sd);
    model.layers_.push_back(std::move(layer));
  }
  return model;
}

ForwardResult MlpModel::forward(const Dense2& x, Rng& rng) const {
  if (layers_.empty()) throw ShapeError("forward: empty model");
  if (x.cols() != input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(input_dim()));
  }
  ForwardResult result;
  result.cache.inputs.reserve(layers_.size());
  result.cache.factors.reserve(layers_.size());
  Dense2 current = x;
  for (const auto& layer : layers_) {
    Dense2 z = matmul(current, layer.weights);
    add_bias(z, layer.bias);
    const bool relu = layer.spec.activation == Activation::Relu;
    const bool drop = mode_ == Mode::Train && layer.spec.dropout_keep < 1.0;
    Dense2 factor;
    if (relu || drop) {
      factor = Dense2(z.rows(), z.cols(), 1.0);
      auto zv = z.values();
      auto fv = factor.values();
      const double keep = layer.spec.dropout_keep;
      const double scale = 1.0 / keep;
      // Output is z * factor for both ReLU (factor [z > 0]) and dropout
      // (factor mask / keep); one mask draw per unit keeps the stream aligned.
      for (std::size_t k = 0; k < zv.size(); ++k) {
        if (relu && !(zv[k] > 0.0)) fv[k] = 0.0;
        if (drop) fv[k] *= rng.bernoulli(keep) ? scale : 0.0;
        zv[k] = fv[k] == 0.0 ? 0.0 : zv[k] * fv[k];
      }
    }
    result.cache.inputs.push_back(std::move(current));
    result.cache.factors.push_back(std::move(factor));
    current = std::move(z);
  }
  result.output = std::move(current);
  return result;
}

Dense2 MlpModel::infer(const Dense2& x) const {
  if (layers_.empty()) throw ShapeError("infer: empty model");
  if (x.cols() != input_dim()) {
    throw ShapeError("infer: input has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(input_dim()));
  }
  Dense2 current = x;
  for (const auto& layer : layers_) {
    Dense2 z = matmul(current, layer.weights);
    add_bias(z, layer.bias);
    if (layer.spec.activation == Activation::Relu) {
      for (double& v : z.values()) v = std::max(v, 0.0);
    }
    current = std::move(z);
  }
  return current;
}

Gradients MlpModel::backward(const ForwardCache& cache, const Dense2& dl_do) const {
  if (cache.inputs.size() != layers_.size() || cache.factors.size() != layers_.size()) {
    throw ShapeError("backward: cache does not match the model's layer count");
  }
  if (dl_do.rows() != cache.inputs.front().rows() || dl_do.cols() != output_dim()) {
    throw ShapeError("backward: output gradient shape does not match the cached batch");
  }
  Gradients grads;
  grads.layers.resize(layers_.size());
  Dense2 delta = dl_do;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& input = cache.inputs[l];
    if (input.cols() != layers_[l].spec.in_dim) throw ShapeError("backward: stale cache");
    grads.layers[l].weights = matmul_at_b(input, delta);
    grads.layers[l].bias = column_sums(delta);
    if (l == 0) break;
    delta = matmul_a_bt(delta, layers_[l].weights);
    const auto& factor = cache.factors[l - 1];
    if (!factor.empty()) {
      if (factor.rows() != delta.rows() || factor.cols() != delta.cols()) {
        throw ShapeError("backward: stale cache");
      }
      auto dv = delta.values();
      auto fv = factor.values();
      for (std::size_t k = 0; k < dv.size(); ++k) dv[k] *= fv[k];
    }
  }
  return grads;
}

std::vector<std::size_t> MlpModel::predict_classes(const Dense2& x) const {
  return argmax_rows(infer(x));
}

double MlpModel::accuracy(const Dense2& x, std::span<const int> labels) const {
  if (x.rows() != labels.size()) throw ShapeError("accuracy: label count != rows");
  if (labels.empty()) return 0.0;
  const auto predicted = predict_classes(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<int>(predicted[i]) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::size_t MlpModel::input_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.front().spec.in_dim;
}

std::size_t MlpModel::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().spec.out_dim;
}

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<ParamBlock> MlpModel::parameters() {
  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    blocks.push_back({"layer " + std::to_string(i) + " weights", layers_[i].weights.values()});
    blocks.push_back({"layer " + std::to_string(i) + " bias", layers_[i].bias});
  }
  return blocks;
}

std::vector<std::span<const double>> MlpModel::flatten(const Gradients& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& g : grads.layers) {
    out.push_back(g.weights.values());
    out.push_back(g.bias);
  }
  return out;
}

void MlpModel::save(std::ostream& out) const {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "layers " << layers_.size() << '\n';
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    out << "layer " << i << " in " << l.spec.in_dim << " out " << l.spec.out_dim << " activation "
        << activation_name(l.spec.activation) << " keep " << hex(l.spec.dropout_keep) << '\n';
    out << "weights\n";
    for (std::size_t r = 0; r < l.weights.rows(); ++r) {
      auto row = l.weights.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << hex(row[c]);
      out << '\n';
    }
    out << "bias\n";
    for (std::size_t c = 0; c < l.bias.size(); ++c) out << (c ? " " : "") << hex(l.bias[c]);
    out << '\n';
  }
  out << "end\n";
}

MlpModel MlpModel::load(std::istream& in) {
  expect_token(in, kCheckpointMagic);
  const int version = read_value<int>(in, "version");
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  expect_token(in, "layers");
  const auto count = read_value<std::size_t>(in, "layer count");
  std::vector<LayerSpec> specs;
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < count; ++i) {
    expect_token(in, "layer");
    if (read_value<std::size_t>(in, "layer index") != i) throw Error("checkpoint: layers out of order");
    LayerSpec s;
    expect_token(in, "in");
    s.in_dim = read_value<std::size_t>(in, "in_dim");
    expect_token(in, "out");
    s.out_dim = read_value<std::size_t>(in, "out_dim");
    expect_token(in, "activation");
    const auto act = read_value<std::string>(in, "activation");
    if (act == "relu") {
      s.activation = Activation::Relu;
    } else if (act == "linear") {
      s.activation = Activation::Linear;
    } else {
      throw Error("checkpoint: unknown activation '" + act + "'");
    }
    expect_token(in, "keep");
    s.dropout_keep = parse_hex(read_value<std::string>(in, "keep"));
    specs.push_back(s);
    validate_specs(specs);
    DenseLayer layer{s, Dense2(s.in_dim, s.out_dim), std::vector<double>(s.out_dim)};
    expect_token(in, "weights");
    read_values(in, layer.weights.values());
    expect_token(in, "bias");
    read_values(in, layer.bias);
    layers.push_back(std::move(layer));
  }
  expect_token(in, "end");
  MlpModel model;
  model.layers_ = std::move(layers);
  model.mode_ = Mode::Eval;
  validate_specs(specs);
  return model;
}

void MlpModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  save(out);
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

MlpModel MlpModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("checkpoint: cannot read " + path.string());
  return load(in);
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (!(a.spec == b.spec) || !(a.weights == b.weights) || a.bias != b.bias) return false;
  }
  return true;
}

}  // namespace lossforge
