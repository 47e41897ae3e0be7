#include "lossforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <utility>

#include "lossforge/losses.hpp"

namespace lossforge {

void Dataset::validate() const {
  if (x.rows() != labels.size()) {
    throw ShapeError("Dataset: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(x.rows()) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DomainError("Dataset: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

Dense2 Dataset::one_hot() const { return lossforge::one_hot(labels, classes); }

Dense2 Dataset::sign_labels() const { return sign_encode(one_hot()); }

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{x.gather_rows(indices), {}, classes};
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx);
}

int checkerboard_class(double x0, double x1) noexcept {
  auto cell = [](double c) {
    const auto i = static_cast<long>(std::floor((c + 1.0) * 4.0));
    return std::clamp(i, 0L, 7L);
  };
  return static_cast<int>((cell(x0) + cell(x1)) % 4);
}

namespace {

Dataset checkerboard_set(std::size_t n, Rng& rng) {
  Dataset d{Dense2(n, 2), std::vector<int>(n), 4};
  for (std::size_t i = 0; i < n; ++i) {
    d.x(i, 0) = rng.uniform(-1.0, 1.0);
    d.x(i, 1) = rng.uniform(-1.0, 1.0);
    d.labels[i] = checkerboard_class(d.x(i, 0), d.x(i, 1));
  }
  return d;
}

Dataset spiral_set(std::size_t n, std::size_t arms, double noise_sd, Rng& rng) {
  Dataset d{Dense2(n, 2), std::vector<int>(n), arms};
  const std::size_t per_arm = n / arms;
  std::size_t i = 0;
  for (std::size_t arm = 0; arm < arms; ++arm) {
    for (std::size_t k = 0; k < per_arm; ++k, ++i) {
      const auto p = spiral_point(arm, arms, rng.uniform());
      d.x(i, 0) = p[0] + noise_sd * rng.normal();
      d.x(i, 1) = p[1] + noise_sd * rng.normal();
      d.labels[i] = static_cast<int>(arm);
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  rng.shuffle(std::span(order));
  return d.subset(order);
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Split gen_checkerboard(std::size_t n_per_split, Rng& rng) {
  if (n_per_split == 0) throw DomainError("gen_checkerboard: n_per_split must be positive");
  Split s;
  s.train = checkerboard_set(n_per_split, rng);
  s.test = checkerboard_set(n_per_split, rng);
  return s;
}

std::array<double, 2> spiral_point(std::size_t arm, std::size_t arms, double t) noexcept {
  const double angle = 3.0 * std::numbers::pi * t +
                       2.0 * std::numbers::pi * static_cast<double>(arm) / static_cast<double>(arms);
  return {t * std::cos(angle), t * std::sin(angle)};
}

Split gen_spiral(std::size_t n_per_split, std::size_t arms, double noise_sd, Rng& rng) {
  if (arms < 2) throw DomainError("gen_spiral: need at least two arms");
  if (n_per_split == 0 || n_per_split % arms != 0) {
    throw DomainError("gen_spiral: n_per_split must be a positive multiple of arms");
  }
  if (!(noise_sd >= 0.0)) throw DomainError("gen_spiral: negative noise_sd");
  Split s;
  s.train = spiral_set(n_per_split, arms, noise_sd, rng);
  s.test = spiral_set(n_per_split, arms, noise_sd, rng);
  return s;
}

Dataset gen_random_labels(std::size_t n, std::size_t d, std::size_t classes, Rng& rng) {
  if (d == 0 || classes == 0) throw DomainError("gen_random_labels: d and classes must be positive");
  Dataset out{Dense2(n, d), std::vector<int>(n), classes};
  std::set<std::vector<double>> seen;
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    do {
      for (double& v : row) v = rng.uniform(-1.0, 1.0);
    } while (!seen.insert(row).second);
    std::copy(row.begin(), row.end(), out.x.row(i).begin());
    out.labels[i] = static_cast<int>(rng.below(classes));
  }
  return out;
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw IdxTruncatedError("IDX images: header shorter than 16 bytes");
  const auto magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    throw IdxMagicError("IDX images: magic " + std::to_string(magic) + ", expected 2051");
  }
  IdxImages out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  const std::size_t need = out.count * out.rows * out.cols;
  if (bytes.size() - 16 < need) {
    throw IdxTruncatedError("IDX images: " + std::to_string(bytes.size() - 16) +
                            " pixel bytes, header promises " + std::to_string(need));
  }
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw IdxTruncatedError("IDX labels: header shorter than 8 bytes");
  const auto magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic) {
    throw IdxMagicError("IDX labels: magic " + std::to_string(magic) + ", expected 2049");
  }
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) {
    throw IdxTruncatedError("IDX labels: " + std::to_string(bytes.size() - 8) +
                            " label bytes, header promises " + std::to_string(count));
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

IdxImages read_idx_images(const std::filesystem::path& path) {
  return parse_idx_images(read_file(path));
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  return parse_idx_labels(read_file(path));
}

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_idx_images(images);
  const auto lab = read_idx_labels(labels);
  if (img.count != lab.size()) {
    throw IdxCountMismatchError("MNIST: " + std::to_string(img.count) + " images but " +
                                std::to_string(lab.size()) + " labels");
  }
  const std::size_t d = img.rows * img.cols;
  Dataset out{Dense2(img.count, d), std::vector<int>(img.count), 10};
  auto xv = out.x.values();
  for (std::size_t k = 0; k < img.pixels.size(); ++k) xv[k] = img.pixels[k] / 255.0;
  for (std::size_t i = 0; i < lab.size(); ++i) out.labels[i] = lab[i];
  out.validate();
  return out;
}

Split load_mnist_dir(const std::filesystem::path& dir) {
  Split s;
  s.train = load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  s.test = load_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  return s;
}

Dataset add_input_noise(const Dataset& data, double epsilon, Rng& rng, NoiseReading reading) {
  if (!(epsilon >= 0.0)) throw DomainError("add_input_noise: epsilon must be non-negative");
  Dataset out = data;
  if (epsilon == 0.0) return out;
  const double sd = reading == NoiseReading::Variance ? std::sqrt(epsilon) : epsilon;
  for (double& v : out.x.values()) v += sd * rng.normal();
  return out;
}

Dataset corrupt_labels(const Dataset& data, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw DomainError("corrupt_labels: fraction outside [0, 1]");
  }
  Dataset out = data;
  const std::size_t n = data.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (count == 0 || data.classes < 2) return out;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first `count` slots are a uniform sample without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  const auto k = static_cast<std::uint64_t>(data.classes);
  for (std::size_t i = 0; i < count; ++i) {
    int& label = out.labels[idx[i]];
    label = static_cast<int>((static_cast<std::uint64_t>(label) + 1 + rng.below(k - 1)) % k);
  }
  return out;
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << data.labels[i] << '\n';
  }
}

}  // namespace lossforge
