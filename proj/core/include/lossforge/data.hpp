#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "lossforge/dense.hpp"
#include "lossforge/error.hpp"
#include "lossforge/rng.hpp"

namespace lossforge {

/// Features (N x d) with integer class labels in [0, classes).
struct Dataset {
  Dense2 x;
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return x.cols(); }

  /// Throws DomainError/ShapeError if a label is out of range or N != rows.
  void validate() const;
  Dense2 one_hot() const;
  /// ŷ = 2y - 1 in {-1, +1}.
  Dense2 sign_labels() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  /// The first min(n, size()) samples.
  Dataset head(std::size_t n) const;
};

struct Split {
  Dataset train;
  Dataset test;
};

inline constexpr std::size_t kToySplitSize = 800;

// Toy problems on [-1, 1]^2 with four classes.

/// Class of a point on the 8x8 checkerboard: cell (ix, iy) with
/// ix = min(floor((x + 1) * 4), 7), class (ix + iy) mod 4.
int checkerboard_class(double x0, double x1) noexcept;
Split gen_checkerboard(std::size_t n_per_split, Rng& rng);

inline constexpr double kSpiralNoiseSd = 0.02;

/// Noise-free point of arm `arm` at parameter t in [0, 1]: radius t,
/// angle 3πt + 2π arm / arms.
std::array<double, 2> spiral_point(std::size_t arm, std::size_t arms, double t) noexcept;
/// n_per_split must be divisible by arms (>= 2); classes are exactly balanced.
Split gen_spiral(std::size_t n_per_split, std::size_t arms, double noise_sd, Rng& rng);

/// Uniform features on [-1, 1]^d with uniformly random labels; rows are
/// redrawn until no two coincide.
Dataset gen_random_labels(std::size_t n, std::size_t d, std::size_t classes, Rng& rng);

// MNIST / IDX ingestion.

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

class IdxError : public Error {
 public:
  using Error::Error;
};
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxCountMismatchError : public IdxError {
 public:
  using IdxError::IdxError;
};

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

/// Pixels scaled by 1/255; 10 classes. Throws IdxCountMismatchError if the
/// two files disagree on the sample count.
Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Loads train-images-idx3-ubyte / train-labels-idx1-ubyte and the t10k pair
/// from `dir`.
Split load_mnist_dir(const std::filesystem::path& dir);

// Noise injectors for the robustness experiments.

/// How ε in N(0, εI) is read: per-coordinate variance ε or standard deviation ε.
enum class NoiseReading { Variance, StdDev };

Dataset add_input_noise(const Dataset& data, double epsilon, Rng& rng,
                        NoiseReading reading = NoiseReading::Variance);

/// Replaces exactly round(fraction * N) labels, chosen without replacement,
/// by a uniformly drawn different class.
Dataset corrupt_labels(const Dataset& data, double fraction, Rng& rng);

/// CSV with header x0,...,x{d-1},label.
void write_csv(const Dataset& data, std::ostream& out);

}  // namespace lossforge
