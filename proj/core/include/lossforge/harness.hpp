#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lossforge/data.hpp"
#include "lossforge/losses.hpp"
#include "lossforge/nn.hpp"
#include "lossforge/optim.hpp"

namespace lossforge {

struct TrainConfig {
  LossId loss = LossId::Log;
  LossOptions loss_options;
  std::size_t hidden_layers = 0;
  std::size_t hidden_width = 200;
  double dropout_keep = 1.0;
  AdamConfig adam;
  std::size_t iterations = 60000;
  std::size_t batch_size = 50;
  std::uint64_t seed = 1;
  std::size_t eval_every = 500;

  /// DomainError unless iterations > 0, batch_size > 0 and eval_every divides iterations.
  void validate() const;
};

/// Protocol presets. Toy problems: batch 50, 60k iterations, checkpoints every
/// 500. MNIST: batch 100, 512-unit layers with 50% dropout, checkpoints every
/// 1000; 100k iterations at full scale, 20k at desk scale.
TrainConfig toy_config(LossId loss, std::size_t hidden_layers);
TrainConfig mnist_config(LossId loss, std::size_t hidden_layers, bool full_scale);
inline constexpr std::size_t kMnistDeskTrainSize = 10000;

struct RunRecord {
  std::size_t iteration = 0;
  /// Mean minibatch loss since the previous checkpoint.
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;

  bool operator==(const RunRecord&) const = default;
};

struct TrainResult {
  std::vector<RunRecord> records;
  MlpModel model;
  bool diverged = false;
  /// Set when diverged: where it happened and the last good checkpoint.
  std::string note;
};

/// Adam on shuffled-epoch minibatches (reshuffled every pass). A non-finite
/// loss or gradient stops training and sets `diverged`; the records up to the
/// last good checkpoint are kept. The returned model is in eval mode.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set);

struct SpeedMetric {
  double train_acc = 0.0;
  double test_acc = 0.0;
};

/// Expected accuracy when the evaluation iteration is drawn uniformly from
/// the checkpoints in [lo, hi]. Repeated iterations count once. DomainError
/// if no checkpoint falls in the window.
SpeedMetric speed_metric(std::span<const RunRecord> records, std::size_t lo = 10000,
                         std::size_t hi = 100000);

struct NoisePoint {
  double epsilon = 0.0;
  double accuracy = 0.0;
};

/// Accuracy of `model` on add_input_noise(data, ε) for each ε. The noise for a
/// given ε depends only on (seed, ε).
std::vector<NoisePoint> input_noise_sweep(const MlpModel& model, const Dataset& data,
                                          std::span<const double> epsilons, std::uint64_t seed,
                                          NoiseReading reading = NoiseReading::Variance);

struct LabelNoiseRun {
  double fraction = 0.0;
  TrainResult result;
};

/// Retrains from scratch on corrupt_labels(train, f) for each fraction f. The
/// training seed is config.seed for every fraction; the corruption draw uses a
/// stream derived from (seed, f), so f = 0 reproduces train() exactly.
std::vector<LabelNoiseRun> label_noise_sweep(const TrainConfig& config, const Dataset& train_set,
                                             const Dataset& test_set,
                                             std::span<const double> fractions);

// Grid runner.

using Manifest = std::map<std::string, std::string>;

struct NamedSplit {
  std::string name;
  Split data;
  /// Extra manifest entries describing where the data came from.
  Manifest info;
};

struct GridSpec {
  std::vector<LossId> losses;
  std::vector<std::size_t> depths;
  TrainConfig base;
  std::vector<NamedSplit> datasets;
  std::filesystem::path out_root = "results";
  std::size_t jobs = 1;
};

struct GridCell {
  std::string dataset;
  LossId loss = LossId::Log;
  std::size_t depth = 0;
  bool ok = false;
  bool diverged = false;
  std::string error;
  std::optional<RunRecord> final_record;
  std::filesystem::path curve_path;
};

/// Runs one independent train() per (dataset, loss, depth) cell on up to
/// `jobs` worker threads. Writes <out_root>/<dataset>/<loss>/<depth>/curve.csv
/// and manifest.txt. A failing cell is recorded and does not stop the grid.
std::vector<GridCell> grid_run(const GridSpec& spec);

std::filesystem::path cell_dir(const std::filesystem::path& root, std::string_view dataset,
                               LossId loss, std::size_t depth);

// Persistence. Numbers are written with %.10g so identical runs give identical bytes.

void write_curve_csv(std::span<const RunRecord> records, std::ostream& out);
std::vector<RunRecord> read_curve_csv(std::istream& in);
void write_input_noise_csv(std::span<const NoisePoint> points, std::ostream& out);
void write_label_noise_csv(std::span<const LabelNoiseRun> runs, std::ostream& out);

Manifest manifest_of(const TrainConfig& config);
void write_manifest(const Manifest& manifest, std::ostream& out);
/// key=value lines; blank lines and lines starting with '#' are ignored.
Manifest read_manifest(std::istream& in);
/// Applies the TrainConfig keys present in `manifest`; unknown keys are
/// ignored, malformed values raise DomainError.
TrainConfig apply_manifest(TrainConfig config, const Manifest& manifest);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string format_number(double v);

}  // namespace lossforge
