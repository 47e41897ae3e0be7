#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lossforge/data.hpp"
#include "lossforge/harness.hpp"
#include "lossforge/losses.hpp"
#include "lossforge/nn.hpp"
#include "lossforge/plot.hpp"
#include "lossforge/verification.hpp"

namespace lossforge::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path results_root() {
  if (const char* env = std::getenv("LOSSFORGE_RESULTS_DIR"); env && *env) return env;
  return "results";
}

std::string default_mnist_dir() {
  if (const char* env = std::getenv("LOSSFORGE_MNIST_DIR"); env && *env) return env;
  return "data/mnist-10k";
}

LossId require_loss(const std::string& name) {
  const auto id = parse_loss(name);
  if (!id) throw UsageError("unknown loss '" + name + "'; expected one of: " + loss_names());
  return *id;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_commas(text)) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (*end != '\0') throw UsageError(std::string(what) + ": bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

std::vector<LossId> parse_losses(const std::string& text) {
  if (text == "all") {
    std::vector<LossId> all;
    for (const auto& s : all_losses()) all.push_back(s.id);
    return all;
  }
  std::vector<LossId> out;
  for (const auto& item : split_commas(text)) out.push_back(require_loss(item));
  if (out.empty()) throw UsageError("--losses: empty list");
  return out;
}

// Flags shared by every subcommand that trains a model.
struct TrainFlags {
  std::string dataset = "checkerboard";
  std::string mnist_dir = default_mnist_dir();
  bool full = false;
  std::uint64_t data_seed = 7;
  std::string loss = "log";
  std::size_t hidden_layers = 0;
  std::size_t width = 0;
  double keep = 1.0;
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t iterations = 0;
  std::size_t batch = 0;
  std::size_t eval_every = 0;
  std::uint64_t seed = 1;
  std::string squash;
  double hinge_margin = 0.5;
  bool literal_log2 = false;
  std::string config_path;
};

void add_data_flags(CLI::App& sub, TrainFlags& f) {
  sub.add_option("--dataset", f.dataset, "checkerboard | spiral | random | mnist")
      ->check(CLI::IsMember({"checkerboard", "spiral", "random", "mnist"}))
      ->capture_default_str();
  sub.add_option("--mnist-dir", f.mnist_dir,
                 "Directory holding the four MNIST IDX files (env LOSSFORGE_MNIST_DIR)");
  sub.add_flag("--full", f.full,
               "MNIST at full scale: whole training set and 100k iterations instead of a "
               "10k-sample subset and 20k iterations");
  sub.add_option("--data-seed", f.data_seed, "Seed for toy dataset generation")
      ->capture_default_str();
}

void add_train_flags(CLI::App& sub, TrainFlags& f, bool single_loss) {
  add_data_flags(sub, f);
  if (single_loss) {
    sub.add_option("--loss", f.loss, "Loss id (" + loss_names() + ")")->capture_default_str();
    sub.add_option("--hidden-layers", f.hidden_layers, "Number of hidden ReLU layers (0-5)")
        ->capture_default_str();
  }
  sub.add_option("--width", f.width, "Hidden layer width [preset: 200 toy, 512 mnist]");
  sub.add_option("--keep", f.keep, "Dropout keep probability [preset: 1 toy, 0.5 mnist]")
      ->check(CLI::Range(0.0, 1.0));
  sub.add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  sub.add_option("--beta1", f.beta1, "Adam beta1")->capture_default_str();
  sub.add_option("--beta2", f.beta2, "Adam beta2")->capture_default_str();
  sub.add_option("--adam-eps", f.adam_eps, "Adam epsilon")->capture_default_str();
  sub.add_option("--iterations", f.iterations,
                 "Training iterations [preset: 60000 toy, 20000 mnist, 100000 mnist --full]");
  sub.add_option("--batch", f.batch, "Minibatch size [preset: 50 toy, 100 mnist]");
  sub.add_option("--eval-every", f.eval_every,
                 "Checkpoint cadence in iterations [preset: 500 toy, 1000 mnist]");
  sub.add_option("--seed", f.seed, "Training seed (init, batch order, dropout)")
      ->capture_default_str();
  sub.add_option("--squash", f.squash, "Probability transform for probability losses")
      ->check(CLI::IsMember({"softmax", "sigmoid"}));
  sub.add_option("--hinge-margin", f.hinge_margin, "Margin of the hinge family")
      ->capture_default_str();
  sub.add_flag("--literal-log2", f.literal_log2,
               "Squared log loss with a leading minus sign (maximised at the correct class)");
  sub.add_option("--config", f.config_path,
                 "Manifest file (key=value) applied before command-line flags");
}

bool given(const CLI::App& sub, const char* flag) {
  const auto* opt = sub.get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

TrainConfig resolve_config(const CLI::App& sub, const TrainFlags& f,
                           std::optional<LossId> loss_override = std::nullopt,
                           std::optional<std::size_t> depth_override = std::nullopt) {
  TrainConfig c = f.dataset == "mnist" ? mnist_config(LossId::Log, 0, f.full)
                                       : toy_config(LossId::Log, 0);
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw UsageError("cannot read config file " + f.config_path);
    c = apply_manifest(c, read_manifest(in));
  }
  if (given(sub, "--loss")) c.loss = require_loss(f.loss);
  if (given(sub, "--hidden-layers")) c.hidden_layers = f.hidden_layers;
  if (given(sub, "--width")) c.hidden_width = f.width;
  if (given(sub, "--keep")) c.dropout_keep = f.keep;
  if (given(sub, "--lr")) c.adam.lr = f.lr;
  if (given(sub, "--beta1")) c.adam.beta1 = f.beta1;
  if (given(sub, "--beta2")) c.adam.beta2 = f.beta2;
  if (given(sub, "--adam-eps")) c.adam.eps = f.adam_eps;
  if (given(sub, "--iterations")) c.iterations = f.iterations;
  if (given(sub, "--batch")) c.batch_size = f.batch;
  if (given(sub, "--eval-every")) c.eval_every = f.eval_every;
  if (given(sub, "--seed")) c.seed = f.seed;
  if (given(sub, "--squash")) c.loss_options.squash = parse_squash(f.squash);
  if (given(sub, "--hinge-margin")) c.loss_options.hinge_margin = f.hinge_margin;
  if (f.literal_log2) c.loss_options.literal_log2_sign = true;
  if (loss_override) c.loss = *loss_override;
  if (depth_override) c.hidden_layers = *depth_override;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return c;
}

Split load_split(const TrainFlags& f) {
  if (f.dataset == "mnist") {
    Split s = load_mnist_dir(f.mnist_dir);
    if (!f.full) s.train = s.train.head(kMnistDeskTrainSize);
    return s;
  }
  Rng rng(f.data_seed);
  if (f.dataset == "spiral") return gen_spiral(kToySplitSize, 4, kSpiralNoiseSd, rng);
  if (f.dataset == "random") {
    Split s;
    s.train = gen_random_labels(kToySplitSize, 2, 4, rng);
    s.test = gen_random_labels(kToySplitSize, 2, 4, rng);
    return s;
  }
  return gen_checkerboard(kToySplitSize, rng);
}

Manifest run_manifest(const TrainConfig& config, const TrainFlags& f, const Split& data) {
  Manifest m = manifest_of(config);
  m["dataset"] = f.dataset;
  if (f.dataset == "mnist") {
    m["mnist_dir"] = f.mnist_dir;
    m["full"] = f.full ? "true" : "false";
  } else {
    m["data_seed"] = std::to_string(f.data_seed);
  }
  m["train_size"] = std::to_string(data.train.size());
  m["test_size"] = std::to_string(data.test.size());
  return m;
}

fs::path manifest_path_for(const fs::path& result) {
  return result.parent_path() / (result.stem().string() + ".manifest.txt");
}

void write_result(const fs::path& path, const std::string& body, const Manifest& manifest) {
  write_file_atomic(path, body);
  std::ostringstream text;
  write_manifest(manifest, text);
  write_file_atomic(manifest_path_for(path), text.str());
}

void print_record(std::ostream& out, const RunRecord& r) {
  out << "iteration=" << r.iteration << " train_loss=" << format_number(r.train_loss)
      << " train_acc=" << format_number(r.train_acc) << " test_acc=" << format_number(r.test_acc)
      << '\n';
}

// ---- gradcheck ----

struct GradcheckFlags {
  std::string loss = "all";
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  std::string squash;
  double hinge_margin = 0.5;
  double tolerance = 1e-5;
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  std::vector<LossId> losses = parse_losses(f.loss);
  GradCheckOptions options;
  options.trials = f.trials;
  options.seed = f.seed;
  options.tolerance = f.tolerance;
  options.loss_options.hinge_margin = f.hinge_margin;
  if (!f.squash.empty()) options.loss_options.squash = parse_squash(f.squash);
  bool ok = true;
  for (LossId id : losses) {
    const auto r = check_loss_gradient(id, options);
    ok = ok && r.passed;
    char line[160];
    std::snprintf(line, sizeof line, "%s %-10s max_rel_err=%.3e points=%zu\n",
                  r.passed ? "PASS" : "FAIL", std::string(name_of(id)).c_str(), r.max_rel_error,
                  r.points);
    out << line;
    if (id == LossId::Log && options.loss_options.squash.value_or(Squash::Softmax) == Squash::Softmax) {
      const double gap = log_closed_form_gap(f.trials, f.seed);
      const bool closed_ok = gap < f.tolerance;
      ok = ok && closed_ok;
      std::snprintf(line, sizeof line, "     log closed form p - y: max_abs_gap=%.3e %s\n", gap,
                    closed_ok ? "(agrees)" : "(DISAGREES)");
      out << line;
    }
  }
  return ok ? kExitOk : kExitCheckFailed;
}

// ---- verify-theory ----

struct TheoryFlags {
  std::uint64_t seed = 1;
  std::size_t batch = 32;
  std::size_t trials = 1000;
  double perturb = 0.0;
};

int cmd_verify_theory(const TheoryFlags& f, std::ostream& out) {
  TheoryOptions options;
  options.seed = f.seed;
  options.batch = f.batch;
  options.trials = f.trials;
  options.perturb = f.perturb;
  const auto r = verify_theory(options);
  char line[200];
  std::snprintf(line, sizeof line,
                "%s expectation identity: L1 residual=%.3e L2 residual=%.3e (tolerance %.0e)\n",
                r.expectation_passed() ? "PASS" : "FAIL", r.expectation_l1, r.expectation_l2,
                kExpectationTolerance);
  out << line;
  std::snprintf(line, sizeof line,
                "%s Cauchy-Schwarz = log loss + half Renyi quadratic entropy: residual=%.3e "
                "(tolerance %.0e)\n",
                r.cs_passed() ? "PASS" : "FAIL", r.cs_decomposition, kCsTolerance);
  out << line;
  out << (r.probes_passed() ? "PASS" : "FAIL")
      << " sigmoid expectation loss gradient, positive label:\n";
  for (const auto& p : r.probes) {
    std::snprintf(line, sizeof line, "       o=%+6.1f  dL/do=%+.17g\n", p.output, p.gradient);
    out << line;
  }
  return r.passed() ? kExitOk : kExitCheckFailed;
}

// ---- train / grid / noise ----

struct OutputFlags {
  std::string out;
  std::string save_model;
  std::string model;
  std::string epsilons = "0,0.01,0.02,0.05,0.1,0.2,0.5,1,2,5,10";
  std::string noise_reading = "variance";
  std::uint64_t noise_seed = 11;
  std::string fractions = "0,0.2,0.4,0.5,0.6,0.8";
  std::string losses = "all";
  std::string depths = "0,1,2,3,4,5";
  std::size_t jobs = 1;
};

fs::path default_result(const TrainFlags& f, const TrainConfig& c, const char* file) {
  return cell_dir(results_root(), f.dataset, c.loss, c.hidden_layers) / file;
}

int cmd_train(const CLI::App& sub, const TrainFlags& f, const OutputFlags& o, std::ostream& out,
              std::ostream& err) {
  const TrainConfig config = resolve_config(sub, f);
  const Split data = load_split(f);
  const TrainResult result = train(config, data.train, data.test);
  const fs::path path = o.out.empty() ? default_result(f, config, "curve.csv") : fs::path(o.out);
  std::ostringstream body;
  write_curve_csv(result.records, body);
  Manifest manifest = run_manifest(config, f, data);
  manifest["status"] = result.diverged ? "diverged" : "ok";
  if (result.diverged) manifest["note"] = result.note;
  write_result(path, body.str(), manifest);
  if (!o.save_model.empty()) result.model.save(fs::path(o.save_model));
  out << "wrote " << path.string() << '\n';
  if (!result.records.empty()) {
    out << "final ";
    print_record(out, result.records.back());
  }
  if (result.diverged) {
    err << "DIVERGED: " << result.note << '\n';
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_grid(const CLI::App& sub, const TrainFlags& f, const OutputFlags& o, std::ostream& out) {
  GridSpec spec;
  spec.losses = parse_losses(o.losses);
  for (double d : parse_doubles(o.depths, "--depths")) {
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
      throw UsageError("--depths: expected non-negative integers");
    }
    spec.depths.push_back(static_cast<std::size_t>(d));
  }
  spec.base = resolve_config(sub, f);
  Split data = load_split(f);
  Manifest info = run_manifest(spec.base, f, data);
  for (const auto& key : {"loss", "hidden_layers"}) info.erase(key);
  spec.datasets.push_back({f.dataset, std::move(data), std::move(info)});
  spec.out_root = o.out.empty() ? results_root() : fs::path(o.out);
  spec.jobs = o.jobs;
  const auto cells = grid_run(spec);
  bool ok = true;
  for (const auto& c : cells) {
    ok = ok && c.ok;
    out << (c.ok ? "ok   " : (c.diverged ? "DIV  " : "FAIL ")) << c.dataset << '/'
        << name_of(c.loss) << '/' << c.depth;
    if (c.final_record) {
      out << " train_acc=" << format_number(c.final_record->train_acc)
          << " test_acc=" << format_number(c.final_record->test_acc);
    }
    if (!c.error.empty()) out << " (" << c.error << ')';
    out << '\n';
  }
  return ok ? kExitOk : kExitCheckFailed;
}

NoiseReading parse_reading(const std::string& s) {
  return s == "sd" ? NoiseReading::StdDev : NoiseReading::Variance;
}

int cmd_noise_input(const CLI::App& sub, const TrainFlags& f, const OutputFlags& o,
                    std::ostream& out) {
  const auto epsilons = parse_doubles(o.epsilons, "--epsilons");
  for (double e : epsilons) {
    if (e < 0) throw UsageError("--epsilons: values must be non-negative");
  }
  const TrainConfig config = resolve_config(sub, f);
  const Split data = load_split(f);
  MlpModel model;
  if (!o.model.empty()) {
    model = MlpModel::load(fs::path(o.model));
  } else {
    model = train(config, data.train, data.test).model;
  }
  const auto points =
      input_noise_sweep(model, data.train, epsilons, o.noise_seed, parse_reading(o.noise_reading));
  const fs::path path =
      o.out.empty() ? default_result(f, config, "noise_input.csv") : fs::path(o.out);
  std::ostringstream body;
  write_input_noise_csv(points, body);
  Manifest manifest = run_manifest(config, f, data);
  manifest["noise_interpretation"] = o.noise_reading;
  manifest["noise_seed"] = std::to_string(o.noise_seed);
  if (!o.model.empty()) manifest["model"] = o.model;
  write_result(path, body.str(), manifest);
  out << "wrote " << path.string() << '\n';
  for (const auto& p : points) {
    out << "epsilon=" << format_number(p.epsilon) << " accuracy=" << format_number(p.accuracy)
        << '\n';
  }
  return kExitOk;
}

int cmd_noise_label(const CLI::App& sub, const TrainFlags& f, const OutputFlags& o,
                    std::ostream& out) {
  const auto fractions = parse_doubles(o.fractions, "--fractions");
  for (double v : fractions) {
    if (v < 0 || v > 1) throw UsageError("--fractions: values must lie in [0, 1]");
  }
  const TrainConfig config = resolve_config(sub, f);
  const Split data = load_split(f);
  const auto runs = label_noise_sweep(config, data.train, data.test, fractions);
  const fs::path path =
      o.out.empty() ? default_result(f, config, "noise_label.csv") : fs::path(o.out);
  std::ostringstream body;
  write_label_noise_csv(runs, body);
  write_result(path, body.str(), run_manifest(config, f, data));
  out << "wrote " << path.string() << '\n';
  bool ok = true;
  for (const auto& run : runs) {
    out << "fraction=" << format_number(run.fraction);
    if (!run.result.records.empty()) {
      out << " final_test_acc=" << format_number(run.result.records.back().test_acc);
    }
    if (run.result.diverged) {
      ok = false;
      out << " DIVERGED (" << run.result.note << ')';
    }
    out << '\n';
  }
  return ok ? kExitOk : kExitCheckFailed;
}

// ---- plot ----

struct PlotFlags {
  std::vector<std::string> inputs;
  std::string output;
  std::string metric = "test_acc";
  std::string title;
  std::string labels;
};

enum class Schema { Curve, InputNoise, LabelNoise };

std::string default_label(const fs::path& file) {
  const fs::path depth_dir = file.parent_path();
  const fs::path loss_dir = depth_dir.parent_path();
  if (const auto id = parse_loss(loss_dir.filename().string())) {
    return std::string(spec_of(*id).symbol);
  }
  return file.stem().string();
}

std::vector<std::vector<std::string>> read_rows(const fs::path& file, std::string& header) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read " + file.string());
  if (!std::getline(in, header) || header.empty()) throw UsageError(file.string() + ": empty CSV");
  if (header.back() == '\r') header.pop_back();
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw UsageError(file.string() + ": CSV has no data rows");
  return rows;
}

double cell_value(const std::vector<std::string>& row, std::size_t col, const fs::path& file) {
  if (col >= row.size()) throw UsageError(file.string() + ": short row");
  char* end = nullptr;
  const double v = std::strtod(row[col].c_str(), &end);
  if (*end != '\0' || row[col].empty()) throw UsageError(file.string() + ": bad number '" + row[col] + "'");
  return v;
}

int cmd_plot(const PlotFlags& f, std::ostream& out) {
  if (f.inputs.empty()) throw UsageError("plot: no input files");
  const std::vector<std::string> custom = split_commas(f.labels);
  if (!custom.empty() && custom.size() != f.inputs.size()) {
    throw UsageError("--labels: expected one label per input");
  }
  static const std::map<std::string, Schema> kSchemas{
      {"iteration,train_loss,train_acc,test_acc", Schema::Curve},
      {"epsilon,accuracy", Schema::InputNoise},
      {"fraction,iteration,test_acc", Schema::LabelNoise}};
  std::optional<Schema> schema;
  std::vector<Series> series;
  for (std::size_t i = 0; i < f.inputs.size(); ++i) {
    const fs::path file = f.inputs[i];
    std::string header;
    const auto rows = read_rows(file, header);
    const auto it = kSchemas.find(header);
    if (it == kSchemas.end()) throw UsageError(file.string() + ": unknown CSV schema '" + header + "'");
    if (schema && *schema != it->second) {
      throw UsageError(file.string() + ": schema mismatch with earlier inputs");
    }
    schema = it->second;
    const std::string label = custom.empty() ? default_label(file) : custom[i];
    if (*schema == Schema::Curve) {
      static const std::map<std::string, std::size_t> kColumns{
          {"train_loss", 1}, {"train_acc", 2}, {"test_acc", 3}};
      const std::size_t col = kColumns.at(f.metric);
      Series s{label, {}, {}};
      for (const auto& row : rows) {
        s.x.push_back(cell_value(row, 0, file));
        s.y.push_back(cell_value(row, col, file));
      }
      series.push_back(std::move(s));
    } else if (*schema == Schema::InputNoise) {
      Series s{label, {}, {}};
      for (const auto& row : rows) {
        s.x.push_back(cell_value(row, 0, file));
        s.y.push_back(cell_value(row, 1, file));
      }
      series.push_back(std::move(s));
    } else {
      std::map<double, Series> by_fraction;
      std::vector<double> order;
      for (const auto& row : rows) {
        const double fr = cell_value(row, 0, file);
        auto [pos, inserted] = by_fraction.try_emplace(fr);
        if (inserted) {
          pos->second.label = label + " f=" + format_number(fr);
          order.push_back(fr);
        }
        pos->second.x.push_back(cell_value(row, 1, file));
        pos->second.y.push_back(cell_value(row, 2, file));
      }
      for (double fr : order) series.push_back(std::move(by_fraction[fr]));
    }
  }
  PlotOptions options;
  options.title = f.title;
  switch (*schema) {
    case Schema::Curve:
      options.x_label = "iteration";
      options.y_label = f.metric;
      break;
    case Schema::InputNoise:
      options.x_label = "epsilon";
      options.y_label = "accuracy";
      break;
    case Schema::LabelNoise:
      options.x_label = "iteration";
      options.y_label = "test_acc";
      break;
  }
  write_file_atomic(f.output, render_svg(series, options));
  out << "wrote " << f.output << " (" << series.size() << " series)\n";
  return kExitOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classification loss laboratory: gradient checks, identity checks, training "
               "grids and noise-robustness sweeps",
               "lossforge"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(34);

  GradcheckFlags grad_flags;
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic loss gradients vs central differences");
  gradcheck->add_option("--loss", grad_flags.loss, "Loss id or 'all'")->capture_default_str();
  gradcheck->add_option("--trials", grad_flags.trials, "Random points per loss")->capture_default_str();
  gradcheck->add_option("--seed", grad_flags.seed, "Sampling seed")->capture_default_str();
  gradcheck->add_option("--squash", grad_flags.squash, "Override sigma: softmax | sigmoid")
      ->check(CLI::IsMember({"softmax", "sigmoid"}));
  gradcheck->add_option("--hinge-margin", grad_flags.hinge_margin, "Margin of the hinge family")
      ->capture_default_str();
  gradcheck->add_option("--tolerance", grad_flags.tolerance, "Maximum relative error")
      ->capture_default_str();

  TheoryFlags theory_flags;
  auto* theory = app.add_subcommand(
      "verify-theory", "Check the expectation-loss and Cauchy-Schwarz identities and the "
                       "vanishing sigmoid expectation-loss gradient");
  theory->add_option("--seed", theory_flags.seed, "Sampling seed")->capture_default_str();
  theory->add_option("--batch", theory_flags.batch, "Samples per random batch")->capture_default_str();
  theory->add_option("--trials", theory_flags.trials, "Random batches")->capture_default_str();
  theory->add_option("--perturb", theory_flags.perturb,
                     "Negative control: perturb p on the right-hand sides (checks must fail)")
      ->capture_default_str();

  TrainFlags train_flags;
  OutputFlags train_out;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write its learning curve");
  add_train_flags(*train_cmd, train_flags, true);
  train_cmd->add_option("--out", train_out.out,
                        "Curve CSV path [default: <results>/<dataset>/<loss>/<depth>/curve.csv]");
  train_cmd->add_option("--save-model", train_out.save_model, "Write the trained model checkpoint");

  TrainFlags grid_flags;
  OutputFlags grid_out;
  auto* grid = app.add_subcommand("grid", "Train every (loss, depth) cell and write result files");
  add_train_flags(*grid, grid_flags, false);
  grid->add_option("--losses", grid_out.losses, "Comma separated loss ids or 'all'")
      ->capture_default_str();
  grid->add_option("--depths", grid_out.depths, "Comma separated hidden layer counts")
      ->capture_default_str();
  grid->add_option("--out", grid_out.out, "Results root [default: $LOSSFORGE_RESULTS_DIR or results]");
  grid->add_option("--jobs", grid_out.jobs, "Worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);

  TrainFlags ni_flags;
  OutputFlags ni_out;
  auto* noise_input = app.add_subcommand(
      "noise-input", "Accuracy of a trained model on Gaussian-perturbed training inputs");
  add_train_flags(*noise_input, ni_flags, true);
  noise_input->add_option("--model", ni_out.model, "Evaluate this checkpoint instead of training");
  noise_input->add_option("--epsilons", ni_out.epsilons, "Comma separated noise levels")
      ->capture_default_str();
  noise_input->add_option("--noise-interpretation", ni_out.noise_reading,
                          "Read epsilon as per-coordinate variance or standard deviation")
      ->check(CLI::IsMember({"variance", "sd"}))
      ->capture_default_str();
  noise_input->add_option("--noise-seed", ni_out.noise_seed, "Seed for the noise draws")
      ->capture_default_str();
  noise_input->add_option("--out", ni_out.out, "Output CSV (epsilon,accuracy)");

  TrainFlags nl_flags;
  OutputFlags nl_out;
  auto* noise_label = app.add_subcommand(
      "noise-label", "Retrain with a fraction of training labels corrupted, per fraction");
  add_train_flags(*noise_label, nl_flags, true);
  noise_label->add_option("--fractions", nl_out.fractions, "Comma separated corruption fractions")
      ->capture_default_str();
  noise_label->add_option("--out", nl_out.out, "Output CSV (fraction,iteration,test_acc)");

  PlotFlags plot_flags;
  auto* plot = app.add_subcommand("plot", "Render result CSVs as a static SVG line chart");
  plot->add_option("--input", plot_flags.inputs, "Result CSV files (curve or noise schemas)")
      ->required()
      ->expected(1, -1);
  plot->add_option("--output", plot_flags.output, "SVG path")->required();
  plot->add_option("--metric", plot_flags.metric, "Curve column to plot")
      ->check(CLI::IsMember({"train_loss", "train_acc", "test_acc"}))
      ->capture_default_str();
  plot->add_option("--title", plot_flags.title, "Chart title");
  plot->add_option("--labels", plot_flags.labels, "Comma separated legend labels, one per input");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    for (auto* sub : app.get_subcommands()) err << sub->help();
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(grad_flags, out);
    if (*theory) return cmd_verify_theory(theory_flags, out);
    if (*train_cmd) return cmd_train(*train_cmd, train_flags, train_out, out, err);
    if (*grid) return cmd_grid(*grid, grid_flags, grid_out, out);
    if (*noise_input) return cmd_noise_input(*noise_input, ni_flags, ni_out, out);
    if (*noise_label) return cmd_noise_label(*noise_label, nl_flags, nl_out, out);
    if (*plot) return cmd_plot(plot_flags, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace lossforge::cli
