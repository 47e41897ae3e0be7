#include "lossforge/harness.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "lossforge/error.hpp"

namespace lossforge {

namespace {

constexpr std::string_view kCurveHeader = "iteration,train_loss,train_acc,test_acc";

std::string exact_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || !std::isfinite(v)) {
    throw DomainError("manifest: bad number for " + key + ": '" + text + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || text.front() == '-') {
    throw DomainError("manifest: bad integer for " + key + ": '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw DomainError("manifest: bad boolean for " + key + ": '" + text + "'");
}

void check_compatible(const Dataset& train_set, const Dataset& test_set) {
  train_set.validate();
  test_set.validate();
  if (train_set.size() == 0) throw DomainError("train: empty training set");
  if (train_set.dim() != test_set.dim() || train_set.classes != test_set.classes) {
    throw ShapeError("train: train and test sets disagree on dimension or class count");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations == 0) throw DomainError("TrainConfig: iterations must be positive");
  if (batch_size == 0) throw DomainError("TrainConfig: batch_size must be positive");
  if (eval_every == 0 || iterations % eval_every != 0) {
    throw DomainError("TrainConfig: eval_every must divide iterations");
  }
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
    throw DomainError("TrainConfig: dropout_keep outside (0, 1]");
  }
  if (hidden_layers > 0 && hidden_width == 0) {
    throw DomainError("TrainConfig: hidden_width must be positive");
  }
  if (!(adam.lr > 0.0)) throw DomainError("TrainConfig: lr must be positive");
}

TrainConfig toy_config(LossId loss, std::size_t hidden_layers) {
  TrainConfig c;
  c.loss = loss;
  c.hidden_layers = hidden_layers;
  c.hidden_width = 200;
  c.dropout_keep = 1.0;
  c.iterations = 60000;
  c.batch_size = 50;
  c.eval_every = 500;
  return c;
}

TrainConfig mnist_config(LossId loss, std::size_t hidden_layers, bool full_scale) {
  TrainConfig c;
  c.loss = loss;
  c.hidden_layers = hidden_layers;
  c.hidden_width = 512;
  c.dropout_keep = 0.5;
  c.iterations = full_scale ? 100000 : 20000;
  c.batch_size = 100;
  c.eval_every = 1000;
  return c;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set) {
  config.validate();
  check_compatible(train_set, test_set);

  Rng init_rng(derive_seed(config.seed, 1));
  Rng order_rng(derive_seed(config.seed, 2));
  Rng dropout_rng(derive_seed(config.seed, 3));

  TrainResult result;
  result.model = MlpModel::init(mlp_specs(train_set.dim(), config.hidden_layers,
                                          config.hidden_width, train_set.classes,
                                          config.dropout_keep),
                                init_rng);
  MlpModel& model = result.model;
  model.set_mode(Mode::Train);
  AdamState adam{config.adam, 0, {}, {}};

  const Dense2 targets = train_set.one_hot();
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::size_t cursor = n;
  std::vector<std::size_t> batch(config.batch_size);

  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::size_t last_good = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    for (auto& slot : batch) {
      if (cursor == n) {
        order_rng.shuffle(std::span(order));
        cursor = 0;
      }
      slot = order[cursor++];
    }
    const Dense2 xb = train_set.x.gather_rows(batch);
    const Dense2 yb = targets.gather_rows(batch);
    const auto fwd = model.forward(xb, dropout_rng);

    const auto diverge = [&](const std::string& what) {
      result.diverged = true;
      result.note = what + " at iteration " + std::to_string(it) +
                    "; last good checkpoint at iteration " + std::to_string(last_good);
    };
    if (!fwd.output.all_finite()) {
      diverge("non-finite network output");
      break;
    }
    const auto eval = evaluate(config.loss, yb, fwd.output, config.loss_options);
    if (!std::isfinite(eval.value) || !eval.grad.all_finite()) {
      diverge("non-finite loss");
      break;
    }
    const auto grads = model.backward(fwd.cache, eval.grad);
    try {
      adam_step(adam, model.parameters(), MlpModel::flatten(grads));
    } catch (const DivergenceError& e) {
      diverge(e.what());
      break;
    }
    loss_sum += eval.value;
    ++loss_count;

    if (it % config.eval_every == 0) {
      RunRecord r;
      r.iteration = it;
      r.train_loss = loss_sum / static_cast<double>(loss_count);
      r.train_acc = model.accuracy(train_set.x, train_set.labels);
      r.test_acc = test_set.size() ? model.accuracy(test_set.x, test_set.labels) : 0.0;
      result.records.push_back(r);
      loss_sum = 0.0;
      loss_count = 0;
      last_good = it;
    }
  }
  model.set_mode(Mode::Eval);
  return result;
}

SpeedMetric speed_metric(std::span<const RunRecord> records, std::size_t lo, std::size_t hi) {
  std::set<std::size_t> seen;
  SpeedMetric m;
  std::size_t count = 0;
  for (const auto& r : records) {
    if (r.iteration < lo || r.iteration > hi) continue;
    if (!seen.insert(r.iteration).second) continue;
    m.train_acc += r.train_acc;
    m.test_acc += r.test_acc;
    ++count;
  }
  if (count == 0) {
    throw DomainError("speed_metric: no checkpoint in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  m.train_acc /= static_cast<double>(count);
  m.test_acc /= static_cast<double>(count);
  return m;
}

std::vector<NoisePoint> input_noise_sweep(const MlpModel& model, const Dataset& data,
                                          std::span<const double> epsilons, std::uint64_t seed,
                                          NoiseReading reading) {
  std::vector<NoisePoint> out;
  out.reserve(epsilons.size());
  for (double eps : epsilons) {
    Rng rng(derive_seed(seed, std::bit_cast<std::uint64_t>(eps)));
    const Dataset noisy = add_input_noise(data, eps, rng, reading);
    out.push_back({eps, model.accuracy(noisy.x, noisy.labels)});
  }
  return out;
}

std::vector<LabelNoiseRun> label_noise_sweep(const TrainConfig& config, const Dataset& train_set,
                                             const Dataset& test_set,
                                             std::span<const double> fractions) {
  std::vector<LabelNoiseRun> runs;
  runs.reserve(fractions.size());
  for (double f : fractions) {
    Rng rng(derive_seed(config.seed ^ 0x6c6162656c6e6f69ULL, std::bit_cast<std::uint64_t>(f)));
    const Dataset noisy = corrupt_labels(train_set, f, rng);
    runs.push_back({f, train(config, noisy, test_set)});
  }
  return runs;
}

std::filesystem::path cell_dir(const std::filesystem::path& root, std::string_view dataset,
                               LossId loss, std::size_t depth) {
  return root / std::string(dataset) / std::string(name_of(loss)) / std::to_string(depth);
}

std::vector<GridCell> grid_run(const GridSpec& spec) {
  std::vector<GridCell> cells;
  for (const auto& ds : spec.datasets) {
    for (LossId loss : spec.losses) {
      for (std::size_t depth : spec.depths) {
        GridCell c;
        c.dataset = ds.name;
        c.loss = loss;
        c.depth = depth;
        c.curve_path = cell_dir(spec.out_root, ds.name, loss, depth) / "curve.csv";
        cells.push_back(std::move(c));
      }
    }
  }
  std::map<std::string, const NamedSplit*> by_name;
  for (const auto& ds : spec.datasets) by_name[ds.name] = &ds;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      GridCell& cell = cells[i];
      TrainConfig config = spec.base;
      config.loss = cell.loss;
      config.hidden_layers = cell.depth;
      const NamedSplit& named = *by_name.at(cell.dataset);
      Manifest manifest = manifest_of(config);
      manifest.insert(named.info.begin(), named.info.end());
      manifest["dataset"] = cell.dataset;
      try {
        const Split& data = named.data;
        const TrainResult result = train(config, data.train, data.test);
        std::ostringstream curve;
        write_curve_csv(result.records, curve);
        write_file_atomic(cell.curve_path, curve.str());
        cell.ok = !result.diverged;
        cell.diverged = result.diverged;
        cell.error = result.note;
        if (!result.records.empty()) cell.final_record = result.records.back();
        manifest["status"] = result.diverged ? "diverged" : "ok";
        if (result.diverged) manifest["note"] = result.note;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
        manifest["status"] = "error";
        manifest["note"] = e.what();
      }
      try {
        std::ostringstream text;
        write_manifest(manifest, text);
        write_file_atomic(cell.curve_path.parent_path() / "manifest.txt", text.str());
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error += std::string(cell.error.empty() ? "" : "; ") + e.what();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(spec.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return cells;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_curve_csv(std::span<const RunRecord> records, std::ostream& out) {
  out << kCurveHeader << '\n';
  for (const auto& r : records) {
    out << r.iteration << ',' << format_number(r.train_loss) << ',' << format_number(r.train_acc)
        << ',' << format_number(r.test_acc) << '\n';
  }
}

std::vector<RunRecord> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("curve csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCurveHeader) throw DomainError("curve csv: unexpected header '" + line + "'");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RunRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream row(line);
    if (!(row >> r.iteration >> c1 >> r.train_loss >> c2 >> r.train_acc >> c3 >> r.test_acc) ||
        c1 != ',' || c2 != ',' || c3 != ',') {
      throw DomainError("curve csv: malformed row '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

void write_input_noise_csv(std::span<const NoisePoint> points, std::ostream& out) {
  out << "epsilon,accuracy\n";
  for (const auto& p : points) out << format_number(p.epsilon) << ',' << format_number(p.accuracy) << '\n';
}

void write_label_noise_csv(std::span<const LabelNoiseRun> runs, std::ostream& out) {
  out << "fraction,iteration,test_acc\n";
  for (const auto& run : runs) {
    for (const auto& r : run.result.records) {
      out << format_number(run.fraction) << ',' << r.iteration << ',' << format_number(r.test_acc)
          << '\n';
    }
  }
}

Manifest manifest_of(const TrainConfig& c) {
  Manifest m;
  m["loss"] = std::string(name_of(c.loss));
  m["squash"] = c.loss_options.squash ? std::string(name_of(*c.loss_options.squash)) : "default";
  m["hinge_margin"] = exact_number(c.loss_options.hinge_margin);
  m["literal_log2_sign"] = c.loss_options.literal_log2_sign ? "true" : "false";
  m["hidden_layers"] = std::to_string(c.hidden_layers);
  m["hidden_width"] = std::to_string(c.hidden_width);
  m["dropout_keep"] = exact_number(c.dropout_keep);
  m["lr"] = exact_number(c.adam.lr);
  m["beta1"] = exact_number(c.adam.beta1);
  m["beta2"] = exact_number(c.adam.beta2);
  m["eps"] = exact_number(c.adam.eps);
  m["iterations"] = std::to_string(c.iterations);
  m["batch_size"] = std::to_string(c.batch_size);
  m["seed"] = std::to_string(c.seed);
  m["eval_every"] = std::to_string(c.eval_every);
  return m;
}

void write_manifest(const Manifest& manifest, std::ostream& out) {
  for (const auto& [key, value] : manifest) out << key << '=' << value << '\n';
}

Manifest read_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw DomainError("manifest: line " + std::to_string(lineno) + " is not key=value");
    }
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

TrainConfig apply_manifest(TrainConfig c, const Manifest& m) {
  for (const auto& [key, value] : m) {
    if (key == "loss") {
      const auto id = parse_loss(value);
      if (!id) throw DomainError("manifest: unknown loss '" + value + "'");
      c.loss = *id;
    } else if (key == "squash") {
      if (value == "default") {
        c.loss_options.squash.reset();
      } else {
        const auto s = parse_squash(value);
        if (!s) throw DomainError("manifest: unknown squash '" + value + "'");
        c.loss_options.squash = *s;
      }
    } else if (key == "hinge_margin") {
      c.loss_options.hinge_margin = parse_double(key, value);
    } else if (key == "literal_log2_sign") {
      c.loss_options.literal_log2_sign = parse_bool(key, value);
    } else if (key == "hidden_layers") {
      c.hidden_layers = parse_unsigned(key, value);
    } else if (key == "hidden_width") {
      c.hidden_width = parse_unsigned(key, value);
    } else if (key == "dropout_keep") {
      c.dropout_keep = parse_double(key, value);
    } else if (key == "lr") {
      c.adam.lr = parse_double(key, value);
    } else if (key == "beta1") {
      c.adam.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      c.adam.beta2 = parse_double(key, value);
    } else if (key == "eps") {
      c.adam.eps = parse_double(key, value);
    } else if (key == "iterations") {
      c.iterations = parse_unsigned(key, value);
    } else if (key == "batch_size") {
      c.batch_size = parse_unsigned(key, value);
    } else if (key == "seed") {
      c.seed = parse_unsigned(key, value);
    } else if (key == "eval_every") {
      c.eval_every = parse_unsigned(key, value);
    }
  }
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    out.close();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lossforge
