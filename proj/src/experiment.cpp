// SPDX-License-Identifier: Apache-2.0
#include "adl/experiment.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "adl/error.hpp"
#include "adl/oracle.hpp"
#include "adl/staleness.hpp"

namespace adl {
namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model.layers",        "model.loss",         "model.init_seed",
      "partition.K",         "partition.strategy", "partition.boundaries",
      "data.dataset",        "data.n",             "data.dim",
      "data.out_dim",        "data.noise_std",     "data.seed",
      "data.sampler_seed",   "train.M",            "train.batch_size",
      "train.updates",       "train.momentum",     "train.weight_decay",
      "lr.schedule",         "lr.gamma",           "lr.base",
      "lr.milestones",       "lr.factor",          "lr.warmup_epochs",
      "lr.c",                "lr.epsilon",         "lr.A",
      "lr.L",                "lr.gap",             "run.mode",
      "run.out_path",        "run.trace_level",    "run.theory_preset",
      "run.queue_timeout_ms"};
  return keys;
}

class Keys {
 public:
  explicit Keys(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  std::string required(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end() || it->second.empty()) {
      fail(ErrorKind::Config, "missing required key '" + key + "'");
    }
    return it->second;
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return to_real(key, kv_.at(key));
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    return to_integer(key, kv_.at(key));
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    const std::int64_t v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < 0) fail(ErrorKind::Config, key + " must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  static double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      fail(ErrorKind::Config, key + ": '" + v + "' is not a number");
    }
    return out;
  }

  static std::int64_t to_integer(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      fail(ErrorKind::Config, key + ": '" + v + "' is not an integer");
    }
    return out;
  }

 private:
  std::map<std::string, std::string> kv_;
};

std::size_t positive(const Keys& keys, const std::string& key,
                     std::int64_t fallback) {
  const std::int64_t v = keys.integer(key, fallback);
  if (v < 1) fail(ErrorKind::Config, key + " must be >= 1");
  return static_cast<std::size_t>(v);
}

Partition make_partition(const Keys& keys, const std::vector<LayerSpec>& layers) {
  const std::int64_t K = keys.integer("partition.K", -1);
  if (K < 0 && !keys.has("partition.boundaries")) {
    fail(ErrorKind::Config, "missing required key 'partition.K'");
  }
  if (keys.has("partition.boundaries")) {
    std::vector<std::size_t> b;
    for (const std::string& f : split(keys.required("partition.boundaries"), ',')) {
      const std::int64_t v = Keys::to_integer("partition.boundaries", f);
      if (v < 1) fail(ErrorKind::Config, "partition boundaries must be >= 1");
      b.push_back(static_cast<std::size_t>(v));
    }
    Partition p(std::move(b));
    if (K >= 0 && static_cast<std::int64_t>(p.modules()) != K) {
      fail(ErrorKind::Config, "partition.boundaries describe " +
                                  std::to_string(p.modules()) +
                                  " modules but partition.K = " + std::to_string(K));
    }
    return p;
  }
  const std::string strategy = keys.text("partition.strategy", "even");
  if (K < 1) fail(ErrorKind::Config, "partition.K must be >= 1");
  if (strategy == "even") return partition_even(layers.size(), static_cast<std::size_t>(K));
  if (strategy == "cost") {
    std::vector<double> costs;
    for (const LayerSpec& l : layers) costs.push_back(static_cast<double>(l.param_count()));
    return partition_by_cost(costs, static_cast<std::size_t>(K));
  }
  fail(ErrorKind::Config, "partition.strategy must be 'even' or 'cost'");
}

LrSchedule make_schedule(const Keys& keys, const ExperimentConfig& cfg,
                         const Dataset* data_for_epochs) {
  const std::string kind = keys.text("lr.schedule", "constant");
  const TrainConfig& t = cfg.train;
  if (kind == "constant") return ConstantLr{keys.real("lr.gamma", 0.1)};
  if (kind == "harmonic") return Harmonic{keys.real("lr.c", 1.0)};
  if (kind == "step") {
    StepDecay step;
    const std::string base = keys.text("lr.base", "scaled");
    step.base = base == "scaled"
                    ? scaled_base_lr(static_cast<std::int64_t>(t.batch_size), t.M)
                    : Keys::to_real("lr.base", base);
    if (keys.has("lr.milestones") && !keys.text("lr.milestones", "").empty()) {
      for (const std::string& f : split(keys.text("lr.milestones", ""), ',')) {
        step.milestones.push_back(Keys::to_real("lr.milestones", f));
      }
    }
    step.factor = keys.real("lr.factor", 0.1);
    const double warm = keys.real("lr.warmup_epochs", 3.0);
    if (warm < 0.0) fail(ErrorKind::Config, "lr.warmup_epochs must be >= 0");
    step.warmup_updates = warmup_updates(
        warm, batches_per_epoch(data_for_epochs->size(), t.batch_size), t.M);
    return step;
  }
  if (kind == "theorem3") {
    BoundInputs in;
    in.epsilon = keys.real("lr.epsilon", 1.0);
    in.A = keys.real("lr.A", 1.0);
    in.L = keys.real("lr.L", 1.0);
    in.gap = keys.real("lr.gap", 1.0);
    in.M = t.M;
    in.S = t.updates;
    in.sum_dbar = total_averaged_los(t.K(), t.M).value();
    try {
      return constant_from_bound(in);
    } catch (const Error& e) {
      fail(ErrorKind::Config, std::string("lr.schedule = theorem3: ") + e.what());
    }
  }
  fail(ErrorKind::Config, "lr.schedule must be constant, step, harmonic or theorem3");
}

}  // namespace

const char* to_string(RunMode mode) noexcept {
  switch (mode) {
    case RunMode::AdlClocked: return "adl-clocked";
    case RunMode::AdlParallel: return "adl-parallel";
    case RunMode::SyncGa: return "sync-ga";
    case RunMode::DelayedReplay: return "delayed-replay";
  }
  return "?";
}

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> layers;
  for (const std::string& item : split(text, ',')) {
    const std::vector<std::string> f = split(item, ':');
    auto dim = [&](std::size_t i) {
      const std::int64_t v = Keys::to_integer("model.layers", f.at(i));
      if (v < 1) fail(ErrorKind::Config, "layer dimensions must be >= 1");
      return static_cast<std::size_t>(v);
    };
    if (f[0] == "affine" && f.size() == 3) {
      layers.push_back(LayerSpec::affine(dim(1), dim(2)));
    } else if (f[0] == "tanh" && f.size() == 2) {
      layers.push_back(LayerSpec::tanh(dim(1)));
    } else if (f[0] == "relu" && f.size() == 2) {
      layers.push_back(LayerSpec::relu(dim(1)));
    } else if (f[0] == "identity" && f.size() == 2) {
      layers.push_back(LayerSpec::identity(dim(1)));
    } else {
      fail(ErrorKind::Config, "cannot parse layer '" + item + "'");
    }
  }
  try {
    validate_chain(layers);
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("model.layers: ") + e.what());
  }
  return layers;
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::string section;
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": bad section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    if (!known_keys().count(key)) {
      fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (kv.count(key)) {
      fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  const Keys keys(std::move(kv));

  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  t.layers = parse_layers(keys.required("model.layers"));
  const std::string loss = keys.text("model.loss", "mse");
  if (loss == "mse") {
    t.loss = LossKind::MeanSquaredError;
  } else if (loss == "softmax-ce") {
    t.loss = LossKind::SoftmaxCrossEntropy;
  } else {
    fail(ErrorKind::Config, "model.loss must be 'mse' or 'softmax-ce'");
  }
  t.init_seed = keys.seed("model.init_seed", 0);
  t.partition = make_partition(keys, t.layers);

  DatasetSpec& d = cfg.dataset;
  d.id = keys.required("data.dataset");
  if (d.id != "linreg" && d.id != "two-spirals") {
    fail(ErrorKind::Config, "data.dataset must be 'linreg' or 'two-spirals'");
  }
  d.n = positive(keys, "data.n", 1000);
  d.dim = positive(keys, "data.dim", d.id == "linreg" ? 8 : 2);
  d.out_dim = positive(keys, "data.out_dim", 1);
  d.noise_std = keys.real("data.noise_std", 0.0);
  d.seed = keys.seed("data.seed", 0);
  t.sampler_seed = keys.seed("data.sampler_seed", d.seed + 1);
  if (d.noise_std < 0.0) fail(ErrorKind::Config, "data.noise_std must be >= 0");
  if (d.id == "two-spirals" && keys.has("data.dim") && d.dim != 2) {
    fail(ErrorKind::Config, "two-spirals data is 2-dimensional");
  }

  t.M = static_cast<std::int64_t>(positive(keys, "train.M", 1));
  t.batch_size = positive(keys, "train.batch_size", 32);
  t.updates = static_cast<std::int64_t>(positive(keys, "train.updates", 100));
  t.sgd.momentum = keys.real("train.momentum", 0.0);
  t.sgd.weight_decay = keys.real("train.weight_decay", 0.0);

  const std::string preset = keys.text("run.theory_preset", "false");
  if (preset != "true" && preset != "false") {
    fail(ErrorKind::Config, "run.theory_preset must be true or false");
  }
  cfg.theory_preset = preset == "true";
  if (cfg.theory_preset) t.sgd = SgdConfig{};

  const std::string mode = keys.text("run.mode", "adl-clocked");
  if (mode == "adl-clocked") {
    cfg.mode = RunMode::AdlClocked;
  } else if (mode == "adl-parallel") {
    cfg.mode = RunMode::AdlParallel;
  } else if (mode == "sync-ga") {
    cfg.mode = RunMode::SyncGa;
  } else if (mode == "delayed-replay") {
    cfg.mode = RunMode::DelayedReplay;
  } else {
    fail(ErrorKind::Config, "run.mode must be adl-clocked, adl-parallel, sync-ga "
                            "or delayed-replay");
  }
  t.mode = cfg.mode == RunMode::AdlParallel ? ExecutionMode::Parallel
                                            : ExecutionMode::Clocked;
  cfg.out_path = keys.text("run.out_path", "");
  const std::string level = keys.text("run.trace_level", "updates");
  if (level == "updates") {
    cfg.trace_level = TraceLevel::Updates;
  } else if (level == "ticks") {
    cfg.trace_level = TraceLevel::Ticks;
  } else {
    fail(ErrorKind::Config, "run.trace_level must be 'updates' or 'ticks'");
  }
  t.trace_ticks = cfg.trace_level == TraceLevel::Ticks;
  t.queue_timeout_ms = keys.integer("run.queue_timeout_ms", 60000);
  if (t.queue_timeout_ms < 1) fail(ErrorKind::Config, "run.queue_timeout_ms must be >= 1");

  // Step decay needs the epoch length, which depends on the dataset size only.
  Dataset sizing;
  sizing.inputs = Tensor({d.n, 1});
  t.schedule = make_schedule(keys, cfg, &sizing);

  // Everything that depends on the data shape is checked now, before compute.
  Dataset probe;
  probe.inputs = Tensor({1, d.id == "two-spirals" ? std::size_t{2} : d.dim});
  if (d.id == "two-spirals") {
    probe.targets = Tensor({1});
    probe.classification = true;
    probe.num_classes = 2;
  } else {
    probe.targets = Tensor({1, d.out_dim});
  }
  try {
    validate(t, probe);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Config, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

Dataset make_dataset(const DatasetSpec& spec) {
  if (spec.id == "linreg") {
    return gen_linreg(spec.n, spec.dim, spec.noise_std, spec.seed, spec.out_dim);
  }
  if (spec.id == "two-spirals") {
    return gen_two_spirals(spec.n, spec.noise_std, spec.seed);
  }
  fail(ErrorKind::Config, "unknown dataset '" + spec.id + "'");
}

RunTrace run_experiment(const ExperimentConfig& config, const Dataset& data) {
  switch (config.mode) {
    case RunMode::AdlClocked: return run_clocked(config.train, data);
    case RunMode::AdlParallel: return run_parallel(config.train, data);
    case RunMode::SyncGa: return sync_ga_sgd(config.train, data);
    case RunMode::DelayedReplay: return delayed_replay(config.train, data);
  }
  fail(ErrorKind::Config, "unknown run mode");
}

std::string summary_text(const ExperimentConfig& config, const RunTrace& trace) {
  std::ostringstream os;
  os << "mode = " << to_string(config.mode) << '\n'
     << "K = " << trace.K << '\n'
     << "M = " << trace.M << '\n'
     << "updates_requested = " << config.train.updates << '\n'
     << "updates_completed = " << trace.updates.size() << '\n';
  if (!trace.updates.empty()) {
    os << "final_loss = " << format_double(trace.updates.back().loss) << '\n'
       << "final_grad_norm = " << format_double(trace.updates.back().grad_norm) << '\n';
  }
  os << "diverged = " << (trace.diverged ? "true" : "false") << '\n'
     << "wall_seconds = " << format_double(trace.wall_seconds) << '\n'
     << "momentum = " << format_double(config.train.sgd.momentum) << '\n'
     << "weight_decay = " << format_double(config.train.sgd.weight_decay) << '\n';
  for (std::int64_t k = 1; k <= trace.K; ++k) {
    const std::optional<Rational> seen = observed_averaged_los(trace, k);
    os << "module_" << k << "_averaged_los_observed = "
       << (seen ? seen->str() : std::string("n/a")) << '\n'
       << "module_" << k << "_averaged_los_predicted = "
       << averaged_los(trace.K, k, trace.M).str() << '\n';
  }
  return os.str();
}

void write_outputs(const ExperimentConfig& config, const RunTrace& trace,
                   const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Config, "cannot create " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  write_trace_csv((base / "trace.csv").string(), trace);
  std::ofstream summary(base / "summary.txt");
  if (!summary) fail(ErrorKind::Config, "cannot write summary in " + dir);
  summary << summary_text(config, trace);
  if (config.trace_level == TraceLevel::Ticks) {
    std::ofstream ticks(base / "ticks.csv");
    write_ticks_csv(ticks, trace);
  }
}

}  // namespace adl
