// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <adl/error.hpp>
#include <adl/experiment.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace adl;

namespace {

const char* kBase = R"(
# comment line
[model]
layers = affine:2:8, tanh:8, affine:8:2
loss = softmax-ce
[partition]
K = 3
[data]
dataset = two-spirals
n = 64
[train]
M = 2
batch_size = 8
updates = 6
[lr]
schedule = constant
gamma = 0.05
)";

ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Comparison;  // sentinel: parsed fine
}

std::string without(const std::string& text, const std::string& line) {
  std::string out = text;
  const auto pos = out.find(line);
  REQUIRE(pos != std::string::npos);
  out.erase(pos, line.size());
  return out;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("a complete config parses with defaults") {
  const ExperimentConfig c = parse_config(kBase);
  CHECK(c.train.layers.size() == 3);
  CHECK(c.train.K() == 3);
  CHECK(c.train.M == 2);
  CHECK(c.train.loss == LossKind::SoftmaxCrossEntropy);
  CHECK(c.mode == RunMode::AdlClocked);
  CHECK(c.trace_level == TraceLevel::Updates);
  CHECK(c.dataset.id == "two-spirals");
  CHECK(std::get<ConstantLr>(c.train.schedule).gamma == 0.05);
  CHECK(c.train.sgd.momentum == 0.0);
}

TEST_CASE("layer list syntax") {
  const auto layers = parse_layers("affine:3:4, relu:4,tanh:4 , identity:4");
  REQUIRE(layers.size() == 4);
  CHECK(layers[0] == LayerSpec::affine(3, 4));
  CHECK(layers[1] == LayerSpec::relu(4));
  CHECK(layers[2] == LayerSpec::tanh(4));
  CHECK(layers[3] == LayerSpec::identity(4));
  CHECK_THROWS_AS(parse_layers("affine:3"), Error);
  CHECK_THROWS_AS(parse_layers("conv:3:3"), Error);
  CHECK_THROWS_AS(parse_layers("affine:3:4, tanh:5"), Error);
}

TEST_CASE("config errors") {
  const std::string base = kBase;
  CHECK(kind_of(base) == ErrorKind::Comparison);
  CHECK(kind_of(without(base, "dataset = two-spirals\n")) == ErrorKind::Config);
  CHECK(kind_of(without(base, "layers = affine:2:8, tanh:8, affine:8:2\n")) == ErrorKind::Config);
  CHECK(kind_of(without(base, "K = 3\n")) == ErrorKind::Config);
  CHECK(kind_of(base + "[train]\nbogus = 1\n") == ErrorKind::Config);
  CHECK(kind_of(base + "[train]\nM = 3\n") == ErrorKind::Config);
  CHECK(kind_of(base + "[run]\nmode = warp\n") == ErrorKind::Config);
  CHECK(kind_of(base + "[run]\nmode adl-clocked\n") == ErrorKind::Parse);
  CHECK(kind_of(base + "[run\n") == ErrorKind::Parse);
  CHECK(kind_of(base + "[train]\nmomentum = 1.5\n") == ErrorKind::Config);
  CHECK(kind_of(base + "[run]\ntrace_level = everything\n") == ErrorKind::Config);
  CHECK(kind_of(std::string(kBase).replace(std::string(kBase).find("M = 2"), 5, "M = 0")) ==
        ErrorKind::Config);
  CHECK(kind_of(std::string(kBase).replace(std::string(kBase).find("K = 3"), 5, "K = 9")) ==
        ErrorKind::Config);
  CHECK(kind_of(std::string(kBase).replace(std::string(kBase).find("gamma = 0.05"), 12,
                                           "gamma = fast")) == ErrorKind::Config);
  CHECK_THROWS_AS(load_config("/nonexistent/config.conf"), Error);
}

TEST_CASE("schedules, boundaries and presets") {
  std::string text = without(kBase, "K = 3\n");
  text = without(text, "schedule = constant\ngamma = 0.05\n");
  const ExperimentConfig step = parse_config(
      text + "[partition]\nboundaries = 1,2,4\n[lr]\nschedule = step\nbase = scaled\n"
             "milestones = 5, 10\nfactor = 0.5\n[train]\nmomentum = 0.9\n"
             "[run]\ntheory_preset = true\n");
  CHECK(step.train.partition.boundaries() == std::vector<std::size_t>{1, 2, 4});
  const auto& sd = std::get<StepDecay>(step.train.schedule);
  CHECK(sd.base == doctest::Approx(0.1 * 8 * 2 / 256));
  CHECK(sd.milestones == std::vector<double>{5.0, 10.0});
  // Three warm-up epochs of 8 batches each, 2 batches per update.
  CHECK(sd.warmup_updates == 12);
  CHECK(step.train.sgd.momentum == 0.0);
  CHECK(step.theory_preset);

  const ExperimentConfig harm =
      parse_config(without(kBase, "schedule = constant\ngamma = 0.05\n") +
                   "[lr]\nschedule = harmonic\nc = 0.5\n");
  CHECK(std::get<Harmonic>(harm.train.schedule).c == 0.5);

  const ExperimentConfig t3 =
      parse_config(without(kBase, "schedule = constant\ngamma = 0.05\n") +
                   "[lr]\nschedule = theorem3\nepsilon = 1\nA = 1\nL = 1\ngap = 1\n");
  // S = 6, M = 2; averaged staleness for K = 3, M = 2 is 2, 1, 0 (sum 3).
  const double expected = std::sqrt(2.0 / (6.0 * (1.0 + 3.0 / 2.0)));
  CHECK(std::get<ConstantLr>(t3.train.schedule).gamma == doctest::Approx(expected));
}

TEST_CASE("run modes agree and outputs are written") {
  const ExperimentConfig base = parse_config(kBase);
  const Dataset d = make_dataset(base.dataset);
  ExperimentConfig replay = base;
  replay.mode = RunMode::DelayedReplay;
  ExperimentConfig parallel = base;
  parallel.mode = RunMode::AdlParallel;
  const RunTrace a = run_experiment(base, d);
  CHECK(a.updates == run_experiment(replay, d).updates);
  CHECK(a.updates == run_experiment(parallel, d).updates);

  const auto dir = std::filesystem::temp_directory_path() / "adl_experiment_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig ticks = base;
  ticks.trace_level = TraceLevel::Ticks;
  ticks.train.trace_ticks = true;
  write_outputs(ticks, run_experiment(ticks, d), dir.string());
  CHECK(std::filesystem::exists(dir / "trace.csv"));
  CHECK(std::filesystem::exists(dir / "summary.txt"));
  CHECK(std::filesystem::exists(dir / "ticks.csv"));
  std::ifstream in(dir / "summary.txt");
  std::stringstream summary;
  summary << in.rdbuf();
  CHECK(summary.str().find("updates_completed = 6") != std::string::npos);
  CHECK(summary.str().find("diverged = false") != std::string::npos);
  CHECK(summary.str().find("module_1_averaged_los_observed = 2") != std::string::npos);
  CHECK(summary.str().find("module_2_averaged_los_predicted = 1") != std::string::npos);
  CHECK(summary.str().find("module_3_averaged_los_observed = 0") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("K = 1 sync and pipeline runs write identical CSV") {
  std::string text = std::string(kBase).replace(std::string(kBase).find("K = 3"), 5, "K = 1");
  ExperimentConfig adl_run = parse_config(text);
  ExperimentConfig sync = parse_config(text + "[run]\nmode = sync-ga\n");
  const Dataset d = make_dataset(adl_run.dataset);
  std::ostringstream a, b;
  write_trace_csv(a, run_experiment(adl_run, d));
  write_trace_csv(b, run_experiment(sync, d));
  CHECK(a.str() == b.str());
}

}  // TEST_SUITE
