// SPDX-License-Identifier: Apache-2.0
//
// adl: command-line front end over the C API.
//
//   adl run <config> [--out DIR]
//   adl staleness-table --K 8 --M 1,2,4
//   adl bounds --gamma 0.1 --grad-norm-sq 4 --M 2 --sum-dbar 3 ...
//   adl compare a.csv b.csv --tol 0
//
// Exit codes: 0 ok, 1 comparison mismatch, 2 config/parse/domain error,
// 3 divergence.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adl/adl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fraction(int64_t num, int64_t den) {
  return den == 1 ? std::to_string(num)
                  : std::to_string(num) + "/" + std::to_string(den);
}

int report(adl_status status, const char* what) {
  std::cerr << "adl " << what << ": " << adl_status_name(status) << ": "
            << adl_last_error() << '\n';
  return status == ADL_ERR_DIVERGED ? kExitDiverged : kExitConfig;
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
  adl_experiment* exp = nullptr;
  if (adl_status st = adl_experiment_load(config_path.c_str(), &exp); st != ADL_OK) {
    return report(st, "run");
  }
  std::string out = out_flag;
  if (out.empty()) out = adl_experiment_out_path(exp);
  if (out.empty()) {
    const char* env = std::getenv("ADL_OUT_DIR");
    out = env && *env ? env : "adl-out";
  }
  adl_trace* trace = nullptr;
  const adl_status st = adl_experiment_run(exp, &trace);
  int code = kExitOk;
  if (st != ADL_OK && st != ADL_ERR_DIVERGED) {
    code = report(st, "run");
  } else {
    if (adl_status wst = adl_experiment_write_outputs(exp, trace, out.c_str());
        wst != ADL_OK) {
      code = report(wst, "run");
    } else {
      const int64_t n = adl_trace_update_count(trace);
      double loss = 0.0;
      double norm = 0.0;
      if (n > 0) adl_trace_update(trace, n - 1, &loss, &norm);
      std::cout << "updates=" << n << " final_loss=" << fmt(loss)
                << " final_grad_norm=" << fmt(norm)
                << " diverged=" << (adl_trace_diverged(trace) ? "true" : "false")
                << " out=" << out << '\n';
      if (st == ADL_ERR_DIVERGED) code = kExitDiverged;
    }
  }
  adl_trace_free(trace);
  adl_experiment_free(exp);
  return code;
}

int cmd_staleness_table(int64_t K, const std::vector<int64_t>& Ms) {
  std::cout << "averaged staleness d_k per module (K=" << K << ")\n";
  std::cout << "k";
  for (int64_t M : Ms) std::cout << "\tM=" << M;
  std::cout << '\n';
  for (int64_t k = 1; k <= K; ++k) {
    std::cout << k;
    for (int64_t M : Ms) {
      int64_t num = 0;
      int64_t den = 1;
      if (adl_status st = adl_averaged_los(K, k, M, &num, &den); st != ADL_OK) {
        std::cout << '\n';
        return report(st, "staleness-table");
      }
      std::cout << '\t' << fraction(num, den);
    }
    std::cout << '\n';
  }
  std::cout << "sum";
  for (int64_t M : Ms) {
    int64_t num = 0;
    int64_t den = 1;
    adl_total_averaged_los(K, M, &num, &den);
    std::cout << '\t' << fraction(num, den);
  }
  std::cout << '\n';
  std::cout << "note: module k backpropagates with a delay of 2(K-k) batches, so "
               "module 1 peaks at "
            << 2 * (K - 1)
            << " for M=1; counting the delay as 2K would give " << 2 * K
            << " instead.\n";
  return kExitOk;
}

struct BoundFlags {
  adl_bound_inputs in{0.1, 0.0, 1.0, 1.0, 1, 0.0, 1, 1.0, 1.0};
  int64_t K = 0;
  std::string schedule = "constant";
  double c = 1.0;
};

int cmd_bounds(BoundFlags f) {
  int code = kExitOk;
  if (f.K > 0) {
    int64_t num = 0;
    int64_t den = 1;
    if (adl_status st = adl_total_averaged_los(f.K, f.in.M, &num, &den); st != ADL_OK) {
      return report(st, "bounds");
    }
    f.in.sum_dbar = static_cast<double>(num) / static_cast<double>(den);
    std::cout << "sum_dbar = " << fraction(num, den) << " (K=" << f.K << ", M="
              << f.in.M << ")\n";
  } else {
    std::cout << "sum_dbar = " << fmt(f.in.sum_dbar) << '\n';
  }
  if (f.in.L * f.in.gamma > 1.0) {
    std::cout << "warning: L*gamma = " << fmt(f.in.L * f.in.gamma)
              << " violates L*gamma <= 1\n";
  }

  double v = 0.0;
  if (adl_status st = adl_theorem1_rhs(&f.in, &v); st == ADL_OK) {
    std::cout << "theorem1_rhs = " << fmt(v) << '\n';
  } else {
    std::cout << "theorem1_rhs = error: " << adl_last_error() << '\n';
    code = kExitConfig;
  }

  std::vector<double> schedule(static_cast<std::size_t>(f.in.S > 0 ? f.in.S : 0));
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    schedule[s] = f.schedule == "harmonic" ? f.c / static_cast<double>(s + 1)
                                           : f.in.gamma;
  }
  if (adl_status st = adl_theorem2_rhs(&f.in, schedule.data(), schedule.size(), &v);
      st == ADL_OK) {
    std::cout << "theorem2_rhs = " << fmt(v) << " (" << f.schedule << " schedule, S="
              << f.in.S << ")\n";
  } else {
    std::cout << "theorem2_rhs = error: " << adl_last_error() << '\n';
    code = kExitConfig;
  }

  int admissible = 0;
  if (adl_status st = adl_theorem3_lr(&f.in, &v, &admissible); st == ADL_OK) {
    std::cout << "theorem3_lr = " << fmt(v)
              << (admissible ? "" : " (violates L*gamma <= 1; lower epsilon)") << '\n';
    if (!admissible) code = kExitConfig;
  } else {
    std::cout << "theorem3_lr = error: " << adl_last_error() << '\n';
    code = kExitConfig;
  }
  if (adl_status st = adl_theorem3_bound(&f.in, &v); st == ADL_OK) {
    std::cout << "theorem3_bound = " << fmt(v) << '\n';
  } else {
    std::cout << "theorem3_bound = error: " << adl_last_error() << '\n';
    code = kExitConfig;
  }
  return code;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, double tol) {
  adl_trace* a = nullptr;
  adl_trace* b = nullptr;
  if (adl_status st = adl_trace_read_csv(a_path.c_str(), &a); st != ADL_OK) {
    return report(st, "compare");
  }
  if (adl_status st = adl_trace_read_csv(b_path.c_str(), &b); st != ADL_OK) {
    adl_trace_free(a);
    return report(st, "compare");
  }
  adl_compare_report r{};
  const adl_status st = adl_compare_traces(a, b, tol, &r);
  adl_trace_free(a);
  adl_trace_free(b);
  if (st != ADL_OK) {
    std::cerr << "adl compare: " << adl_last_error() << '\n';
    return kExitMismatch;
  }
  std::cout << "max_loss_diff = " << fmt(r.max_loss_diff) << '\n'
            << "max_grad_norm_diff = " << fmt(r.max_grad_norm_diff) << '\n';
  if (r.pass) {
    std::cout << "PASS (tol " << fmt(tol) << ")\n";
    return kExitOk;
  }
  std::cout << "FAIL: first divergence at " << r.detail << '\n';
  return kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accumulated decoupled learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Train from a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides run.out_path)");

  int64_t table_K = 0;
  std::vector<int64_t> table_M{1, 2, 4};
  auto* table = app.add_subcommand("staleness-table", "Averaged staleness per module");
  table->add_option("--K", table_K, "Split size")->required()->check(CLI::PositiveNumber);
  table->add_option("--M", table_M, "Accumulation steps")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);

  BoundFlags bf;
  auto* bounds = app.add_subcommand("bounds", "Evaluate the convergence bounds");
  bounds->add_option("--gamma", bf.in.gamma, "Learning rate");
  bounds->add_option("--grad-norm-sq", bf.in.grad_norm_sq, "Squared gradient norm");
  bounds->add_option("--A", bf.in.A, "Gradient norm bound");
  bounds->add_option("--L", bf.in.L, "Lipschitz constant");
  bounds->add_option("--M", bf.in.M, "Accumulation steps");
  bounds->add_option("--sum-dbar", bf.in.sum_dbar, "Sum of averaged staleness");
  bounds->add_option("--K", bf.K, "Split size (derives --sum-dbar)");
  bounds->add_option("--S", bf.in.S, "Number of updates");
  bounds->add_option("--gap", bf.in.gap, "f(theta_0) - f(theta*)");
  bounds->add_option("--epsilon", bf.in.epsilon, "Constant-rate scale factor");
  bounds->add_option("--schedule", bf.schedule, "constant or harmonic")
      ->check(CLI::IsMember({"constant", "harmonic"}));
  bounds->add_option("--c", bf.c, "Harmonic schedule numerator");

  std::string trace_a;
  std::string trace_b;
  double tol = 0.0;
  auto* compare = app.add_subcommand("compare", "Compare two trace.csv files");
  compare->add_option("a", trace_a, "First trace")->required();
  compare->add_option("b", trace_b, "Second trace")->required();
  compare->add_option("--tol", tol, "Absolute tolerance")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(config_path, out_dir);
  if (*table) return cmd_staleness_table(table_K, table_M);
  if (*bounds) return cmd_bounds(bf);
  if (*compare) return cmd_compare(trace_a, trace_b, tol);
  return kExitConfig;
}
