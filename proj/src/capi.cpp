// SPDX-License-Identifier: Apache-2.0
#include "adl/adl.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "adl/error.hpp"
#include "adl/experiment.hpp"
#include "adl/oracle.hpp"
#include "adl/staleness.hpp"

struct adl_experiment {
  adl::ExperimentConfig config;
};

struct adl_trace {
  adl::RunTrace trace;
};

namespace {

thread_local std::string last_error;

adl_status status_of(adl::ErrorKind kind) {
  switch (kind) {
    case adl::ErrorKind::Dimension: return ADL_ERR_DIMENSION;
    case adl::ErrorKind::Domain: return ADL_ERR_DOMAIN;
    case adl::ErrorKind::Config: return ADL_ERR_CONFIG;
    case adl::ErrorKind::Parse: return ADL_ERR_PARSE;
    case adl::ErrorKind::Protocol: return ADL_ERR_PROTOCOL;
    case adl::ErrorKind::Divergence: return ADL_ERR_DIVERGED;
    case adl::ErrorKind::Comparison: return ADL_ERR_COMPARISON;
  }
  return ADL_ERR_INTERNAL;
}

template <class F>
adl_status guarded(F&& body) {
  last_error.clear();
  try {
    return body();
  } catch (const adl::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return ADL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ADL_ERR_INTERNAL;
  }
}

adl_status invalid(const char* what) {
  last_error = what;
  return ADL_ERR_INVALID_ARGUMENT;
}

adl::BoundInputs convert(const adl_bound_inputs& in) {
  adl::BoundInputs b;
  b.gamma = in.gamma;
  b.grad_norm_sq = in.grad_norm_sq;
  b.A = in.A;
  b.L = in.L;
  b.M = in.M;
  b.sum_dbar = in.sum_dbar;
  b.S = in.S;
  b.gap = in.gap;
  b.epsilon = in.epsilon;
  return b;
}

const adl::ModuleUpdate* module_at(const adl_trace* trace, int64_t s, int64_t k) {
  const auto& ups = trace->trace.updates;
  if (s < 0 || s >= static_cast<int64_t>(ups.size())) return nullptr;
  const auto& mods = ups[static_cast<std::size_t>(s)].modules;
  if (k < 1 || k > static_cast<int64_t>(mods.size())) return nullptr;
  return &mods[static_cast<std::size_t>(k - 1)];
}

}  // namespace

extern "C" {

const char* adl_version(void) { return "1.0.0"; }

const char* adl_last_error(void) { return last_error.c_str(); }

const char* adl_status_name(adl_status status) {
  switch (status) {
    case ADL_OK: return "ok";
    case ADL_ERR_INTERNAL: return "internal error";
    case ADL_ERR_CONFIG: return "configuration error";
    case ADL_ERR_DIVERGED: return "diverged";
    case ADL_ERR_DOMAIN: return "domain error";
    case ADL_ERR_PARSE: return "parse error";
    case ADL_ERR_PROTOCOL: return "protocol violation";
    case ADL_ERR_DIMENSION: return "dimension error";
    case ADL_ERR_COMPARISON: return "comparison error";
    case ADL_ERR_INVALID_ARGUMENT: return "invalid argument";
  }
  return "unknown";
}

adl_status adl_experiment_load(const char* path, adl_experiment** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    *out = new adl_experiment{adl::load_config(path)};
    return ADL_OK;
  });
}

adl_status adl_experiment_parse(const char* text, adl_experiment** out) {
  if (!text || !out) return invalid("null argument");
  return guarded([&] {
    *out = new adl_experiment{adl::parse_config(text)};
    return ADL_OK;
  });
}

void adl_experiment_free(adl_experiment* experiment) { delete experiment; }

const char* adl_experiment_out_path(const adl_experiment* experiment) {
  return experiment ? experiment->config.out_path.c_str() : "";
}

adl_status adl_experiment_set_out_path(adl_experiment* experiment,
                                       const char* path) {
  if (!experiment || !path) return invalid("null argument");
  experiment->config.out_path = path;
  return ADL_OK;
}

adl_status adl_experiment_run(const adl_experiment* experiment, adl_trace** out) {
  if (!experiment || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    const adl::Dataset data = adl::make_dataset(experiment->config.dataset);
    *out = new adl_trace{adl::run_experiment(experiment->config, data)};
    if ((*out)->trace.diverged) {
      last_error = "training diverged";
      return ADL_ERR_DIVERGED;
    }
    return ADL_OK;
  });
}

adl_status adl_experiment_write_outputs(const adl_experiment* experiment,
                                        const adl_trace* trace, const char* dir) {
  if (!experiment || !trace || !dir) return invalid("null argument");
  return guarded([&] {
    adl::write_outputs(experiment->config, trace->trace, dir);
    return ADL_OK;
  });
}

void adl_trace_free(adl_trace* trace) { delete trace; }

adl_status adl_trace_read_csv(const char* path, adl_trace** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    *out = new adl_trace{adl::read_trace_csv(std::string(path))};
    return ADL_OK;
  });
}

adl_status adl_trace_write_csv(const adl_trace* trace, const char* path) {
  if (!trace || !path) return invalid("null argument");
  return guarded([&] {
    adl::write_trace_csv(std::string(path), trace->trace);
    return ADL_OK;
  });
}

int64_t adl_trace_update_count(const adl_trace* trace) {
  return trace ? static_cast<int64_t>(trace->trace.updates.size()) : 0;
}

int64_t adl_trace_modules(const adl_trace* trace) {
  return trace ? trace->trace.K : 0;
}

int64_t adl_trace_accumulation_steps(const adl_trace* trace) {
  return trace ? trace->trace.M : 0;
}

int adl_trace_diverged(const adl_trace* trace) {
  return trace && trace->trace.diverged ? 1 : 0;
}

double adl_trace_wall_seconds(const adl_trace* trace) {
  return trace ? trace->trace.wall_seconds : 0.0;
}

adl_status adl_trace_update(const adl_trace* trace, int64_t s, double* loss,
                            double* grad_norm) {
  if (!trace) return invalid("null trace");
  const auto& ups = trace->trace.updates;
  if (s < 0 || s >= static_cast<int64_t>(ups.size())) {
    return invalid("update index out of range");
  }
  if (loss) *loss = ups[static_cast<std::size_t>(s)].loss;
  if (grad_norm) *grad_norm = ups[static_cast<std::size_t>(s)].grad_norm;
  return ADL_OK;
}

adl_status adl_trace_slot(const adl_trace* trace, int64_t s, int64_t k, int64_t j,
                          int64_t* batch_index, int64_t* version_used,
                          int64_t* staleness) {
  if (!trace) return invalid("null trace");
  const adl::ModuleUpdate* m = module_at(trace, s, k);
  if (!m || j < 0 || j >= static_cast<int64_t>(m->slots.size())) {
    return invalid("slot out of range");
  }
  const auto uj = static_cast<std::size_t>(j);
  if (batch_index) *batch_index = m->slots[uj].batch_index;
  if (version_used) *version_used = m->slots[uj].version;
  if (staleness) *staleness = m->staleness[uj];
  return ADL_OK;
}

adl_status adl_compare_traces(const adl_trace* a, const adl_trace* b, double tol,
                              adl_compare_report* out) {
  if (!a || !b || !out) return invalid("null argument");
  return guarded([&] {
    const adl::CompareReport r = adl::compare_traces(a->trace, b->trace, tol);
    out->pass = r.pass ? 1 : 0;
    out->has_divergence = r.first_divergence ? 1 : 0;
    out->first_divergence = r.first_divergence.value_or(-1);
    out->max_loss_diff = r.max_loss_diff;
    out->max_grad_norm_diff = r.max_grad_norm_diff;
    out->max_param_diff = r.max_param_diff;
    std::strncpy(out->detail, r.detail.c_str(), sizeof out->detail - 1);
    out->detail[sizeof out->detail - 1] = '\0';
    return ADL_OK;
  });
}

adl_status adl_level_of_staleness(int64_t t, int64_t d, int64_t M, int64_t* out) {
  if (!out) return invalid("null argument");
  return guarded([&] {
    *out = adl::level_of_staleness(t, d, M);
    return ADL_OK;
  });
}

adl_status adl_module_staleness(int64_t s, int64_t j, int64_t K, int64_t k,
                                int64_t M, int64_t* out) {
  if (!out) return invalid("null argument");
  return guarded([&] {
    *out = adl::module_staleness(s, j, K, k, M);
    return ADL_OK;
  });
}

adl_status adl_effective_version(int64_t s, int64_t j, int64_t K, int64_t k,
                                 int64_t M, int64_t* out) {
  if (!out) return invalid("null argument");
  return guarded([&] {
    *out = adl::effective_version(s, j, K, k, M);
    return ADL_OK;
  });
}

adl_status adl_averaged_los(int64_t K, int64_t k, int64_t M, int64_t* num,
                            int64_t* den) {
  if (!num || !den) return invalid("null argument");
  return guarded([&] {
    const adl::Rational r = adl::averaged_los(K, k, M);
    *num = r.num;
    *den = r.den;
    return ADL_OK;
  });
}

adl_status adl_total_averaged_los(int64_t K, int64_t M, int64_t* num,
                                  int64_t* den) {
  if (!num || !den) return invalid("null argument");
  return guarded([&] {
    const adl::Rational r = adl::total_averaged_los(K, M);
    *num = r.num;
    *den = r.den;
    return ADL_OK;
  });
}

adl_status adl_theorem1_rhs(const adl_bound_inputs* in, double* out) {
  if (!in || !out) return invalid("null argument");
  return guarded([&] {
    *out = adl::theorem1_rhs(convert(*in));
    return ADL_OK;
  });
}

adl_status adl_theorem2_rhs(const adl_bound_inputs* in, const double* schedule,
                            size_t length, double* out) {
  if (!in || !out || (!schedule && length)) return invalid("null argument");
  return guarded([&] {
    *out = adl::theorem2_rhs(convert(*in), std::span<const double>(schedule, length));
    return ADL_OK;
  });
}

adl_status adl_theorem3_lr(const adl_bound_inputs* in, double* gamma,
                           int* admissible) {
  if (!in || !gamma) return invalid("null argument");
  return guarded([&] {
    const adl::ConstantRate r = adl::theorem3_lr(convert(*in));
    *gamma = r.gamma;
    if (admissible) *admissible = r.admissible ? 1 : 0;
    return ADL_OK;
  });
}

adl_status adl_theorem3_bound(const adl_bound_inputs* in, double* out) {
  if (!in || !out) return invalid("null argument");
  return guarded([&] {
    *out = adl::theorem3_bound(convert(*in));
    return ADL_OK;
  });
}

}  // extern "C"
