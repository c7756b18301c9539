// SPDX-License-Identifier: Apache-2.0
#include "adl/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "adl/error.hpp"

namespace adl {

TraceBuilder::TraceBuilder(std::int64_t K, std::int64_t M) : K_(K), M_(M) {}

TraceBuilder::Pending& TraceBuilder::pending(std::int64_t s) {
  const std::int64_t offset = s - finalized();
  if (offset < 0) fail(ErrorKind::Protocol, "report for finalised update");
  while (static_cast<std::int64_t>(pending_.size()) <= offset) {
    Pending p;
    p.modules.resize(static_cast<std::size_t>(K_));
    pending_.push_back(std::move(p));
  }
  return pending_[static_cast<std::size_t>(offset)];
}

void TraceBuilder::add_loss(std::int64_t s, double loss) {
  Pending& p = pending(s);
  if (p.losses == M_) fail(ErrorKind::Protocol, "more than M losses for update");
  p.loss_sum += loss;
  ++p.losses;
}

void TraceBuilder::add_module_update(std::int64_t s, std::int64_t k,
                                     ModuleUpdate update, bool finite) {
  Pending& p = pending(s);
  auto& slot = p.modules.at(static_cast<std::size_t>(k - 1));
  if (slot) fail(ErrorKind::Protocol, "module reported update twice");
  slot = std::move(update);
  p.finite = p.finite && finite;
}

bool TraceBuilder::flush() {
  while (!diverged_ && !pending_.empty()) {
    Pending& p = pending_.front();
    if (p.losses < M_) break;
    if (!std::all_of(p.modules.begin(), p.modules.end(),
                     [](const auto& m) { return m.has_value(); })) {
      break;
    }
    UpdateRecord rec;
    rec.s = finalized();
    rec.loss = p.loss_sum / static_cast<double>(M_);
    double sq = 0.0;
    for (auto& m : p.modules) {
      sq += m->grad_sq_norm;
      rec.modules.push_back(std::move(*m));
    }
    rec.grad_norm = std::sqrt(sq);
    const bool bad = !p.finite || !std::isfinite(rec.loss) ||
                     !std::isfinite(rec.grad_norm) ||
                     rec.loss > kDivergenceThreshold ||
                     rec.grad_norm > kDivergenceThreshold;
    done_.push_back(std::move(rec));
    pending_.erase(pending_.begin());
    if (bad) diverged_ = true;
  }
  return !diverged_;
}

RunTrace TraceBuilder::take() {
  RunTrace t;
  t.K = K_;
  t.M = M_;
  t.updates = std::move(done_);
  t.diverged = diverged_;
  return t;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << kTraceCsvHeader << '\n';
  for (const UpdateRecord& rec : trace.updates) {
    const std::string loss = format_double(rec.loss);
    const std::string norm = format_double(rec.grad_norm);
    for (std::size_t k = 0; k < rec.modules.size(); ++k) {
      const ModuleUpdate& m = rec.modules[k];
      for (std::size_t j = 0; j < m.slots.size(); ++j) {
        os << rec.s << ',' << m.tick << ',' << loss << ',' << norm << ','
           << (k + 1) << ',' << j << ',' << m.slots[j].batch_index << ','
           << m.slots[j].version << ',' << m.staleness[j] << '\n';
      }
    }
  }
}

void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Config, "cannot write " + path);
  write_trace_csv(os, trace);
}

namespace {

std::int64_t parse_int(const std::string& field, std::size_t line) {
  char* end = nullptr;
  const long long v = std::strtoll(field.c_str(), &end, 10);
  if (field.empty() || *end != '\0') {
    fail(ErrorKind::Parse, "line " + std::to_string(line) +
                               ": bad integer '" + field + "'");
  }
  return v;
}

double parse_real(const std::string& field, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || *end != '\0') {
    fail(ErrorKind::Parse, "line " + std::to_string(line) + ": bad number '" +
                               field + "'");
  }
  return v;
}

}  // namespace

RunTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::Parse, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceCsvHeader) fail(ErrorKind::Parse, "unexpected CSV header");

  // s -> module -> slots
  std::map<std::int64_t, UpdateRecord> records;
  std::int64_t K = 0;
  std::int64_t M = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) +
                                 ": expected 9 fields");
    }
    const std::int64_t s = parse_int(f[0], lineno);
    const std::int64_t tick = parse_int(f[1], lineno);
    const double loss = parse_real(f[2], lineno);
    const double norm = parse_real(f[3], lineno);
    const std::int64_t k = parse_int(f[4], lineno);
    const std::int64_t j = parse_int(f[5], lineno);
    const std::int64_t batch = parse_int(f[6], lineno);
    const std::int64_t version = parse_int(f[7], lineno);
    const std::int64_t d = parse_int(f[8], lineno);
    if (s < 0 || k < 1 || j < 0) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) +
                                 ": index out of range");
    }
    UpdateRecord& rec = records[s];
    rec.s = s;
    rec.loss = loss;
    rec.grad_norm = norm;
    if (static_cast<std::int64_t>(rec.modules.size()) < k) {
      rec.modules.resize(static_cast<std::size_t>(k));
    }
    ModuleUpdate& m = rec.modules[static_cast<std::size_t>(k - 1)];
    if (static_cast<std::int64_t>(m.slots.size()) != j) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) +
                                 ": slots out of order");
    }
    m.tick = tick;
    m.slots.push_back({batch, version, batch < 0});
    m.staleness.push_back(d);
    K = std::max(K, k);
    M = std::max(M, j + 1);
  }
  RunTrace trace;
  trace.K = std::max<std::int64_t>(K, 1);
  trace.M = std::max<std::int64_t>(M, 1);
  std::int64_t expect = 0;
  for (auto& [s, rec] : records) {
    if (s != expect++) fail(ErrorKind::Parse, "missing update rows");
    if (static_cast<std::int64_t>(rec.modules.size()) != K) {
      fail(ErrorKind::Parse, "update " + std::to_string(s) +
                                 " is missing module rows");
    }
    for (const ModuleUpdate& m : rec.modules) {
      if (static_cast<std::int64_t>(m.slots.size()) != M) {
        fail(ErrorKind::Parse, "update " + std::to_string(s) +
                                   " has an incomplete slot group");
      }
    }
    trace.updates.push_back(std::move(rec));
  }
  return trace;
}

RunTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Parse, "cannot open " + path);
  return read_trace_csv(is);
}

void write_ticks_csv(std::ostream& os, const RunTrace& trace) {
  os << "tick,module,forward_batch,backward_batch,update\n";
  auto opt = [](const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  for (const TickEvent& e : trace.ticks) {
    os << e.tick << ',' << e.module << ',' << opt(e.forward_batch) << ','
       << opt(e.backward_batch) << ',' << opt(e.update) << '\n';
  }
}

std::optional<Rational> observed_averaged_los(const RunTrace& trace,
                                              std::int64_t k) {
  std::int64_t sum = 0;
  std::int64_t count = 0;
  for (const UpdateRecord& rec : trace.updates) {
    const ModuleUpdate& m = rec.modules.at(static_cast<std::size_t>(k - 1));
    if (std::any_of(m.slots.begin(), m.slots.end(),
                    [](const SlotRecord& r) { return r.batch_index < 0; })) {
      continue;
    }
    for (std::int64_t d : m.staleness) sum += d;
    count += static_cast<std::int64_t>(m.staleness.size());
  }
  if (count == 0) return std::nullopt;
  return Rational::make(sum, count);
}

}  // namespace adl
