// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spada/machine.hpp"

namespace spada {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Distribution-free 95% confidence interval for the median from order
/// statistics (normal approximation to the binomial ranks).
struct MedianCI {
  double median = 0, lo = 0, hi = 0;
};

inline MedianCI median_ci95(std::vector<double> v) {
  MedianCI out;
  if (v.empty()) return out;
  std::sort(v.begin(), v.end());
  double n = (double)v.size();
  out.median = median_of(v);
  long j = (long)std::floor((n - 1.96 * std::sqrt(n)) / 2.0) - 1;
  long k = (long)std::ceil((n + 1.96 * std::sqrt(n)) / 2.0);
  j = std::max<long>(j, 0);
  k = std::min<long>(k, (long)v.size() - 1);
  out.lo = v[(std::size_t)j];
  out.hi = v[(std::size_t)k];
  return out;
}

struct LinFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinFit linear_fit(const std::vector<double>& x,
                         const std::vector<double>& y) {
  LinFit f;
  std::size_t n = x.size();
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0) return f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_tot = 0, ss_res = 0, mean = sy / n;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = f.slope * x[i] + f.intercept;
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  f.r2 = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

struct BenchResult {
  MedianCI cycles;          // pooled per-PE cycles over all repetitions
  double makespan_median = 0;
  std::size_t repetitions = 0;
  std::vector<Fault> faults;
  bool ok = true;
  /// Derived column only: the cycles-to-microseconds convention.
  double runtime_us() const { return (cycles.median / 0.85) * 1e-3; }
};

/// Runs `reps` simulations under varied scheduler seeds and reports the
/// median of all per-PE cycle counters with a nonparametric 95% CI.
inline BenchResult bench(Machine& m, int reps, uint64_t base_seed = 1,
                         uint64_t max_cycles = 2'000'000) {
  BenchResult out;
  std::vector<double> pooled;
  std::vector<double> makespans;
  for (int r = 0; r < reps; ++r) {
    SimReport rep = m.run(base_seed + (uint64_t)r, max_cycles);
    if (!rep.faults.empty()) {
      out.faults = rep.faults;
      out.ok = false;
      return out;
    }
    for (const auto& [p, c] : rep.pe_cycles) pooled.push_back((double)c);
    makespans.push_back((double)rep.total_cycles);
    ++out.repetitions;
  }
  out.cycles = median_ci95(std::move(pooled));
  out.makespan_median = median_of(std::move(makespans));
  return out;
}

}  // namespace spada
