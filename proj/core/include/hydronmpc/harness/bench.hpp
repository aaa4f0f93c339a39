#pragma once

#include "hydronmpc/nmpc/controller.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace hnmpc {

struct BenchPoint {
  std::size_t history = 20;
  std::size_t hidden = 128;  // j, also the head width
  std::size_t horizon = 10;
};

/// The 2 x 2 x 2 grid h {10, 20}, j {64, 128}, N {5, 10}.
std::vector<BenchPoint> default_bench_grid();

struct BenchRow {
  BenchPoint point;
  std::uint64_t flops = 0;
  std::size_t repetitions = 0;
  double predict_ms = 0.0;  // one hybrid prediction from a fresh window
  double update_ms = 0.0;   // one online update loop on a full batch
  double cycle_ms = 0.0;    // one controller cycle with k1 GD iterations and k2 loops
};

struct BenchSettings {
  std::size_t repetitions = 1000;
  std::size_t k1 = 30;
  std::size_t k2 = 1;
  std::uint64_t seed = 1;
};

/// Random-weight models at each grid point driven by a fixed synthetic
/// trajectory. Timings are wall clock; everything else is deterministic.
std::vector<BenchRow> timing_bench(const std::vector<BenchPoint>& grid, const BenchSettings& settings);

/// h, j, N, flops (deterministic).
void write_bench_grid_csv(std::ostream& out, const std::vector<BenchRow>& rows);
/// h, j, N, repetitions, predict_ms, update_ms, cycle_ms.
void write_bench_timing_csv(std::ostream& out, const std::vector<BenchRow>& rows);

/// Spearman rank correlation; ties get average ranks.
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hnmpc
