#include "hydronmpc/harness/bench.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/harness/metrics.hpp"
#include "hydronmpc/nmpc/cost.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace hnmpc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0, std::size_t reps) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / static_cast<double>(reps);
}

// Smooth multi-sine drive of a 9-dim state; only ranges matter here.
Episode synthetic_episode(std::size_t length) {
  Episode ep;
  for (std::size_t k = 0; k < length; ++k) {
    const double t = 0.02 * static_cast<double>(k);
    StateVector x;
    InputVector u;
    for (int j = 0; j < 3; ++j) {
      x(j) = 0.5 * std::sin(0.9 * t + j);
      x(3 + j) = 0.45 * std::cos(0.9 * t + j);
      x(6 + j) = -0.4 * std::sin(0.9 * t + j);
      u(j) = std::sin(1.3 * t + 2.0 * j);
    }
    u(3) = 157.0 + 50.0 * std::sin(0.3 * t);
    ep.states.push_back(x);
    ep.inputs.push_back(u);
  }
  return ep;
}

}  // namespace

std::vector<BenchPoint> default_bench_grid() {
  std::vector<BenchPoint> g;
  for (std::size_t h : {10u, 20u}) {
    for (std::size_t j : {64u, 128u}) {
      for (std::size_t n : {5u, 10u}) g.push_back({h, j, n});
    }
  }
  return g;
}

std::vector<BenchRow> timing_bench(const std::vector<BenchPoint>& grid, const BenchSettings& settings) {
  if (settings.repetitions == 0) throw ConfigError("timing_bench: repetitions must be positive");
  std::vector<BenchRow> rows;
  EpisodeStore store;
  store.episodes.push_back(synthetic_episode(600));
  const Episode& ep = store.episodes.front();
  for (const BenchPoint& p : grid) {
    SsmpDims dims;
    dims.history = p.history;
    dims.horizon = p.horizon;
    dims.lstm_hidden = p.hidden;
    dims.head_hidden = {p.hidden, p.hidden};
    Rng rng(settings.seed);
    SsmpModel model(dims, fit_normalizer(store, p.history, p.horizon), rng);
    NmpcConfig cfg;
    cfg.k1 = settings.k1;
    cfg.k2 = settings.k2;
    cfg.residual.loops = settings.k2;
    ResidualModel online(model, cfg.residual, settings.seed);

    BenchRow row;
    row.point = p;
    row.flops = flops_estimate(p.history, kStateDim, kInputDim, p.hidden, p.horizon);
    row.repetitions = settings.repetitions;
    const std::size_t first = p.history;
    const std::size_t span = ep.states.size() - p.history - p.horizon - 1;

    std::vector<HistoryWindow> windows;
    std::vector<InputSequence> futures;
    for (std::size_t k = 0; k < 64; ++k) {
      windows.push_back(window_at(ep, first + (k * 7) % span, p.history));
      futures.push_back(future_inputs_at(ep, first + (k * 7) % span, p.horizon));
    }

    // Untimed passes before every timed loop.
    const std::size_t warmup = std::max<std::size_t>(settings.repetitions / 5, 1);
    double sink = 0.0;
    for (std::size_t r = 0; r < warmup; ++r) {
      const std::size_t k = r % windows.size();
      sink += hybrid_predict(model, online, windows[k], futures[k])(0, 0);
    }
    auto t0 = Clock::now();
    for (std::size_t r = 0; r < settings.repetitions; ++r) {
      const std::size_t k = r % windows.size();
      sink += hybrid_predict(model, online, windows[k], futures[k])(0, 0);
    }
    row.predict_ms = ms_since(t0, settings.repetitions);

    MismatchBuffer buffer(cfg.residual.capacity);
    for (std::size_t k = 0; buffer.size() < cfg.residual.capacity; ++k) {
      const std::size_t t = first + k % span;
      const HistoryWindow w = window_at(ep, t, p.history);
      const InputSequence u = future_inputs_at(ep, t, p.horizon);
      buffer.push({w, u, model.predict(w, u), realized_outputs_at(ep, t, p.horizon)});
    }
    for (std::size_t r = 0; r < warmup; ++r) sink += online_update(online, buffer, 1).loss.back();
    t0 = Clock::now();
    for (std::size_t r = 0; r < settings.repetitions; ++r) sink += online_update(online, buffer, 1).loss.back();
    row.update_ms = ms_since(t0, settings.repetitions);

    NmpcController ctl(model, cfg, settings.seed);
    const std::size_t warm = p.history + 2 * p.horizon + cfg.residual.batch_size + warmup;
    ReferenceWindow ref{OutputSequence::Zero(static_cast<Eigen::Index>(p.horizon), 3),
                        OutputSequence::Zero(static_cast<Eigen::Index>(p.horizon), 3)};
    auto drive = [&](std::size_t k) {
      const StateVector& x = ep.states[k % ep.states.size()];
      ref.angle.rowwise() = select_output(x).transpose();
      ref.angle.array() += 0.1;
      return ctl.step(x, 0.02 * static_cast<double>(k), ref, select_output(x) + OutputVector::Constant(0.1));
    };
    for (std::size_t k = 0; k < warm; ++k) drive(k);
    t0 = Clock::now();
    for (std::size_t r = 0; r < settings.repetitions; ++r) sink += drive(warm + r).command(0);
    row.cycle_ms = ms_since(t0, settings.repetitions);
    if (!std::isfinite(sink)) throw PredictionError("timing_bench: non-finite result");
    rows.push_back(row);
  }
  return rows;
}

void write_bench_grid_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "h,j,N,flops\n";
  for (const BenchRow& r : rows) {
    out << r.point.history << ',' << r.point.hidden << ',' << r.point.horizon << ',' << r.flops << '\n';
  }
}

void write_bench_timing_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "h,j,N,repetitions,predict_ms,update_ms,cycle_ms\n" << std::setprecision(6);
  for (const BenchRow& r : rows) {
    out << r.point.history << ',' << r.point.hidden << ',' << r.point.horizon << ',' << r.repetitions << ','
        << r.predict_ms << ',' << r.update_ms << ',' << r.cycle_ms << '\n';
  }
}

double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ContractError("rank_correlation: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return (da == 0.0 || db == 0.0) ? 0.0 : num / std::sqrt(da * db);
}

}  // namespace hnmpc
