#include "hydronmpc/nmpc/controller.hpp"
#include "hydronmpc/online/residual.hpp"
#include "hydronmpc/ssmp/dataset.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace hnmpc;

namespace {

Episode drive_episode(std::size_t length) {
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

struct Fixture {
  EpisodeStore store;
  SsmpModel model;
  NmpcConfig cfg;

  explicit Fixture(const benchmark::State& state) {
    store.episodes.push_back(drive_episode(600));
    SsmpDims dims;
    dims.history = static_cast<std::size_t>(state.range(0));
    dims.lstm_hidden = static_cast<std::size_t>(state.range(1));
    dims.horizon = static_cast<std::size_t>(state.range(2));
    dims.head_hidden = {dims.lstm_hidden, dims.lstm_hidden};
    Rng rng(1);
    model = SsmpModel(dims, fit_normalizer(store, dims.history, dims.horizon), rng);
    cfg.k2 = 1;
    cfg.residual.loops = 1;
  }
  const Episode& ep() const { return store.episodes.front(); }
};

void grid(benchmark::internal::Benchmark* b) {
  b->ArgNames({"h", "j", "N"});
  for (int h : {10, 20})
    for (int j : {64, 128})
      for (int n : {5, 10}) b->Args({h, j, n});
  b->Unit(benchmark::kMillisecond);
}

void BM_HybridPredict(benchmark::State& state) {
  Fixture f(state);
  ResidualModel online(f.model, f.cfg.residual, 1);
  const std::size_t t = f.model.history() + 50;
  const HistoryWindow w = window_at(f.ep(), t, f.model.history());
  const InputSequence u = future_inputs_at(f.ep(), t, f.model.horizon());
  for (auto _ : state) benchmark::DoNotOptimize(hybrid_predict(f.model, online, w, u));
}
BENCHMARK(BM_HybridPredict)->Apply(grid);

void BM_OnlineUpdate(benchmark::State& state) {
  Fixture f(state);
  ResidualModel online(f.model, f.cfg.residual, 1);
  MismatchBuffer buffer(f.cfg.residual.capacity);
  const std::size_t h = f.model.history(), n = f.model.horizon();
  for (std::size_t k = 0; buffer.size() < f.cfg.residual.capacity; ++k) {
    const std::size_t t = h + k % 400;
    const HistoryWindow w = window_at(f.ep(), t, h);
    const InputSequence u = future_inputs_at(f.ep(), t, n);
    buffer.push({w, u, f.model.predict(w, u), realized_outputs_at(f.ep(), t, n)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(online_update(online, buffer, 1));
}
BENCHMARK(BM_OnlineUpdate)->Apply(grid);

void BM_NmpcCycle(benchmark::State& state) {
  Fixture f(state);
  NmpcController ctl(f.model, f.cfg, 1);
  const auto n = static_cast<Eigen::Index>(f.model.horizon());
  ReferenceWindow ref{OutputSequence::Zero(n, 3), OutputSequence::Zero(n, 3)};
  std::size_t k = 0;
  auto step = [&] {
    const StateVector& x = f.ep().states[k % f.ep().states.size()];
    ref.angle.rowwise() = select_output(x).transpose();
    ref.angle.array() += 0.1;
    const CycleOutput out = ctl.step(x, 0.02 * static_cast<double>(k), ref, select_output(x));
    ++k;
    return out;
  };
  while (k < f.model.history() + f.model.horizon() + 1) step();
  for (auto _ : state) benchmark::DoNotOptimize(step());
}
BENCHMARK(BM_NmpcCycle)->Apply(grid);

}  // namespace

BENCHMARK_MAIN();
