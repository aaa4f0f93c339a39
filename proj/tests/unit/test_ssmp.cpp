#include "doctest.h"
#include "oracles.hpp"
#include "toy_plant.hpp"
#include "fixtures.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/nn/optim.hpp"
#include "hydronmpc/ssmp/checkpoint.hpp"
#include "hydronmpc/ssmp/dataset.hpp"
#include "hydronmpc/ssmp/model.hpp"
#include "hydronmpc/ssmp/train.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

using namespace hnmpc;
using fixture::small_model;
using fixture::temp_path;

namespace {

Episode constant_episode(std::size_t length, double value) {
  Episode ep;
  StateVector x = StateVector::Constant(value);
  InputVector u = InputVector::Constant(0.1);
  for (std::size_t k = 0; k < length; ++k) {
    ep.states.push_back(x);
    ep.inputs.push_back(u);
  }
  return ep;
}

bool same_bits(const OutputSequence& a, const OutputSequence& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("build_windows: constant episode gives zero targets") {
  EpisodeStore store;
  store.episodes.push_back(constant_episode(30, 0.7));
  const auto windows = build_windows(store, 4, 3);
  CHECK(windows.size() == 30 - 4 - 3);
  for (const auto& w : windows) CHECK(w.target.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_windows: h + N + 1 samples give exactly one window") {
  EpisodeStore store;
  store.episodes.push_back(constant_episode(5 + 3 + 1, 0.0));
  CHECK(build_windows(store, 5, 3).size() == 1);
  store.episodes.push_back(constant_episode(5 + 3, 0.0));
  std::size_t skipped = 0;
  CHECK(build_windows(store, 5, 3, &skipped).size() == 1);
  CHECK(skipped == 1);
}

TEST_CASE("build_windows: ramp targets") {
  Episode ep;
  for (int k = 0; k < 5; ++k) {
    StateVector x = StateVector::Zero();
    x.head<3>().setConstant(0.01 * k);
    ep.states.push_back(x);
    ep.inputs.push_back(InputVector::Zero());
  }
  EpisodeStore store;
  store.episodes.push_back(ep);
  const auto windows = build_windows(store, 2, 2);
  REQUIRE(windows.size() == 1);
  for (int j = 0; j < 3; ++j) {
    CHECK(windows[0].target(0, j) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(windows[0].target(1, j) == doctest::Approx(0.03).epsilon(1e-12));
  }
  // History pairs each state with the input that led into it.
  CHECK(windows[0].window.states.size() == 2);
  CHECK(windows[0].window.anchor_state(0) == doctest::Approx(0.01));
}

TEST_CASE("window targets re-anchor to the recorded angles") {
  const EpisodeStore store = toy::linear_store(3, 2, 80);
  const WindowIndex index = index_windows(store, 6, 4);
  for (const auto& r : index.refs) {
    const Episode& ep = store.episodes[r.episode];
    const OutputSequence d = target_at(ep, r.t, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double recorded = ep.states[r.t + 1 + static_cast<std::size_t>(i)](j);
        const double rebuilt = d(i, j) + ep.states[r.t - 1](j);
        CHECK(std::abs(rebuilt - recorded) <= 2.0 * std::numeric_limits<double>::epsilon() *
                                                   std::max(1.0, std::abs(recorded)));
      }
    }
  }
}

TEST_CASE("fit_normalizer: degenerate pad, endpoints, midpoint") {
  const MinMaxRange single = MinMaxRange::fit(Matrix::Constant(2, 1, 5.0));
  CHECK(single.min(0) == 5.0 - 1e-6);
  CHECK(single.max(0) == 5.0 + 1e-6);

  Matrix two(1, 2);
  two << 0.0, 10.0;
  const MinMaxRange r = MinMaxRange::fit(two);
  CHECK(r.normalize(Vector::Constant(1, 10.0))(0) == 1.0);
  CHECK(r.normalize(Vector::Constant(1, 0.0))(0) == 0.0);

  Matrix three(1, 3);
  three << 2.0, 4.0, 6.0;
  CHECK(MinMaxRange::fit(three).normalize(Vector::Constant(1, 4.0))(0) == 0.5);

  EpisodeStore empty;
  CHECK_THROWS_AS(fit_normalizer(empty, 2, 2), ConfigError);
}

TEST_CASE("normalizer round trip within 1e-12") {
  const EpisodeStore store = toy::linear_store(4, 3, 100);
  const Normalizer n = fit_normalizer(store, 5, 5);
  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    Vector x(9);
    fill_uniform(x, 3.0, rng);
    CHECK((n.state.denormalize(n.state.normalize(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
    Vector d(15);
    fill_uniform(d, 0.5, rng);
    CHECK((n.output.denormalize(n.output.normalize(d)) - d).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("output selector picks the joint angles") {
  const auto c = output_selector();
  for (int r = 0; r < 3; ++r) {
    int ones = 0;
    for (int k = 0; k < 9; ++k) {
      if (c(r, k) == 1.0) ++ones;
      else CHECK(c(r, k) == 0.0);
    }
    CHECK(ones == 1);
    CHECK(c(r, r) == 1.0);
  }
}

TEST_CASE("predict: zeroed output layer returns the anchor on every row") {
  const EpisodeStore store = toy::linear_store(5, 2, 60);
  SsmpModel model = small_model(store, 4, 3, 1);
  auto& last = model.mutable_head().mutable_layer(model.head().num_layers() - 1);
  last.weight.setZero();
  // z = 0 denormalizes to the output minimum; shift it to zero delta.
  Normalizer n = model.normalizer();
  n.output.max -= n.output.min;
  n.output.min.setZero();
  model.set_normalizer(n);
  last.bias.setZero();
  const auto ws = build_windows(store, 4, 3);
  const OutputSequence y = model.predict(ws[7].window, ws[7].future_inputs);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(y(i, j) == ws[7].window.anchor_output()(j));
  }
}

TEST_CASE("predict: rejects wrong shapes and non-finite inputs") {
  const EpisodeStore store = toy::linear_store(5, 2, 60);
  const SsmpModel model = small_model(store, 4, 3, 1);
  auto ws = build_windows(store, 4, 3);
  CHECK_THROWS_AS(model.predict(ws[0].window, InputSequence::Zero(2, 4)), ConfigError);
  ws[0].future_inputs(1, 2) = std::nan("");
  CHECK_THROWS_AS(model.predict(ws[0].window, ws[0].future_inputs), PredictionError);
}

TEST_CASE("predict: trained toy model equals manual composition") {
  const EpisodeStore store = toy::linear_store(6, 4, 120);
  SsmpModel model = small_model(store, 5, 4, 2);
  const WindowIndex idx = index_windows(store, 5, 4);
  OfflineTrainConfig cfg;
  cfg.iterations = 300;
  cfg.batch_size = 8;
  train_offline(model, store, idx.refs, cfg);

  const auto ws = build_windows(store, 5, 4);
  const Normalizer& n = model.normalizer();
  for (std::size_t s : {0u, 40u, 200u}) {
    const WindowSample& w = ws[s];
    std::vector<std::vector<double>> seq;
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<double> x;
      for (int i = 0; i < 9; ++i) x.push_back((w.window.states[k](i) - n.state.min(i)) / (n.state.max(i) - n.state.min(i)));
      for (int i = 0; i < 4; ++i) x.push_back((w.window.inputs[k](i) - n.input.min(i)) / (n.input.max(i) - n.input.min(i)));
      seq.push_back(x);
    }
    std::vector<double> head_in = oracle::lstm(model.encoder(), seq);
    for (int i = 0; i < 4; ++i) {
      for (int c = 0; c < 4; ++c) head_in.push_back((w.future_inputs(i, c) - n.input.min(c)) / (n.input.max(c) - n.input.min(c)));
    }
    const std::vector<double> z = oracle::mlp(model.head(), head_in);
    const OutputSequence y = model.predict(w.window, w.future_inputs);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) {
        const auto k = static_cast<Eigen::Index>(3 * i + j);
        const double expect = n.output.min(k) + z[static_cast<std::size_t>(k)] * (n.output.max(k) - n.output.min(k)) +
                              w.window.anchor_state(j);
        CHECK(y(i, j) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("predict_jacobian: zero head gives a zero Jacobian") {
  const EpisodeStore store = toy::linear_store(7, 2, 60);
  SsmpModel model = small_model(store, 4, 3, 3);
  model.mutable_head().mutable_layer(model.head().num_layers() - 1).weight.setZero();
  const auto ws = build_windows(store, 4, 3);
  const Matrix jac = model.predict_jacobian(ws[3].window, ws[3].future_inputs);
  CHECK(jac.rows() == 9);
  CHECK(jac.cols() == 12);
  CHECK(jac.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predict_jacobian: linear head equals scaled weight product") {
  const EpisodeStore store = toy::linear_store(8, 2, 60);
  SsmpDims dims;
  dims.history = 4;
  dims.horizon = 3;
  dims.lstm_hidden = 6;
  dims.head_hidden = {10, 7};
  const Normalizer n = fit_normalizer(store, 4, 3);
  Rng rng(4);
  const LstmLayer enc = LstmLayer::glorot(13, 6, rng);
  const Mlp head = Mlp::glorot(head_layer_sizes(dims), rng, Activation::Identity);
  const SsmpModel model(dims, n, enc, head);
  const auto ws = build_windows(store, 4, 3);
  const Matrix jac = model.predict_jacobian(ws[5].window, ws[5].future_inputs);
  const Matrix w_u = head.layer(0).weight.rightCols(12);
  Matrix expect = head.layer(2).weight * head.layer(1).weight * w_u;
  for (Eigen::Index r = 0; r < expect.rows(); ++r) {
    for (Eigen::Index c = 0; c < expect.cols(); ++c) {
      expect(r, c) *= (n.output.max(r) - n.output.min(r)) / (n.input.max(c % 4) - n.input.min(c % 4));
    }
  }
  CHECK(relative_error(jac, expect) < 1e-12);
}

TEST_CASE("predict_jacobian: 50 seeded triples agree with central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EpisodeStore store = toy::linear_store(100 + seed, 1, 40);
    SsmpModel model = small_model(store, 3 + seed % 4, 2 + seed % 3, 200 + seed);
    for (std::size_t i = 0; i < model.head().num_layers(); ++i) {
      Rng rng(seed);
      fill_uniform(model.mutable_head().mutable_layer(i).bias, 0.2, rng);
    }
    const auto ws = build_windows(store, model.history(), model.horizon());
    const WindowSample& w = ws[seed % ws.size()];
    const Matrix jac = model.predict_jacobian(w.window, w.future_inputs);
    const Matrix num = finite_diff_jacobian(
        [&](const Vector& u) { return flatten_rows(model.predict(w.window, unflatten_inputs(u))); },
        flatten_rows(w.future_inputs), 1e-6);
    worst = std::max(worst, relative_error(jac, num));
    if (relative_error(jac, num) > 1e-5) MESSAGE("seed " << seed << " err " << relative_error(jac, num));
    // VJP route agrees with the explicit Jacobian.
    Vector up(jac.rows());
    Rng rng(seed + 7);
    fill_uniform(up, 1.0, rng);
    const Vector vjp = model.predict_vjp_from_feature(model.encode(w.window), w.future_inputs, up);
    CHECK(relative_error(vjp, jac.transpose() * up) < 1e-12);
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("predict is translation anchored") {
  const EpisodeStore store = toy::linear_store(9, 2, 80);
  const SsmpModel model = small_model(store, 5, 4, 5);
  const auto ws = build_windows(store, 5, 4);
  for (double c : {0.25, -1.3, 2.0}) {
    Normalizer shifted = model.normalizer();
    for (int j = 0; j < 3; ++j) {
      shifted.state.min(j) += c;
      shifted.state.max(j) += c;
    }
    SsmpModel moved = model;
    moved.set_normalizer(shifted);
    for (std::size_t s : {0u, 30u, 90u}) {
      HistoryWindow w = ws[s].window;
      const OutputSequence base = model.predict(w, ws[s].future_inputs);
      for (auto& x : w.states) x.head<3>().array() += c;
      w.anchor_state.head<3>().array() += c;
      const OutputSequence y = moved.predict(w, ws[s].future_inputs);
      CHECK((y.array() - base.array() - c).abs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("train_offline: zero iterations leave the model unchanged") {
  const EpisodeStore store = toy::linear_store(10, 2, 60);
  SsmpModel model = small_model(store, 4, 3, 6);
  const Vector before = model.parameters();
  OfflineTrainConfig cfg;
  cfg.iterations = 0;
  const auto result = train_offline(model, store, index_windows(store, 4, 3).refs, cfg);
  CHECK(result.trace.empty());
  CHECK(model.parameters() == before);
}

TEST_CASE("train_offline: memorizes a single repeated window") {
  const EpisodeStore store = toy::linear_store(11, 1, 60);
  SsmpModel model = small_model(store, 4, 3, 7);
  const std::vector<WindowRef> one{index_windows(store, 4, 3).refs[10]};
  OfflineTrainConfig cfg;
  cfg.iterations = 5000;
  cfg.batch_size = 1;
  const auto result = train_offline(model, store, one, cfg);
  CHECK(evaluate_loss(model, store, one) < 1e-6);
  CHECK(result.trace.size() == 51);
}

TEST_CASE("train_offline: toy dataset validation loss falls below a tenth") {
  const EpisodeStore store = toy::linear_store(12, 10, 200);
  const auto [train, valid] = split_validation(store, 0.1);
  CHECK(valid.episodes.size() == 1);
  SsmpModel model = small_model(train, 5, 4, 8);
  const auto train_refs = index_windows(train, 5, 4).refs;
  const auto valid_refs = index_windows(valid, 5, 4).refs;
  const double initial = evaluate_loss(model, valid, valid_refs);
  OfflineTrainConfig cfg;
  cfg.iterations = 20000;
  cfg.batch_size = 16;
  train_offline(model, train, train_refs, cfg);
  const double final_loss = evaluate_loss(model, valid, valid_refs);
  MESSAGE("validation loss " << initial << " -> " << final_loss);
  CHECK(final_loss < 0.1 * initial);
}

TEST_CASE("train_offline: identical seeds give identical loss traces") {
  const EpisodeStore store = toy::linear_store(13, 3, 80);
  const auto refs = index_windows(store, 4, 3).refs;
  OfflineTrainConfig cfg;
  cfg.iterations = 400;
  cfg.batch_size = 8;
  cfg.seed = 42;
  SsmpModel a = small_model(store, 4, 3, 9);
  SsmpModel b = small_model(store, 4, 3, 9);
  const auto ra = train_offline(a, store, refs, cfg);
  const auto rb = train_offline(b, store, refs, cfg);
  REQUIRE(ra.trace.size() == rb.trace.size());
  for (std::size_t i = 0; i < ra.trace.size(); ++i) CHECK(ra.trace[i].loss == rb.trace[i].loss);
}

TEST_CASE("checkpoint: round trip gives bit-identical predictions") {
  const EpisodeStore store = toy::linear_store(14, 2, 60);
  const SsmpModel model = small_model(store, 4, 3, 10);
  const auto path = temp_path("roundtrip.ssmp");
  save_model(path, model);
  const SsmpModel back = load_model(path);
  const auto ws = build_windows(store, 4, 3);
  for (std::size_t s : {0u, 11u, 50u}) {
    CHECK(same_bits(model.predict(ws[s].window, ws[s].future_inputs), back.predict(ws[s].window, ws[s].future_inputs)));
  }
  CHECK(back.dims().head_hidden == model.dims().head_hidden);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: corrupt magic, inconsistent dims and truncation are format errors") {
  const EpisodeStore store = toy::linear_store(15, 2, 60);
  const SsmpModel model = small_model(store, 4, 3, 11);
  ByteWriter w;
  encode_ssmp(w, model);
  const auto path = temp_path("corrupt.ssmp");

  auto bytes = w.bytes();
  bytes[1] = 'X';
  write_file_bytes(path, bytes);
  CHECK_THROWS_AS(load_model(path), FormatError);

  bytes = w.bytes();
  bytes[9] = static_cast<std::uint8_t>(bytes[9] + 1);  // horizon field
  write_file_bytes(path, bytes);
  CHECK_THROWS_AS(load_model(path), FormatError);

  bytes = w.bytes();
  bytes.resize(bytes.size() - 8);
  write_file_bytes(path, bytes);
  CHECK_THROWS_AS(load_model(path), FormatError);

  bytes = w.bytes();
  bytes.push_back(0x42);
  write_file_bytes(path, bytes);
  CHECK_THROWS_AS(load_model(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("dataset directory round trip") {
  EpisodeStore store = toy::linear_store(16, 2, 30);
  store.episodes[1].meta.mode = CollectionMode::ClosedLoop;
  store.episodes[1].meta.seed = 77;
  const auto dir = temp_path("dataset");
  std::filesystem::remove_all(dir);
  write_dataset(dir, store);
  const EpisodeStore back = read_dataset(dir);
  REQUIRE(back.episodes.size() == 2);
  CHECK(back.episodes[1].meta.mode == CollectionMode::ClosedLoop);
  CHECK(back.episodes[1].meta.seed == 77);
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t k = 0; k < 30; ++k) {
      CHECK(back.episodes[e].states[k] == store.episodes[e].states[k]);
      CHECK(back.episodes[e].inputs[k] == store.episodes[e].inputs[k]);
    }
  }
  std::filesystem::remove_all(dir);
}
