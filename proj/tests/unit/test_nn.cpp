#include "doctest.h"
#include "oracles.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/nn/lstm.hpp"
#include "hydronmpc/nn/mlp.hpp"
#include "hydronmpc/nn/optim.hpp"

#include <cmath>
#include <cstring>

using namespace hnmpc;

namespace {

Vector random_vector(Eigen::Index n, Rng& rng, double bound = 1.0) {
  Vector v(n);
  fill_uniform(v, bound, rng);
  return v;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("mlp_forward: zero weights return the output bias") {
  Mlp net({3, 4, 2});
  net.mutable_layer(1).bias << 0.25, -1.5;
  Rng rng(1);
  for (int k = 0; k < 5; ++k) {
    const Vector y = net.forward(random_vector(3, rng, 10.0));
    CHECK(y(0) == 0.25);
    CHECK(y(1) == -1.5);
  }
}

TEST_CASE("mlp_forward: identity weights pass positive input through") {
  Mlp net({3, 3, 3});
  net.mutable_layer(0).weight = Matrix::Identity(3, 3);
  net.mutable_layer(1).weight = Matrix::Identity(3, 3);
  Vector x(3);
  x << 0.5, 2.0, 7.25;
  CHECK(net.forward(x) == x);
}

TEST_CASE("mlp_forward: matches scalar re-evaluation on seeded nets") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Mlp net = Mlp::glorot({5, 7, 6, 3}, rng);
    for (std::size_t i = 0; i < net.num_layers(); ++i) fill_uniform(net.mutable_layer(i).bias, 0.5, rng);
    const Vector x = random_vector(5, rng);
    const Vector y = net.forward(x);
    const auto expect = oracle::mlp(net, to_std(x));
    for (int r = 0; r < 3; ++r) CHECK(y(r) == doctest::Approx(expect[static_cast<std::size_t>(r)]).epsilon(1e-13));
    // Batched and single-sample paths agree.
    const MlpCache cache = net.forward(Matrix(x));
    CHECK((cache.output.col(0) - y).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("mlp_forward: deterministic and dimension-checked") {
  Rng rng(3);
  const Mlp net = Mlp::glorot({4, 8, 8, 2}, rng);
  const Vector x = random_vector(4, rng);
  const Vector a = net.forward(x);
  const Vector b = net.forward(x);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 2) == 0);
  CHECK_THROWS_AS(net.forward(Vector(Vector::Zero(5))), ConfigError);
}

TEST_CASE("mlp_backward: zero upstream gives zero gradients") {
  Rng rng(4);
  const Mlp net = Mlp::glorot({4, 6, 3}, rng);
  const MlpCache cache = net.forward(Matrix(random_vector(4, rng)));
  const MlpGradients g = net.backward(cache, Matrix::Zero(3, 1));
  CHECK(g.flatten().cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.input.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp_backward: linear net input gradient is the weight product") {
  Rng rng(5);
  const Mlp net = Mlp::glorot({4, 5, 6, 3}, rng, Activation::Identity);
  const MlpCache cache = net.forward(Matrix(random_vector(4, rng)));
  const Vector up = random_vector(3, rng);
  const MlpGradients g = net.backward(cache, Matrix(up));
  const Matrix product = net.layer(2).weight * net.layer(1).weight * net.layer(0).weight;
  CHECK(relative_error(g.input, product.transpose() * up) < 1e-13);
}

TEST_CASE("mlp_backward: stale cache is rejected") {
  Rng rng(6);
  Mlp net = Mlp::glorot({2, 3, 1}, rng);
  const MlpCache cache = net.forward(Matrix(random_vector(2, rng)));
  net.mutable_layer(0).bias(0) += 1.0;
  CHECK_THROWS_AS(net.backward(cache, Matrix::Ones(1, 1)), ContractError);
  const MlpCache fresh = net.forward(Matrix(random_vector(2, rng)));
  CHECK_THROWS_AS(net.backward(fresh, Matrix::Ones(2, 1)), ContractError);
}

TEST_CASE("mlp_backward: 100 seeded nets agree with central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    Mlp net = Mlp::glorot({6, 9, 7, 4}, rng);
    for (std::size_t i = 0; i < net.num_layers(); ++i) fill_uniform(net.mutable_layer(i).bias, 0.3, rng);
    const Vector x = random_vector(6, rng);
    const Vector r = random_vector(4, rng);  // loss = r . output
    const MlpGradients g = net.backward(net.forward(Matrix(x)), Matrix(r));

    const Vector p0 = net.parameters();
    Mlp probe = net;
    const Matrix num_p = finite_diff_jacobian(
        [&](const Vector& p) {
          probe.set_parameters(p);
          return Vector::Constant(1, r.dot(probe.forward(x)));
        },
        p0, 1e-6);
    const Matrix num_x = finite_diff_jacobian(
        [&](const Vector& xi) { return Vector::Constant(1, r.dot(net.forward(xi))); }, x, 1e-6);
    worst = std::max(worst, relative_error(g.flatten().transpose(), num_p));
    worst = std::max(worst, relative_error(g.input.transpose(), num_x));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("mlp input_jacobian matches backward rows") {
  Rng rng(7);
  const Mlp net = Mlp::glorot({5, 8, 8, 3}, rng);
  const Vector x = random_vector(5, rng);
  const Matrix jac = net.input_jacobian(x, 2, 3);
  const MlpCache cache = net.forward(Matrix(x));
  Matrix full(3, 5);
  for (int k = 0; k < 3; ++k) {
    full.row(k) = net.backward_input(cache, Matrix(Vector::Unit(3, k))).col(0).transpose();
  }
  CHECK(relative_error(jac, full.middleCols(2, 3)) < 1e-13);
}

TEST_CASE("lstm_forward: zero parameters keep the hidden state at zero") {
  const LstmLayer layer(3, 4);
  Rng rng(8);
  std::vector<Vector> seq{random_vector(3, rng), random_vector(3, rng), random_vector(3, rng)};
  CHECK(layer.forward(seq).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm_forward: matches gate-by-gate evaluation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(20 + seed);
    LstmLayer layer = LstmLayer::glorot(4, 5, rng);
    fill_uniform(layer.mutable_bias(), 0.5, rng);
    for (std::size_t len : {1u, 3u}) {
      std::vector<Vector> seq;
      std::vector<std::vector<double>> plain;
      for (std::size_t k = 0; k < len; ++k) {
        seq.push_back(random_vector(4, rng));
        plain.push_back(to_std(seq.back()));
      }
      const Vector h = layer.forward(seq);
      const auto expect = oracle::lstm(layer, plain);
      for (int i = 0; i < 5; ++i) CHECK(h(i) == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-13));
    }
  }
}

TEST_CASE("lstm_forward: repeated input changes the final hidden state") {
  Rng rng(9);
  const LstmLayer layer = LstmLayer::glorot(3, 4, rng);
  const Vector x = random_vector(3, rng);
  const Vector once = layer.forward(std::vector<Vector>{x});
  const Vector twice = layer.forward(std::vector<Vector>{x, x});
  CHECK((once - twice).norm() > 1e-6);
}

TEST_CASE("lstm_forward: gates stay in (0,1) and cells are finite") {
  Rng rng(10);
  LstmLayer layer = LstmLayer::glorot(5, 6, rng);
  layer.mutable_weight() *= 4.0;
  std::vector<Matrix> seq;
  for (int k = 0; k < 20; ++k) {
    Matrix x(5, 8);
    fill_uniform(x, 3.0, rng);
    seq.push_back(x);
  }
  const LstmCache cache = layer.forward(seq);
  for (const auto& s : cache.steps) {
    for (const Matrix* g : {&s.input_gate, &s.forget_gate, &s.output_gate}) {
      CHECK(g->minCoeff() > 0.0);
      CHECK(g->maxCoeff() < 1.0);
    }
    CHECK(s.cell.allFinite());
  }
}

TEST_CASE("lstm_forward: empty sequence is a contract violation") {
  const LstmLayer layer(2, 2);
  CHECK_THROWS_AS(layer.forward(std::vector<Matrix>{}), ContractError);
}

TEST_CASE("lstm_backward: zero upstream gives zero gradients") {
  Rng rng(11);
  const LstmLayer layer = LstmLayer::glorot(3, 4, rng);
  std::vector<Matrix> seq{Matrix(random_vector(3, rng)), Matrix(random_vector(3, rng))};
  const LstmGradients g = layer.backward(layer.forward(seq), Matrix::Zero(4, 1));
  CHECK(g.flatten().cwiseAbs().maxCoeff() == 0.0);
}

namespace {

double lstm_fd_error(std::uint64_t seed, std::size_t length) {
  Rng rng(seed);
  LstmLayer layer = LstmLayer::glorot(5, 6, rng);
  fill_uniform(layer.mutable_bias(), 0.5, rng);
  std::vector<Matrix> seq;
  for (std::size_t k = 0; k < length; ++k) seq.emplace_back(random_vector(5, rng));
  const Vector r = random_vector(6, rng);
  const LstmGradients g = layer.backward(layer.forward(seq), Matrix(r));
  LstmLayer probe = layer;
  const Matrix num = finite_diff_jacobian(
      [&](const Vector& p) {
        probe.set_parameters(p);
        return Vector::Constant(1, r.dot(probe.forward(seq).hidden.col(0)));
      },
      layer.parameters(), 1e-6);
  return relative_error(g.flatten().transpose(), num);
}

}  // namespace

TEST_CASE("lstm_backward: length-1 sequences agree with central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) worst = std::max(worst, lstm_fd_error(500 + seed, 1));
  CHECK(worst < 1e-5);
}

TEST_CASE("lstm_backward: length-10 sequences agree with central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) worst = std::max(worst, lstm_fd_error(700 + seed, 10));
  CHECK(worst < 1e-4);
}

TEST_CASE("lstm_backward: stale cache rejected") {
  Rng rng(12);
  LstmLayer layer = LstmLayer::glorot(2, 3, rng);
  const LstmCache cache = layer.forward(std::vector<Matrix>{Matrix(random_vector(2, rng))});
  layer.mutable_bias()(0) = 1.0;
  CHECK_THROWS_AS(layer.backward(cache, Matrix::Ones(3, 1)), ContractError);
}

TEST_CASE("adam_step: zero gradient leaves parameters unchanged") {
  Rng rng(13);
  AdamState state(4, 0.01);
  state.first_moment = random_vector(4, rng) * 0.0;
  Vector p = random_vector(4, rng);
  const Vector before = p;
  for (int k = 0; k < 3; ++k) adam_step(state, p, Vector::Zero(4));
  CHECK(p == before);
  CHECK(state.step_count == 3);
}

TEST_CASE("adam_step: first step moves each entry by lr*|g|/(|g|+eps)") {
  AdamState state(3, 0.05);
  Vector p = Vector::Zero(3);
  Vector g(3);
  g << 2.0, -0.5, 1e-3;
  adam_step(state, p, g);
  for (int i = 0; i < 3; ++i) {
    const double expect = 0.05 * std::abs(g(i)) / (std::abs(g(i)) + 1e-8);
    CHECK(std::abs(p(i)) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(p(i)) == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(p(i) * g(i) < 0.0);
  }
}

TEST_CASE("adam_step: two identical steps reproduce the moment recurrences") {
  AdamState state(2, 0.001);
  Vector p = Vector::Zero(2);
  Vector g(2);
  g << 0.3, -2.0;
  adam_step(state, p, g);
  adam_step(state, p, g);
  for (int i = 0; i < 2; ++i) {
    const double m = 0.9 * (0.1 * g(i)) + 0.1 * g(i);
    const double v = 0.999 * (0.001 * g(i) * g(i)) + 0.001 * g(i) * g(i);
    CHECK(state.first_moment(i) == doctest::Approx(m).epsilon(1e-14));
    CHECK(state.second_moment(i) == doctest::Approx(v).epsilon(1e-14));
  }
}

TEST_CASE("adam_step: non-finite gradient names the index") {
  AdamState state(3, 0.001);
  Vector p = Vector::Zero(3);
  Vector g = Vector::Zero(3);
  g(2) = std::nan("");
  try {
    adam_step(state, p, g);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
  CHECK(state.step_count == 0);
}

TEST_CASE("sgd_minibatch_step") {
  Vector p(2);
  p << 1.0, 2.0;
  Vector g(2);
  g << 1.0, -1.0;
  Vector q = p;
  sgd_minibatch_step(q, g, 0.0);
  CHECK(q == p);
  sgd_minibatch_step(q, Vector::Zero(2), 0.7);
  CHECK(q == p);
  sgd_minibatch_step(q, g, 0.5);
  CHECK(q(0) == 0.5);
  CHECK(q(1) == 2.5);
  g(0) = INFINITY;
  CHECK_THROWS_AS(sgd_minibatch_step(q, g, 0.5), TrainingError);
}

TEST_CASE("finite_diff_jacobian") {
  Vector x(3);
  x << 0.1, -0.4, 2.0;
  const Matrix id = finite_diff_jacobian([](const Vector& v) { return v; }, x, 1e-5);
  CHECK(relative_error(id, Matrix::Identity(3, 3)) < 1e-9);

  Matrix a(2, 3);
  a << 1.0, -2.0, 0.5, 3.0, 0.25, -1.0;
  const Matrix ja = finite_diff_jacobian([&](const Vector& v) { return Vector(a * v); }, x, 1e-3);
  CHECK((ja - a).cwiseAbs().maxCoeff() < 1e-8);

  const Matrix sq = finite_diff_jacobian([](const Vector& v) { return Vector(v.cwiseAbs2()); },
                                         Vector::Constant(1, 3.0), 1e-4);
  CHECK(std::abs(sq(0, 0) - 6.0) < 1e-6);
}
