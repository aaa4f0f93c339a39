#include "hydronmpc/nn/lstm.hpp"

#include "hydronmpc/errors.hpp"

#include <string>

namespace hnmpc {
namespace {

Matrix logistic(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

Matrix tanh_of(const Matrix& x) { return x.array().tanh().matrix(); }

}  // namespace

Vector LstmGradients::flatten() const {
  Vector flat(weight.size() + bias.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < weight.rows(); ++r) {
    flat.segment(at, weight.cols()) = weight.row(r).transpose();
    at += weight.cols();
  }
  flat.segment(at, bias.size()) = bias;
  return flat;
}

LstmLayer::LstmLayer(std::size_t input_size, std::size_t hidden_size)
    : input_size_(input_size), hidden_size_(hidden_size) {
  if (input_size == 0 || hidden_size == 0) throw ConfigError("LstmLayer sizes must be positive");
  const auto j = static_cast<Eigen::Index>(hidden_size);
  weight_ = Matrix::Zero(4 * j, static_cast<Eigen::Index>(input_size) + j);
  bias_ = Vector::Zero(4 * j);
}

LstmLayer LstmLayer::glorot(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  LstmLayer layer(input_size, hidden_size);
  fill_uniform(layer.weight_, glorot_bound(input_size + hidden_size, hidden_size), rng);
  layer.touch();
  return layer;
}

Matrix& LstmLayer::mutable_weight() {
  touch();
  return weight_;
}

Vector& LstmLayer::mutable_bias() {
  touch();
  return bias_;
}

std::size_t LstmLayer::parameter_count() const {
  return static_cast<std::size_t>(weight_.size() + bias_.size());
}

Vector LstmLayer::parameters() const {
  Vector flat(weight_.size() + bias_.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < weight_.rows(); ++r) {
    flat.segment(at, weight_.cols()) = weight_.row(r).transpose();
    at += weight_.cols();
  }
  flat.segment(at, bias_.size()) = bias_;
  return flat;
}

void LstmLayer::set_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ContractError("LstmLayer::set_parameters: expected " + std::to_string(parameter_count()) +
                        " values, got " + std::to_string(flat.size()));
  }
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < weight_.rows(); ++r) {
    weight_.row(r) = flat.segment(at, weight_.cols()).transpose();
    at += weight_.cols();
  }
  bias_ = flat.segment(at, bias_.size());
  touch();
}

LstmCache LstmLayer::forward(const std::vector<Matrix>& sequence) const {
  if (sequence.empty()) throw ContractError("LstmLayer::forward: empty sequence");
  const auto j = static_cast<Eigen::Index>(hidden_size_);
  const auto in = static_cast<Eigen::Index>(input_size_);
  const Eigen::Index batch = sequence.front().cols();

  LstmCache cache;
  cache.version = version_;
  cache.steps.reserve(sequence.size());
  Matrix hidden = Matrix::Zero(j, batch);
  Matrix cell = Matrix::Zero(j, batch);
  for (const Matrix& x : sequence) {
    if (x.rows() != in || x.cols() != batch) {
      throw ContractError("LstmLayer::forward: sequence element has shape " +
                          std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                          ", expected " + std::to_string(in) + "x" + std::to_string(batch));
    }
    LstmStepCache step;
    step.concat.resize(in + j, batch);
    step.concat.topRows(in) = x;
    step.concat.bottomRows(j) = hidden;
    Matrix gates = weight_ * step.concat;
    gates.colwise() += bias_;
    step.input_gate = logistic(gates.middleRows(0, j));
    step.forget_gate = logistic(gates.middleRows(j, j));
    step.output_gate = logistic(gates.middleRows(2 * j, j));
    step.candidate = tanh_of(gates.middleRows(3 * j, j));
    step.cell_prev = cell;
    cell = (step.forget_gate.array() * cell.array() +
            step.input_gate.array() * step.candidate.array()).matrix();
    step.cell = cell;
    step.cell_tanh = tanh_of(cell);
    hidden = (step.output_gate.array() * step.cell_tanh.array()).matrix();
    cache.steps.push_back(std::move(step));
  }
  cache.hidden = std::move(hidden);
  return cache;
}

Vector LstmLayer::forward(const std::vector<Vector>& sequence) const {
  std::vector<Matrix> batch;
  batch.reserve(sequence.size());
  for (const auto& v : sequence) batch.emplace_back(v);
  return forward(batch).hidden.col(0);
}

LstmGradients LstmLayer::backward(const LstmCache& cache, const Matrix& upstream) const {
  if (cache.version != version_ || cache.steps.empty()) {
    throw ContractError("LstmLayer::backward: cache does not belong to the current parameters");
  }
  if (upstream.rows() != cache.hidden.rows() || upstream.cols() != cache.hidden.cols()) {
    throw ContractError("LstmLayer::backward: upstream gradient shape does not match final hidden");
  }
  const auto j = static_cast<Eigen::Index>(hidden_size_);
  const Eigen::Index batch = upstream.cols();

  LstmGradients grads;
  grads.weight = Matrix::Zero(weight_.rows(), weight_.cols());
  grads.bias = Vector::Zero(bias_.size());

  Matrix d_hidden = upstream;
  Matrix d_cell = Matrix::Zero(j, batch);
  Matrix d_gates(4 * j, batch);
  for (std::size_t k = cache.steps.size(); k-- > 0;) {
    const LstmStepCache& s = cache.steps[k];
    const auto i = s.input_gate.array();
    const auto f = s.forget_gate.array();
    const auto o = s.output_gate.array();
    const auto g = s.candidate.array();
    const auto tc = s.cell_tanh.array();

    d_cell.array() += d_hidden.array() * o * (1.0 - tc.square());
    d_gates.middleRows(0, j) = (d_cell.array() * g * i * (1.0 - i)).matrix();
    d_gates.middleRows(j, j) = (d_cell.array() * s.cell_prev.array() * f * (1.0 - f)).matrix();
    d_gates.middleRows(2 * j, j) = (d_hidden.array() * tc * o * (1.0 - o)).matrix();
    d_gates.middleRows(3 * j, j) = (d_cell.array() * i * (1.0 - g.square())).matrix();

    grads.weight.noalias() += d_gates * s.concat.transpose();
    grads.bias += d_gates.rowwise().sum();

    const Matrix d_concat = weight_.transpose() * d_gates;
    d_hidden = d_concat.bottomRows(j);
    d_cell = (d_cell.array() * f).matrix();
  }
  return grads;
}

}  // namespace hnmpc
