#include "hydronmpc/nn/mlp.hpp"

#include "hydronmpc/errors.hpp"

#include <string>

namespace hnmpc {
namespace {

void activate(Matrix& m, Activation a) {
  if (a == Activation::Relu) m = m.cwiseMax(0.0);
}

// ReLU'(0) is taken as 0.
Matrix activation_derivative(const Matrix& pre, Activation a) {
  if (a == Activation::Identity) return Matrix::Ones(pre.rows(), pre.cols());
  return (pre.array() > 0.0).cast<double>().matrix();
}

}  // namespace

Vector MlpGradients::flatten() const {
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) total += weight[i].size() + bias[i].size();
  Vector flat(total);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const Matrix& w = weight[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      flat.segment(at, w.cols()) = w.row(r).transpose();
      at += w.cols();
    }
    flat.segment(at, bias[i].size()) = bias[i];
    at += bias[i].size();
  }
  return flat;
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, Activation hidden_activation)
    : hidden_activation_(hidden_activation) {
  if (sizes.size() < 2) throw ConfigError("Mlp needs at least input and output sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("Mlp layer size must be positive");
  }
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(sizes[i]);
    const auto out = static_cast<Eigen::Index>(sizes[i + 1]);
    layers_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
  }
}

Mlp Mlp::glorot(const std::vector<std::size_t>& sizes, Rng& rng, Activation hidden_activation) {
  Mlp net(sizes, hidden_activation);
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    fill_uniform(net.layers_[i].weight, glorot_bound(sizes[i], sizes[i + 1]), rng);
  }
  net.touch();
  return net;
}

Mlp Mlp::uniform(const std::vector<std::size_t>& sizes, double bound, Rng& rng,
                 Activation hidden_activation) {
  Mlp net(sizes, hidden_activation);
  for (auto& layer : net.layers_) fill_uniform(layer.weight, bound, rng);
  net.touch();
  return net;
}

std::size_t Mlp::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<std::size_t> Mlp::sizes() const {
  std::vector<std::size_t> out;
  if (layers_.empty()) return out;
  out.push_back(input_size());
  for (const auto& l : layers_) out.push_back(static_cast<std::size_t>(l.weight.rows()));
  return out;
}

DenseLayer& Mlp::mutable_layer(std::size_t i) {
  touch();
  return layers_.at(i);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Vector Mlp::parameters() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      flat.segment(at, l.weight.cols()) = l.weight.row(r).transpose();
      at += l.weight.cols();
    }
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ContractError("Mlp::set_parameters: expected " + std::to_string(parameter_count()) +
                        " values, got " + std::to_string(flat.size()));
  }
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      l.weight.row(r) = flat.segment(at, l.weight.cols()).transpose();
      at += l.weight.cols();
    }
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  }
  touch();
}

std::vector<bool> Mlp::bias_mask() const {
  std::vector<bool> mask;
  mask.reserve(parameter_count());
  for (const auto& l : layers_) {
    mask.insert(mask.end(), static_cast<std::size_t>(l.weight.size()), false);
    mask.insert(mask.end(), static_cast<std::size_t>(l.bias.size()), true);
  }
  return mask;
}

MlpCache Mlp::forward(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.rows()) != input_size()) {
    throw ConfigError("Mlp::forward: input dim " + std::to_string(batch.rows()) +
                      " does not match network input " + std::to_string(input_size()));
  }
  MlpCache cache;
  cache.version = version_;
  cache.inputs.reserve(layers_.size());
  cache.preactivations.reserve(layers_.size());
  Matrix current = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Matrix pre = l.weight * current;
    pre.colwise() += l.bias;
    cache.inputs.push_back(std::move(current));
    current = pre;
    if (i + 1 < layers_.size()) activate(current, hidden_activation_);
    cache.preactivations.push_back(std::move(pre));
  }
  cache.output = std::move(current);
  return cache;
}

Vector Mlp::forward(const Vector& input) const {
  if (static_cast<std::size_t>(input.size()) != input_size()) {
    throw ConfigError("Mlp::forward: input dim " + std::to_string(input.size()) +
                      " does not match network input " + std::to_string(input_size()));
  }
  Vector current = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Vector next = layers_[i].weight * current + layers_[i].bias;
    if (i + 1 < layers_.size() && hidden_activation_ == Activation::Relu) next = next.cwiseMax(0.0);
    current = std::move(next);
  }
  return current;
}

void Mlp::check_cache(const MlpCache& cache, const Matrix& upstream) const {
  if (cache.version != version_ || cache.inputs.size() != layers_.size()) {
    throw ContractError("Mlp::backward: cache does not belong to the current parameters");
  }
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols()) {
    throw ContractError("Mlp::backward: upstream gradient shape does not match cached output");
  }
}

MlpGradients Mlp::backward(const MlpCache& cache, const Matrix& upstream) const {
  check_cache(cache, upstream);
  MlpGradients grads;
  grads.weight.resize(layers_.size());
  grads.bias.resize(layers_.size());
  Matrix delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size()) {
      delta.array() *= activation_derivative(cache.preactivations[k], hidden_activation_).array();
    }
    grads.weight[k] = delta * cache.inputs[k].transpose();
    grads.bias[k] = delta.rowwise().sum();
    delta = layers_[k].weight.transpose() * delta;
  }
  grads.input = std::move(delta);
  return grads;
}

Matrix Mlp::backward_input(const MlpCache& cache, const Matrix& upstream) const {
  check_cache(cache, upstream);
  Matrix delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size()) {
      delta.array() *= activation_derivative(cache.preactivations[k], hidden_activation_).array();
    }
    delta = layers_[k].weight.transpose() * delta;
  }
  return delta;
}

Matrix Mlp::input_jacobian(const Vector& input, std::size_t first, std::size_t count) const {
  if (first + count > input_size()) throw ContractError("Mlp::input_jacobian: column range out of bounds");
  const MlpCache cache = forward(Matrix(input));
  Matrix jac = layers_.front().weight.middleCols(static_cast<Eigen::Index>(first),
                                                 static_cast<Eigen::Index>(count));
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    const Matrix d = activation_derivative(cache.preactivations[k - 1], hidden_activation_);
    jac = layers_[k].weight * (d.col(0).asDiagonal() * jac);
  }
  return jac;
}

}  // namespace hnmpc
