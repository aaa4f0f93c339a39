#include "hydronmpc/ssmp/model.hpp"

#include "hydronmpc/errors.hpp"

#include <string>

namespace hnmpc {

std::vector<std::size_t> head_layer_sizes(const SsmpDims& dims) {
  std::vector<std::size_t> sizes{dims.head_input_size()};
  sizes.insert(sizes.end(), dims.head_hidden.begin(), dims.head_hidden.end());
  sizes.push_back(dims.head_output_size());
  return sizes;
}

namespace {

void validate_dims(const SsmpDims& dims, const Normalizer& n) {
  if (dims.history == 0 || dims.horizon == 0 || dims.lstm_hidden == 0) {
    throw ConfigError("SsmpModel: h, N and hidden size must be positive");
  }
  if (dims.head_hidden.empty()) throw ConfigError("SsmpModel: head needs at least one hidden layer");
  if (n.state.size() != 9 || n.input.size() != 4 ||
      n.output.size() != static_cast<Eigen::Index>(3 * dims.horizon)) {
    throw ConfigError("SsmpModel: normalizer dimensions do not match (9, 4, 3N)");
  }
  n.state.validate("state normalizer");
  n.input.validate("input normalizer");
  n.output.validate("output normalizer");
}

}  // namespace

SsmpModel::SsmpModel(const SsmpDims& dims, Normalizer normalizer, Rng& rng)
    : dims_(dims), normalizer_(std::move(normalizer)) {
  validate_dims(dims_, normalizer_);
  encoder_ = LstmLayer::glorot(kStateDim + kInputDim, dims_.lstm_hidden, rng);
  head_ = Mlp::glorot(head_layer_sizes(dims_), rng);
}

SsmpModel::SsmpModel(const SsmpDims& dims, Normalizer normalizer, LstmLayer encoder, Mlp head)
    : dims_(dims), normalizer_(std::move(normalizer)), encoder_(std::move(encoder)), head_(std::move(head)) {
  validate_dims(dims_, normalizer_);
  if (encoder_.input_size() != kStateDim + kInputDim || encoder_.hidden_size() != dims_.lstm_hidden) {
    throw ConfigError("SsmpModel: encoder shape does not match dims");
  }
  if (head_.sizes() != head_layer_sizes(dims_)) throw ConfigError("SsmpModel: head shape does not match dims");
}

void SsmpModel::set_normalizer(Normalizer n) {
  validate_dims(dims_, n);
  normalizer_ = std::move(n);
}

std::size_t SsmpModel::parameter_count() const {
  return encoder_.parameter_count() + head_.parameter_count();
}

Vector SsmpModel::parameters() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  const auto ne = static_cast<Eigen::Index>(encoder_.parameter_count());
  flat.head(ne) = encoder_.parameters();
  flat.tail(flat.size() - ne) = head_.parameters();
  return flat;
}

void SsmpModel::set_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ContractError("SsmpModel::set_parameters: size mismatch");
  }
  const auto ne = static_cast<Eigen::Index>(encoder_.parameter_count());
  encoder_.set_parameters(flat.head(ne));
  head_.set_parameters(flat.tail(flat.size() - ne));
}

void SsmpModel::check_shapes(const HistoryWindow& window, const InputSequence& future) const {
  if (window.states.size() != dims_.history || window.inputs.size() != dims_.history) {
    throw ConfigError("SsmpModel: window length " + std::to_string(window.states.size()) +
                      " does not match h = " + std::to_string(dims_.history));
  }
  if (static_cast<std::size_t>(future.rows()) != dims_.horizon) {
    throw ConfigError("SsmpModel: future input rows " + std::to_string(future.rows()) +
                      " do not match N = " + std::to_string(dims_.horizon));
  }
  bool finite = future.allFinite() && window.anchor_state.allFinite();
  for (std::size_t k = 0; k < window.states.size() && finite; ++k) {
    finite = window.states[k].allFinite() && window.inputs[k].allFinite();
  }
  if (!finite) throw PredictionError("SsmpModel: non-finite value in window or future inputs");
}

std::vector<Vector> SsmpModel::encoder_sequence(const HistoryWindow& window) const {
  std::vector<Vector> seq;
  seq.reserve(window.states.size());
  for (std::size_t k = 0; k < window.states.size(); ++k) {
    Vector x(13);
    x.head(9) = normalizer_.state.normalize(window.states[k]);
    x.tail(4) = normalizer_.input.normalize(window.inputs[k]);
    seq.push_back(std::move(x));
  }
  return seq;
}

Vector SsmpModel::encode(const HistoryWindow& window) const {
  if (window.states.size() != dims_.history || window.inputs.size() != dims_.history) {
    throw ConfigError("SsmpModel::encode: window length does not match h");
  }
  return encoder_.forward(encoder_sequence(window));
}

Vector SsmpModel::head_input(const Vector& feature, const InputSequence& future) const {
  const auto j = static_cast<Eigen::Index>(dims_.lstm_hidden);
  Vector in(static_cast<Eigen::Index>(dims_.head_input_size()));
  in.head(j) = feature;
  for (Eigen::Index i = 0; i < future.rows(); ++i) {
    in.segment(j + 4 * i, 4) = normalizer_.input.normalize(future.row(i).transpose());
  }
  return in;
}

OutputSequence SsmpModel::predict(const HistoryWindow& window, const InputSequence& future) const {
  check_shapes(window, future);
  return predict_from_feature(encode(window), window.anchor_output(), future);
}

OutputSequence SsmpModel::predict_from_feature(const Vector& feature, const OutputVector& anchor,
                                               const InputSequence& future) const {
  if (static_cast<std::size_t>(future.rows()) != dims_.horizon) {
    throw ConfigError("SsmpModel: future input rows do not match N");
  }
  const Vector z = head_.forward(head_input(feature, future));
  OutputSequence y = unflatten_outputs(normalizer_.output.denormalize(z));
  if (dims_.target == TargetMode::Delta) y.rowwise() += anchor.transpose();
  if (!y.allFinite()) throw PredictionError("SsmpModel: non-finite prediction");
  return y;
}

Matrix SsmpModel::predict_jacobian(const HistoryWindow& window, const InputSequence& future) const {
  check_shapes(window, future);
  return predict_jacobian_from_feature(encode(window), future);
}

Matrix SsmpModel::predict_jacobian_from_feature(const Vector& feature, const InputSequence& future) const {
  const std::size_t n_u = kInputDim * dims_.horizon;
  Matrix jac = head_.input_jacobian(head_input(feature, future), dims_.lstm_hidden, n_u);
  // Output denormalization scales rows, input normalization scales columns.
  const Vector out_scale = normalizer_.output.scale();
  const Vector in_scale = normalizer_.input.scale();
  for (Eigen::Index c = 0; c < jac.cols(); ++c) jac.col(c) /= in_scale(c % 4);
  jac = out_scale.asDiagonal() * jac;
  return jac;
}

Vector SsmpModel::predict_vjp_from_feature(const Vector& feature, const InputSequence& future,
                                           const Vector& upstream) const {
  const MlpCache cache = head_.forward(Matrix(head_input(feature, future)));
  const Vector scaled = (upstream.array() * normalizer_.output.scale().array()).matrix();
  const Matrix d_in = head_.backward_input(cache, Matrix(scaled));
  const auto j = static_cast<Eigen::Index>(dims_.lstm_hidden);
  Vector g = d_in.col(0).tail(d_in.rows() - j);
  const Vector in_scale = normalizer_.input.scale();
  for (Eigen::Index c = 0; c < g.size(); ++c) g(c) /= in_scale(c % 4);
  return g;
}

}  // namespace hnmpc
