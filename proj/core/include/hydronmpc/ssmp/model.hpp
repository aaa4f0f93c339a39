#pragma once

#include "hydronmpc/nn/lstm.hpp"
#include "hydronmpc/nn/mlp.hpp"
#include "hydronmpc/ssmp/normalizer.hpp"

#include <vector>

namespace hnmpc {

struct SsmpDims {
  std::size_t history = 20;      // h
  std::size_t horizon = 10;      // N
  std::size_t lstm_hidden = 128;  // j
  std::vector<std::size_t> head_hidden{128, 128};
  TargetMode target = TargetMode::Delta;

  std::size_t head_input_size() const { return lstm_hidden + kInputDim * horizon; }
  std::size_t head_output_size() const { return kOutputDim * horizon; }
};

/// Offline single-shot multi-step predictor: an LSTM encoder F over the
/// normalized history and an MLP head G over [F, normalized future inputs]
/// producing all N joint-angle changes at once. In delta mode the anchor
/// Y_{t-1} is added back after denormalization.
class SsmpModel {
 public:
  SsmpModel() = default;
  SsmpModel(const SsmpDims& dims, Normalizer normalizer, Rng& rng);
  SsmpModel(const SsmpDims& dims, Normalizer normalizer, LstmLayer encoder, Mlp head);

  const SsmpDims& dims() const { return dims_; }
  std::size_t history() const { return dims_.history; }
  std::size_t horizon() const { return dims_.horizon; }
  const Normalizer& normalizer() const { return normalizer_; }
  void set_normalizer(Normalizer n);

  const LstmLayer& encoder() const { return encoder_; }
  const Mlp& head() const { return head_; }
  LstmLayer& mutable_encoder() { return encoder_; }
  Mlp& mutable_head() { return head_; }

  std::size_t parameter_count() const;
  /// [encoder params, head params].
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  /// Normalized [X; U] pairs of the history, one vector per LSTM step.
  std::vector<Vector> encoder_sequence(const HistoryWindow& window) const;
  /// LSTM hidden state F(X_t^h, U_{t-1}^h).
  Vector encode(const HistoryWindow& window) const;
  /// [feature; normalized future inputs flattened row-major].
  Vector head_input(const Vector& feature, const InputSequence& future) const;

  OutputSequence predict(const HistoryWindow& window, const InputSequence& future) const;
  /// Same as predict, reusing a feature from encode().
  OutputSequence predict_from_feature(const Vector& feature, const OutputVector& anchor,
                                      const InputSequence& future) const;

  /// d Yhat / d U_{t:t+N-1}: (3N x 4N), rows 3i+joint, columns 4k+channel.
  /// The encoder output does not depend on future inputs.
  Matrix predict_jacobian(const HistoryWindow& window, const InputSequence& future) const;
  Matrix predict_jacobian_from_feature(const Vector& feature, const InputSequence& future) const;

  /// Vector-Jacobian product: (d Yhat / d U)^T * upstream for an upstream
  /// over the flattened prediction (3N).
  Vector predict_vjp_from_feature(const Vector& feature, const InputSequence& future,
                                  const Vector& upstream) const;

  void check_shapes(const HistoryWindow& window, const InputSequence& future) const;

 private:
  SsmpDims dims_;
  Normalizer normalizer_;
  LstmLayer encoder_;
  Mlp head_;
};

std::vector<std::size_t> head_layer_sizes(const SsmpDims& dims);

}  // namespace hnmpc
