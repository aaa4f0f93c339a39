#pragma once

#include "hydronmpc/nn/matrix.hpp"

#include <cstdint>
#include <vector>

namespace hnmpc {

/// Per-timestep values kept for backpropagation through time.
struct LstmStepCache {
  Matrix concat;  // [x_t; h_{t-1}]
  Matrix input_gate, forget_gate, output_gate, candidate;
  Matrix cell_prev, cell, cell_tanh;
};

struct LstmCache {
  std::vector<LstmStepCache> steps;
  Matrix hidden;  // final hidden state, hidden_size x batch
  std::uint64_t version = 0;
};

struct LstmGradients {
  Matrix weight;  // same shape as LstmLayer::weight()
  Vector bias;

  Vector flatten() const;
};

/// Single LSTM layer. Gate rows are stacked [input, forget, output,
/// candidate] in one (4j x (input + j)) matrix; every window starts from a
/// zero hidden and cell state.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(std::size_t input_size, std::size_t hidden_size);

  static LstmLayer glorot(std::size_t input_size, std::size_t hidden_size, Rng& rng);

  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }

  const Matrix& weight() const { return weight_; }
  const Vector& bias() const { return bias_; }
  Matrix& mutable_weight();
  Vector& mutable_bias();
  std::uint64_t version() const { return version_; }

  std::size_t parameter_count() const;
  /// [W row-major, b].
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  /// Runs the whole sequence; each element is input_size x batch.
  LstmCache forward(const std::vector<Matrix>& sequence) const;
  /// Final hidden state for a single (unbatched) sequence.
  Vector forward(const std::vector<Vector>& sequence) const;

  /// BPTT from d loss / d final hidden. Gradients summed over the batch.
  LstmGradients backward(const LstmCache& cache, const Matrix& upstream) const;

 private:
  void touch() { version_ = next_parameter_version(); }

  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
  Matrix weight_;
  Vector bias_;
  std::uint64_t version_ = next_parameter_version();
};

}  // namespace hnmpc
