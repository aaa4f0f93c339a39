#pragma once

#include "hydronmpc/nn/matrix.hpp"

#include <cstdint>
#include <vector>

namespace hnmpc {

enum class Activation { Relu, Identity };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

class Mlp;

/// Per-layer values recorded by Mlp::forward. Columns are batch samples.
struct MlpCache {
  std::vector<Matrix> inputs;          // input to layer i (post-activation of i-1)
  std::vector<Matrix> preactivations;  // W_i * inputs[i] + b_i
  Matrix output;
  std::uint64_t version = 0;
};

struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;  // d loss / d input, same shape as the forward batch

  /// Same layout as Mlp::parameters().
  Vector flatten() const;
};

/// Fully connected network: hidden layers use `hidden_activation`, the
/// output layer is always linear. Zero-initialized unless built through
/// one of the factory functions.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& sizes, Activation hidden_activation = Activation::Relu);

  static Mlp glorot(const std::vector<std::size_t>& sizes, Rng& rng,
                    Activation hidden_activation = Activation::Relu);
  /// Weights U(-bound, bound), biases zero.
  static Mlp uniform(const std::vector<std::size_t>& sizes, double bound, Rng& rng,
                     Activation hidden_activation = Activation::Relu);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::vector<std::size_t> sizes() const;
  Activation hidden_activation() const { return hidden_activation_; }

  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access invalidates outstanding caches.
  DenseLayer& mutable_layer(std::size_t i);

  std::uint64_t version() const { return version_; }

  std::size_t parameter_count() const;
  /// Flattened as [W_0 row-major, b_0, W_1 row-major, b_1, ...].
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  /// Boolean mask over parameters(): true for bias entries.
  std::vector<bool> bias_mask() const;

  /// Batched forward pass, one sample per column.
  MlpCache forward(const Matrix& batch) const;
  Vector forward(const Vector& input) const;

  /// Backpropagates `upstream` (d loss / d output, same shape as the cached
  /// output). Gradients are summed over the batch.
  MlpGradients backward(const MlpCache& cache, const Matrix& upstream) const;
  /// Input gradient only; skips the parameter gradient products.
  Matrix backward_input(const MlpCache& cache, const Matrix& upstream) const;

  /// d output / d input restricted to input columns [first, first + count)
  /// at a single point, via forward-mode products.
  Matrix input_jacobian(const Vector& input, std::size_t first, std::size_t count) const;

 private:
  void check_cache(const MlpCache& cache, const Matrix& upstream) const;
  void touch() { version_ = next_parameter_version(); }

  std::vector<DenseLayer> layers_;
  Activation hidden_activation_ = Activation::Relu;
  std::uint64_t version_ = next_parameter_version();
};

}  // namespace hnmpc
