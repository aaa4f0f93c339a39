#pragma once

#include "hydronmpc/nn/matrix.hpp"

#include <cstdint>
#include <functional>

namespace hnmpc {

/// Adam moments for one flat parameter vector.
struct AdamState {
  AdamState() = default;
  AdamState(std::size_t parameter_count, double learning_rate);

  Vector first_moment;
  Vector second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
};

/// Bias-corrected Adam update, p -= lr * m_hat / (sqrt(v_hat) + eps).
/// Throws TrainingError naming the first non-finite gradient entry; params
/// and state are untouched in that case.
void adam_step(AdamState& state, Vector& params, const Vector& gradients);

/// params -= learning_rate * averaged_gradient.
void sgd_minibatch_step(Vector& params, const Vector& averaged_gradient, double learning_rate);

/// Central-difference Jacobian; entry (i, j) = (f_i(x + d e_j) - f_i(x - d e_j)) / 2d.
Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& input,
                            double step);

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-12);

}  // namespace hnmpc
