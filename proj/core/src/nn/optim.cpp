#include "hydronmpc/nn/optim.hpp"

#include "hydronmpc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hnmpc {
namespace {

void require_finite(const Vector& g, const char* who) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g(i))) {
      throw TrainingError(std::string(who) + ": non-finite gradient at index " + std::to_string(i));
    }
  }
}

}  // namespace

AdamState::AdamState(std::size_t parameter_count, double lr)
    : first_moment(Vector::Zero(static_cast<Eigen::Index>(parameter_count))),
      second_moment(Vector::Zero(static_cast<Eigen::Index>(parameter_count))),
      learning_rate(lr) {}

void adam_step(AdamState& state, Vector& params, const Vector& gradients) {
  if (params.size() != gradients.size() || state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: parameter, gradient and moment sizes differ");
  }
  require_finite(gradients, "adam_step");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradients;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * gradients.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

void sgd_minibatch_step(Vector& params, const Vector& averaged_gradient, double learning_rate) {
  if (params.size() != averaged_gradient.size()) {
    throw ContractError("sgd_minibatch_step: parameter and gradient sizes differ");
  }
  require_finite(averaged_gradient, "sgd_minibatch_step");
  params -= learning_rate * averaged_gradient;
}

Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& input,
                            double step) {
  if (!(step > 0.0)) throw ContractError("finite_diff_jacobian: step must be positive");
  Vector x = input;
  Matrix jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double saved = x(j);
    x(j) = saved + step;
    const Vector plus = fn(x);
    x(j) = saved - step;
    const Vector minus = fn(x);
    x(j) = saved;
    if (j == 0) jac.resize(plus.size(), x.size());
    jac.col(j) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

}  // namespace hnmpc
