#include "hydronmpc/nmpc/cost.hpp"

#include "hydronmpc/errors.hpp"

#include <cmath>

namespace hnmpc {

void CostWeights::validate() const {
  bool any = c > 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    if (a[j] < 0.0 || b[j] < 0.0) throw ConfigError("CostWeights: weights must be non-negative");
    any = any || a[j] > 0.0 || b[j] > 0.0;
  }
  if (c < 0.0) throw ConfigError("CostWeights: weights must be non-negative");
  if (!any) throw ConfigError("CostWeights: all weights are zero");
}

OutputSequence predicted_velocity(const OutputSequence& yhat, const OutputVector& y_now, double dt) {
  OutputSequence v(yhat.rows(), 3);
  for (Eigen::Index i = 0; i < yhat.rows(); ++i) {
    const Eigen::Matrix<double, 1, 3> prev = i == 0 ? Eigen::Matrix<double, 1, 3>(y_now.transpose()) : yhat.row(i - 1);
    v.row(i) = (yhat.row(i) - prev) / dt;
  }
  return v;
}

double cost_eval(const CostWeights& w, const ReferenceWindow& ref, const OutputSequence& yhat,
                 const OutputSequence& yhat_rate, const Vector& omega) {
  const Eigen::Index n = yhat.rows();
  if (ref.angle.rows() != n || ref.rate.rows() != n || yhat_rate.rows() != n || omega.size() != n) {
    throw ContractError("cost_eval: sequence lengths differ");
  }
  double j = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      const double e = ref.angle(i, k) - yhat(i, k);
      const double ed = ref.rate(i, k) - yhat_rate(i, k);
      j += w.a[static_cast<std::size_t>(k)] * e * e + w.b[static_cast<std::size_t>(k)] * ed * ed;
    }
    j += w.c * omega(i) * omega(i);
  }
  return j;
}

Vector cost_output_gradient(const CostWeights& w, const ReferenceWindow& ref, const OutputSequence& yhat,
                            const OutputVector& y_now, double dt) {
  const Eigen::Index n = yhat.rows();
  const OutputSequence v = predicted_velocity(yhat, y_now, dt);
  Vector g = Vector::Zero(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      g(3 * i + k) += -2.0 * w.a[kk] * (ref.angle(i, k) - yhat(i, k));
      // Rate i depends on rows i (+1/dt) and i-1 (-1/dt).
      const double dr = -2.0 * w.b[kk] * (ref.rate(i, k) - v(i, k)) / dt;
      g(3 * i + k) += dr;
      if (i > 0) g(3 * (i - 1) + k) -= dr;
    }
  }
  return g;
}

HybridPredictor::HybridPredictor(const SsmpModel& offline, const ResidualModel* online, const HistoryWindow& window)
    : offline_(offline), online_(online) {
  if (online_ && (online_->history() != offline_.history() || online_->horizon() != offline_.horizon())) {
    throw ConfigError("HybridPredictor: offline and online models disagree on h or N");
  }
  if (window.states.size() != offline_.history() || window.inputs.size() != offline_.history()) {
    throw ConfigError("HybridPredictor: window length does not match h");
  }
  feature_ = offline_.encode(window);
  anchor_ = window.anchor_output();
  if (online_) residual_history_ = online_->history_input(window);
}

OutputSequence HybridPredictor::predict_offline(const InputSequence& u) const {
  return offline_.predict_from_feature(feature_, anchor_, u);
}

OutputSequence HybridPredictor::predict(const InputSequence& u) const {
  OutputSequence y = predict_offline(u);
  if (online_) y += online_->predict_from_history(residual_history_, u);
  return y;
}

Vector HybridPredictor::vjp(const InputSequence& u, const Vector& upstream) const {
  Vector g = offline_.predict_vjp_from_feature(feature_, u, upstream);
  if (online_) g += online_->vjp_from_history(residual_history_, u, upstream);
  return g;
}

CostValue cost_and_gradient(const CostWeights& w, const ReferenceWindow& ref, const Predictor& predictor,
                            const OutputVector& y_now, const InputSequence& u, double dt) {
  const OutputSequence yhat = predictor.predict(u);
  const Vector omega = u.col(static_cast<Eigen::Index>(kEngineChannel));
  CostValue out;
  out.value = cost_eval(w, ref, yhat, predicted_velocity(yhat, y_now, dt), omega);
  out.gradient = predictor.vjp(u, cost_output_gradient(w, ref, yhat, y_now, dt));
  for (Eigen::Index i = 0; i < u.rows(); ++i) out.gradient(4 * i + 3) += 2.0 * w.c * omega(i);
  return out;
}

double cost_at(const CostWeights& w, const ReferenceWindow& ref, const Predictor& predictor,
               const OutputVector& y_now, const InputSequence& u, double dt) {
  const OutputSequence yhat = predictor.predict(u);
  return cost_eval(w, ref, yhat, predicted_velocity(yhat, y_now, dt), u.col(static_cast<Eigen::Index>(kEngineChannel)));
}

}  // namespace hnmpc
