#pragma once

#include "hydronmpc/online/residual.hpp"
#include "hydronmpc/ssmp/model.hpp"

#include <array>

namespace hnmpc {

/// J = sum_i sum_j a_j (R_Y - Yhat)^2 + b_j (R_Yd - Yhat_d)^2 + c omega_i^2.
struct CostWeights {
  std::array<double, 3> a{1.0, 1.0, 1.0};
  std::array<double, 3> b{0.1, 0.1, 0.1};
  double c = 1e-7;

  void validate() const;
};

/// Reference over t+1..t+N: angles and rates, one row per step.
struct ReferenceWindow {
  OutputSequence angle;
  OutputSequence rate;
};

/// Yhat_d row i = (Yhat_i - Yhat_{i-1}) / dt with Yhat_{-1} = measured Y_t.
OutputSequence predicted_velocity(const OutputSequence& yhat, const OutputVector& y_now, double dt = kControlPeriod);

double cost_eval(const CostWeights& w, const ReferenceWindow& ref, const OutputSequence& yhat,
                 const OutputSequence& yhat_rate, const Vector& omega);

/// dJ / dYhat flattened row-major (3N), including the rate coupling between
/// adjacent rows.
Vector cost_output_gradient(const CostWeights& w, const ReferenceWindow& ref, const OutputSequence& yhat,
                            const OutputVector& y_now, double dt = kControlPeriod);

/// Prediction as a function of the future input sequence at a fixed window.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t horizon() const = 0;
  virtual OutputSequence predict(const InputSequence& u) const = 0;
  /// (d Yhat / d U)^T upstream, upstream over flattened Yhat (3N) -> 4N.
  virtual Vector vjp(const InputSequence& u, const Vector& upstream) const = 0;
};

/// Offline model plus optional residual model, with the window-dependent
/// parts (LSTM feature, residual history input) computed once.
class HybridPredictor : public Predictor {
 public:
  HybridPredictor(const SsmpModel& offline, const ResidualModel* online, const HistoryWindow& window);

  std::size_t horizon() const override { return offline_.horizon(); }
  OutputSequence predict(const InputSequence& u) const override;
  Vector vjp(const InputSequence& u, const Vector& upstream) const override;

  OutputSequence predict_offline(const InputSequence& u) const;
  const Vector& feature() const { return feature_; }
  const OutputVector& anchor() const { return anchor_; }

 private:
  const SsmpModel& offline_;
  const ResidualModel* online_;
  Vector feature_;
  OutputVector anchor_;
  Vector residual_history_;
};

struct CostValue {
  double value = 0.0;
  Vector gradient;  // dJ / dU flattened (4N)
};

/// J and its analytic gradient over U through the predictor.
CostValue cost_and_gradient(const CostWeights& w, const ReferenceWindow& ref, const Predictor& predictor,
                            const OutputVector& y_now, const InputSequence& u, double dt = kControlPeriod);
double cost_at(const CostWeights& w, const ReferenceWindow& ref, const Predictor& predictor,
               const OutputVector& y_now, const InputSequence& u, double dt = kControlPeriod);

}  // namespace hnmpc
