#include "hydronmpc/nmpc/optimizer.hpp"

#include "hydronmpc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hnmpc {

void ConstraintSpec::validate() const {
  for (std::size_t j = 0; j < 3; ++j) {
    if (!(u_min[j] < u_max[j])) throw ConfigError("ConstraintSpec: u_min must be below u_max");
  }
  if (!(gear_speeds[0] > 0.0 && gear_speeds[0] < gear_speeds[1] && gear_speeds[1] < gear_speeds[2])) {
    throw ConfigError("ConstraintSpec: gear speeds must be positive and increasing");
  }
  if (t_switch < 1.0) throw ConfigError("ConstraintSpec: t_switch must be at least 1 s");
  if (!(e > 0.0)) throw ConfigError("ConstraintSpec: e must be positive");
}

double adapt_learning_rate(double eta_u, double error, double e) {
  const double mag = std::abs(error);
  return mag >= e ? eta_u : eta_u * mag;
}

double position_error(const OutputVector& reference, const OutputVector& measured) {
  return (reference - measured).cwiseAbs().maxCoeff();
}

void clamp_inputs(InputSequence& u, const ConstraintSpec& c) {
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      u(i, k) = std::clamp(u(i, k), c.u_min[static_cast<std::size_t>(k)], c.u_max[static_cast<std::size_t>(k)]);
    }
    u(i, 3) = std::clamp(u(i, 3), c.omega_min(), c.omega_max());
  }
}

GdResult gd_optimize(const Predictor& predictor, const ReferenceWindow& ref, const CostWeights& w,
                     const ConstraintSpec& c, const GdSettings& s, const OutputVector& y_now, double eta) {
  GdResult r;
  const auto n = static_cast<Eigen::Index>(predictor.horizon());
  r.u = InputSequence::Zero(n, 4);
  if (!std::isnan(s.omega_start)) r.u.col(3).setConstant(s.omega_start);
  clamp_inputs(r.u, c);

  CostValue current = cost_and_gradient(w, ref, predictor, y_now, r.u);
  if (!std::isfinite(current.value) || !current.gradient.allFinite()) {
    r.failed = true;
    return r;
  }
  r.cost.push_back(current.value);
  Vector scale(4 * n);
  for (Eigen::Index i = 0; i < 4 * n; ++i) scale(i) = s.step_scale[static_cast<std::size_t>(i % 4)];

  double step = eta;
  for (std::size_t k = 0; k < s.iterations; ++k) {
    bool accepted = false;
    for (int attempt = 0; attempt < (s.backtrack ? 2 : 1) && !accepted; ++attempt) {
      const Vector flat = flatten_rows(r.u) - step * (scale.array() * current.gradient.array()).matrix();
      InputSequence candidate = unflatten_inputs(flat);
      clamp_inputs(candidate, c);
      CostValue next = cost_and_gradient(w, ref, predictor, y_now, candidate);
      if (!std::isfinite(next.value) || !next.gradient.allFinite()) {
        r.failed = true;
        return r;
      }
      if (!s.backtrack || next.value <= current.value) {
        r.u = std::move(candidate);
        current = std::move(next);
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) ++r.rejected;
    r.cost.push_back(current.value);
  }
  return r;
}

GearDecision project_gear(const Vector& omega, const std::array<double, 3>& gear_speeds, std::size_t current_gear,
                          double last_switch, double t_switch, double now) {
  if (omega.size() == 0) throw ContractError("project_gear: empty omega sequence");
  const double mean = omega.mean();
  std::size_t best = 0;
  for (std::size_t g = 1; g < gear_speeds.size(); ++g) {
    if (std::abs(mean - gear_speeds[g]) < std::abs(mean - gear_speeds[best])) best = g;
  }
  GearDecision d;
  d.gear = best;
  if (best != current_gear && now - last_switch < t_switch) {
    d.gear = current_gear;
    d.held_by_cooldown = true;
  }
  d.switched = d.gear != current_gear;
  d.omega = gear_speeds[d.gear];
  return d;
}

Extraction extraction_from_string(const std::string& s) {
  if (s == "mean") return Extraction::Mean;
  if (s == "first") return Extraction::First;
  throw ConfigError("unknown control extraction '" + s + "' (mean | first)");
}

InputVector extract_control(const InputSequence& u, Extraction mode, const ConstraintSpec& c,
                            const GearDecision& gear) {
  if (u.rows() == 0) throw ContractError("extract_control: empty sequence");
  InputVector out;
  if (mode == Extraction::Mean) {
    out = u.colwise().sum().transpose() / static_cast<double>(u.rows());
  } else {
    out = u.row(0).transpose();
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out(kk) = std::clamp(out(kk), c.u_min[k], c.u_max[k]);
  }
  out(3) = gear.omega;
  return out;
}

}  // namespace hnmpc
