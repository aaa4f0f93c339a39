#pragma once

#include "hydronmpc/nmpc/cost.hpp"

#include <array>
#include <limits>
#include <vector>

namespace hnmpc {

struct ConstraintSpec {
  std::array<double, 3> u_min{-1.0, -1.0, -1.0};
  std::array<double, 3> u_max{1.0, 1.0, 1.0};
  std::array<double, 3> gear_speeds{104.71975511965977, 157.07963267948966, 209.43951023931956};
  double t_switch = 1.0;  // s
  double e = 0.05;        // rad, adaptive learning rate threshold

  void validate() const;
  double omega_min() const { return gear_speeds.front(); }
  double omega_max() const { return gear_speeds.back(); }
};

/// eta_U when the error reaches e, else eta_U * |error|.
double adapt_learning_rate(double eta_u, double error, double e);

/// max_j |R_Y - Y| at the current time.
double position_error(const OutputVector& reference, const OutputVector& measured);

struct GdSettings {
  std::size_t iterations = 30;  // k1
  /// Per-channel step scale; the step is -eta * scale .* dJ/dU. Squared
  /// normalizer ranges make this plain descent in normalized coordinates.
  std::array<double, 4> step_scale{1.0, 1.0, 1.0, 1.0};
  bool backtrack = true;
  /// Starting engine speed; NaN keeps the clamped zero (the lowest gear).
  double omega_start = std::numeric_limits<double>::quiet_NaN();
};

struct GdResult {
  InputSequence u;
  std::vector<double> cost;  // J at the start and after every iteration
  std::size_t rejected = 0;  // iterations that kept U unchanged
  bool failed = false;       // non-finite cost
};

/// Clamps valves to [u_min, u_max] and omega to the gear-speed range.
void clamp_inputs(InputSequence& u, const ConstraintSpec& c);

/// U starts at zero (then clamped; omega_start replaces the engine column
/// when set). Each iteration tries the current step,
/// then half of it, and keeps U when both raise J. A rejected try halves the
/// step for the rest of the cycle.
GdResult gd_optimize(const Predictor& predictor, const ReferenceWindow& ref, const CostWeights& w,
                     const ConstraintSpec& c, const GdSettings& s, const OutputVector& y_now, double eta);

struct GearDecision {
  std::size_t gear = 0;
  double omega = 0.0;
  bool switched = false;
  bool held_by_cooldown = false;
};

/// Snaps the mean of the relaxed omega sequence to the nearest gear (ties to
/// the lower one); within t_switch of the last switch the current gear stays.
GearDecision project_gear(const Vector& omega, const std::array<double, 3>& gear_speeds, std::size_t current_gear,
                          double last_switch, double t_switch, double now);

enum class Extraction { Mean, First };
Extraction extraction_from_string(const std::string& s);

/// Per-channel mean (or first row) of the valve channels, clamped, with the
/// engine channel replaced by the gear speed.
InputVector extract_control(const InputSequence& u, Extraction mode, const ConstraintSpec& c,
                            const GearDecision& gear);

}  // namespace hnmpc
