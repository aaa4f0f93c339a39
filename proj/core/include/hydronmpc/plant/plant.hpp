#pragma once

#include "hydronmpc/ssmp/types.hpp"

#include <array>
#include <deque>
#include <optional>
#include <string>

namespace hnmpc {

using JointArray = std::array<double, kJointCount>;

inline constexpr double kGravity = 9.81;

/// Three-joint positive-flow excavator surrogate. Flows in m^3/s, engine
/// speed in rad/s, load torque in N m.
struct PlantParams {
  JointArray inertia{2.0e4, 3.0e4, 1.0e4};     // kg m^2 at zero load
  JointArray damping{8.0e4, 2.0e5, 1.0e5};     // N m s / rad, sets the velocity lag
  JointArray dead_zone{0.10, 0.12, 0.10};      // valve units
  JointArray leakage{0.0, 4.0e-9, 6.5e-9};     // m^3/s of sag flow per N m of load torque
  JointArray gain{375.0, 150.0, 205.0};        // rad/s per m^3/s
  JointArray max_flow{1.6e-3, 2.4e-3, 2.2e-3}; // m^3/s at full valve opening
  JointArray load_lever{4.0, 5.0, 3.0};        // m, for load inertia and gravity torque
  JointArray gravity_arm{0.0, 1.0, 1.0};       // fraction of the load weight acting on the joint
  double priority_penalty = 4e-5;            // per N m; loaded joints lose flow share when starved
  double pump_displacement = 140e-6 / (2.0 * 3.14159265358979323846);  // L_pump, m^3/rad
  std::array<double, 3> gear_speeds{104.71975511965977, 157.07963267948966, 209.43951023931956};
  double valve_lag = 0.06;      // s
  std::size_t valve_delay = 2;  // control steps
  double engine_lag = 0.25;     // s
  JointArray q_min{-2.6, -0.9, -2.9};  // mechanical stops
  JointArray q_max{2.6, 1.2, -0.2};
  double valve_limit = 1.0;

  void validate() const;
  double supply_at(double engine_speed) const { return engine_speed * pump_displacement; }
  /// Nearest gear index; ties go to the lower gear.
  std::size_t nearest_gear(double omega) const;
};

struct PlantState {
  StateVector x = StateVector::Zero();
  std::size_t gear = 0;
  double last_switch_time = -1e9;
  double time = 0.0;
  double load_mass = 0.0;
  double engine_speed = 0.0;
  JointArray spool{0.0, 0.0, 0.0};
  std::deque<JointArray> pending;  // delayed valve commands, oldest first
};

struct PlantTelemetry {
  double supply = 0.0;
  double demand = 0.0;
  double overflow = 0.0;
  JointArray demanded{};
  JointArray allocated{};
  double engine_speed = 0.0;
};

struct StepResult {
  PlantState state;
  PlantTelemetry telemetry;
};

/// State at rest at `start` with the engine settled on `gear`.
PlantState initial_state(const PlantParams& params, const OutputVector& start, std::size_t gear,
                         double load_mass = 0.0);

/// Valve command after the dead zone, rescaled so the edge maps to 0 and
/// full opening to 1.
double dead_zone_output(double command, double half_width);

/// Demand-weighted water filling of `supply`: loaded joints get weight
/// d_i / (1 + penalty * tau_i), no joint gets more than it demands.
JointArray allocate_flow(const JointArray& demand, const JointArray& torque, double supply, double penalty);

/// Load torque on each joint from the attached mass.
JointArray load_torque(const PlantParams& params, double load_mass);

StepResult plant_step(const PlantState& state, const PlantParams& params, const InputVector& input,
                      double load_mass, double dt = kControlPeriod);

/// Axis-aligned joint box plus a band on the planar end-effector radius.
struct Workspace {
  JointArray q_min{-1.8, -0.5, -2.5};
  JointArray q_max{1.8, 0.9, -0.5};
  double radius_min = 3.0;
  double radius_max = 8.5;
  double base_offset = 0.5;  // boom foot from swing axis, m
  double boom_length = 5.7;
  double arm_length = 2.9;

  OutputVector center() const;
};

struct Cartesian {
  double radius = 0.0;  // horizontal distance from the swing axis
  double height = 0.0;
};

Cartesian forward_kinematics(const Workspace& ws, double q_boom, double q_arm);

struct SafetyViolation {
  enum class Kind { Joint, Cartesian } kind = Kind::Joint;
  std::size_t joint = 0;  // joint index for Kind::Joint
  double value = 0.0;     // offending angle or radius
  std::string describe() const;
};

std::optional<SafetyViolation> safety_check(const StateVector& x, const Workspace& ws);

}  // namespace hnmpc
