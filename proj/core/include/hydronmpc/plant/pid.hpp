#pragma once

#include "hydronmpc/plant/plant.hpp"
#include "hydronmpc/plant/scenario.hpp"

#include <vector>

namespace hnmpc {

struct PidGains {
  JointArray kp{10.0, 20.0, 18.0};
  JointArray ki{0.5, 1.0, 1.0};
  JointArray kd{0.4, 0.4, 0.4};
  JointArray dead_zone{0.10, 0.12, 0.10};  // compensation added outside zero
  double integral_limit = 0.2;             // rad s, per joint
  double u_min = -1.0;
  double u_max = 1.0;
};

struct PidState {
  JointArray integral{};
  JointArray previous_error{};
  bool primed = false;
};

/// Per-joint PID with dead-zone compensation and a fixed engine speed.
InputVector pid_step(PidState& state, const PidGains& gains, const OutputVector& reference,
                     const OutputVector& measurement, double engine_speed, double dt = kControlPeriod);

/// Closed-loop record of a scenario run; entry k holds the state before
/// input k and the telemetry of the step it produced.
struct ClosedLoopTrace {
  std::vector<double> time;
  std::vector<StateVector> states;
  std::vector<InputVector> inputs;
  std::vector<OutputVector> reference;
  std::vector<PlantTelemetry> telemetry;
  std::vector<std::size_t> gears;
};

/// PID at a fixed gear over the whole scenario.
ClosedLoopTrace run_pid_scenario(const PlantParams& params, const PidGains& gains, const Scenario& scenario,
                                 std::size_t gear);

/// RMS of reference minus angle for one joint over samples with time in [t0, t1).
double window_rms_error(const ClosedLoopTrace& trace, std::size_t joint, double t0, double t1);

}  // namespace hnmpc
