#include "hydronmpc/plant/pid.hpp"

#include "hydronmpc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hnmpc {

InputVector pid_step(PidState& state, const PidGains& gains, const OutputVector& reference,
                     const OutputVector& measurement, double engine_speed, double dt) {
  InputVector u;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    const double e = reference(k) - measurement(k);
    const double de = state.primed ? (e - state.previous_error[j]) / dt : 0.0;
    state.integral[j] = std::clamp(state.integral[j] + e * dt, -gains.integral_limit, gains.integral_limit);
    state.previous_error[j] = e;
    double v = gains.kp[j] * e + gains.ki[j] * state.integral[j] + gains.kd[j] * de;
    if (v > 0.0) v += gains.dead_zone[j];
    if (v < 0.0) v -= gains.dead_zone[j];
    u(k) = std::clamp(v, gains.u_min, gains.u_max);
  }
  state.primed = true;
  u(kEngineChannel) = engine_speed;
  return u;
}

ClosedLoopTrace run_pid_scenario(const PlantParams& params, const PidGains& gains, const Scenario& scenario,
                                 std::size_t gear) {
  if (gear >= params.gear_speeds.size()) throw ConfigError("run_pid_scenario: gear index out of range");
  ClosedLoopTrace trace;
  PlantState s = initial_state(params, scenario.reference_at(0.0), gear, scenario.load_at(0.0));
  PidState pid;
  const std::size_t steps = scenario.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * kControlPeriod;
    const OutputVector r = scenario.reference_at(t);
    const InputVector u = pid_step(pid, gains, r, select_output(s.x), params.gear_speeds[gear]);
    StepResult next = plant_step(s, params, u, scenario.load_at(t));
    trace.time.push_back(t);
    trace.states.push_back(s.x);
    trace.inputs.push_back(u);
    trace.reference.push_back(r);
    trace.telemetry.push_back(next.telemetry);
    trace.gears.push_back(next.state.gear);
    s = std::move(next.state);
  }
  return trace;
}

double window_rms_error(const ClosedLoopTrace& trace, std::size_t joint, double t0, double t1) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < trace.time.size(); ++k) {
    if (trace.time[k] < t0 || trace.time[k] >= t1) continue;
    const auto j = static_cast<Eigen::Index>(joint);
    const double e = trace.reference[k](j) - trace.states[k](j);
    sum += e * e;
    ++n;
  }
  if (n == 0) throw ContractError("window_rms_error: empty window");
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace hnmpc
