#include "hydronmpc/plant/plant.hpp"

#include "hydronmpc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hnmpc {

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

void PlantParams::validate() const {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (!(inertia[j] > 0.0 && damping[j] > 0.0 && gain[j] > 0.0 && max_flow[j] > 0.0)) {
      throw ConfigError("PlantParams: inertia, damping, gain and max_flow must be positive");
    }
    if (!(dead_zone[j] >= 0.0 && dead_zone[j] < valve_limit)) {
      throw ConfigError("PlantParams: dead zone must lie inside the valve range");
    }
    if (leakage[j] < 0.0 || load_lever[j] < 0.0) throw ConfigError("PlantParams: negative leakage or lever");
    if (!(q_min[j] < q_max[j])) throw ConfigError("PlantParams: empty joint range");
  }
  if (!(pump_displacement > 0.0) || !(valve_lag > 0.0) || !(engine_lag > 0.0)) {
    throw ConfigError("PlantParams: pump displacement and lags must be positive");
  }
  if (!(gear_speeds[0] > 0.0 && gear_speeds[0] < gear_speeds[1] && gear_speeds[1] < gear_speeds[2])) {
    throw ConfigError("PlantParams: gear speeds must be positive and increasing");
  }
}

std::size_t PlantParams::nearest_gear(double omega) const {
  std::size_t best = 0;
  for (std::size_t g = 1; g < gear_speeds.size(); ++g) {
    if (std::abs(omega - gear_speeds[g]) < std::abs(omega - gear_speeds[best])) best = g;
  }
  return best;
}

PlantState initial_state(const PlantParams& params, const OutputVector& start, std::size_t gear, double load_mass) {
  if (gear >= params.gear_speeds.size()) throw ConfigError("initial_state: gear index out of range");
  PlantState s;
  s.x.head<3>() = start;
  s.gear = gear;
  s.engine_speed = params.gear_speeds[gear];
  s.load_mass = load_mass;
  s.pending.assign(params.valve_delay, JointArray{0.0, 0.0, 0.0});
  return s;
}

double dead_zone_output(double command, double half_width) {
  const double mag = std::abs(command);
  if (mag <= half_width) return 0.0;
  return sign(command) * std::min(1.0, (mag - half_width) / (1.0 - half_width));
}

JointArray allocate_flow(const JointArray& demand, const JointArray& torque, double supply, double penalty) {
  const double total = demand[0] + demand[1] + demand[2];
  if (total <= supply) return demand;
  JointArray weight{};
  for (std::size_t j = 0; j < kJointCount; ++j) weight[j] = demand[j] / (1.0 + penalty * std::abs(torque[j]));
  // Water filling on a_j = min(d_j, lambda w_j): saturate joints one by one.
  JointArray alloc{};
  std::array<bool, kJointCount> capped{false, false, false};
  double remaining = supply;
  for (std::size_t pass = 0; pass < kJointCount; ++pass) {
    double wsum = 0.0;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (!capped[j]) wsum += weight[j];
    }
    if (wsum <= 0.0) break;
    const double lambda = remaining / wsum;
    bool any = false;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (!capped[j] && lambda * weight[j] >= demand[j]) {
        capped[j] = true;
        alloc[j] = demand[j];
        remaining -= demand[j];
        any = true;
      }
    }
    if (!any) {
      for (std::size_t j = 0; j < kJointCount; ++j) {
        if (!capped[j]) alloc[j] = lambda * weight[j];
      }
      break;
    }
  }
  return alloc;
}

JointArray load_torque(const PlantParams& params, double load_mass) {
  JointArray tau{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    tau[j] = load_mass * kGravity * params.load_lever[j] * params.gravity_arm[j];
  }
  return tau;
}

StepResult plant_step(const PlantState& state, const PlantParams& params, const InputVector& input,
                      double load_mass, double dt) {
  if (!input.allFinite()) throw SimulationError("plant_step: non-finite input");
  if (!(dt > 0.0)) throw SimulationError("plant_step: non-positive time step");
  StepResult out{state, {}};
  PlantState& s = out.state;
  PlantTelemetry& tel = out.telemetry;

  // Gear and engine speed.
  const std::size_t gear = params.nearest_gear(input(kEngineChannel));
  if (gear != s.gear) {
    s.gear = gear;
    s.last_switch_time = s.time;
  }
  const double target_speed = params.gear_speeds[gear];
  s.engine_speed = (s.engine_speed + dt / params.engine_lag * target_speed) / (1.0 + dt / params.engine_lag);
  s.load_mass = load_mass;

  // Transport delay then first-order spool lag.
  JointArray command{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    command[j] = std::clamp(input(static_cast<Eigen::Index>(j)), -params.valve_limit, params.valve_limit);
  }
  JointArray applied = command;
  if (params.valve_delay > 0) {
    applied = s.pending.front();
    s.pending.pop_front();
    s.pending.push_back(command);
  }
  const double a_v = dt / params.valve_lag;
  for (std::size_t j = 0; j < kJointCount; ++j) s.spool[j] = (s.spool[j] + a_v * applied[j]) / (1.0 + a_v);

  // Flow demand, supply and allocation.
  JointArray opening{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    opening[j] = dead_zone_output(s.spool[j], params.dead_zone[j]);
    tel.demanded[j] = std::abs(opening[j]) * params.max_flow[j];
  }
  tel.demand = tel.demanded[0] + tel.demanded[1] + tel.demanded[2];
  tel.engine_speed = s.engine_speed;
  tel.supply = params.supply_at(s.engine_speed);
  const JointArray tau = load_torque(params, load_mass);
  tel.allocated = allocate_flow(tel.demanded, tau, tel.supply, params.priority_penalty);
  // Starved allocations sum to the supply up to rounding; keep overflow >= 0.
  tel.overflow = std::max(0.0, tel.supply - ((tel.allocated[0] + tel.allocated[1]) + tel.allocated[2]));

  // Joint velocity lag toward the flow-driven target, semi-implicit.
  StateVector& x = s.x;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const double sag = params.leakage[j] * tau[j];
    const double target = params.gain[j] * (sign(opening[j]) * tel.allocated[j] - sag);
    const double lag = (params.inertia[j] + load_mass * params.load_lever[j] * params.load_lever[j]) / params.damping[j];
    const double a = dt / lag;
    const double v_old = x(static_cast<Eigen::Index>(velocity_index(j)));
    double v = (v_old + a * target) / (1.0 + a);
    double q = x(static_cast<Eigen::Index>(angle_index(j))) + dt * v;
    if (q < params.q_min[j] || q > params.q_max[j]) {
      q = std::clamp(q, params.q_min[j], params.q_max[j]);
      v = 0.0;
    }
    x(static_cast<Eigen::Index>(angle_index(j))) = q;
    x(static_cast<Eigen::Index>(velocity_index(j))) = v;
    x(static_cast<Eigen::Index>(acceleration_index(j))) = (v - v_old) / dt;
  }
  s.time = state.time + dt;
  if (!s.x.allFinite()) throw SimulationError("plant_step: non-finite state");
  return out;
}

OutputVector Workspace::center() const {
  OutputVector c;
  for (std::size_t j = 0; j < kJointCount; ++j) c(static_cast<Eigen::Index>(j)) = 0.5 * (q_min[j] + q_max[j]);
  return c;
}

Cartesian forward_kinematics(const Workspace& ws, double q_boom, double q_arm) {
  Cartesian c;
  c.radius = ws.base_offset + ws.boom_length * std::cos(q_boom) + ws.arm_length * std::cos(q_boom + q_arm);
  c.height = ws.boom_length * std::sin(q_boom) + ws.arm_length * std::sin(q_boom + q_arm);
  return c;
}

std::string SafetyViolation::describe() const {
  if (kind == Kind::Joint) {
    return std::string("joint ") + kJointNames[joint] + " at " + std::to_string(value) + " rad";
  }
  return "end-effector radius " + std::to_string(value) + " m";
}

std::optional<SafetyViolation> safety_check(const StateVector& x, const Workspace& ws) {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const double q = x(static_cast<Eigen::Index>(j));
    if (!(q >= ws.q_min[j] && q <= ws.q_max[j])) return SafetyViolation{SafetyViolation::Kind::Joint, j, q};
  }
  const double r = forward_kinematics(ws, x(1), x(2)).radius;
  if (!(r >= ws.radius_min && r <= ws.radius_max)) return SafetyViolation{SafetyViolation::Kind::Cartesian, 0, r};
  return std::nullopt;
}

}  // namespace hnmpc
