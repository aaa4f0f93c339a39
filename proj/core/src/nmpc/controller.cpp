#include "hydronmpc/nmpc/controller.hpp"

#include "hydronmpc/errors.hpp"

#include <chrono>

namespace hnmpc {

void NmpcConfig::validate() const {
  weights.validate();
  constraints.validate();
  if (k1 < 1) throw ConfigError("NmpcConfig: k1 must be at least 1");
  if (!(eta_u > 0.0)) throw ConfigError("NmpcConfig: eta_u must be positive");
  if (warmup_gear > 2 || start_gear > 2) throw ConfigError("NmpcConfig: gear index out of range");
  if (residual.batch_size == 0 || residual.capacity < residual.batch_size) {
    throw ConfigError("NmpcConfig: residual buffer capacity must be at least the batch size");
  }
}

namespace {

std::array<double, 3> joint_values(const KeyValueFile& kv, const std::string& key, const std::array<double, 3>& fb) {
  const auto v = kv.get_doubles(key, {fb[0], fb[1], fb[2]});
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() != 3) throw ConfigError(kv.origin() + ": " + key + " takes one or three values");
  return {v[0], v[1], v[2]};
}

std::size_t count(const KeyValueFile& kv, const std::string& key, std::size_t fb) {
  const long long v = kv.get_int(key, static_cast<long long>(fb));
  if (v < 0) throw ConfigError(kv.origin() + ": " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

NmpcConfig parse_nmpc_config(const KeyValueFile& kv) {
  NmpcConfig c;
  c.weights.a = joint_values(kv, "a", c.weights.a);
  c.weights.b = joint_values(kv, "b", c.weights.b);
  c.weights.c = kv.get_double("c", c.weights.c);
  c.constraints.u_min = joint_values(kv, "u_min", c.constraints.u_min);
  c.constraints.u_max = joint_values(kv, "u_max", c.constraints.u_max);
  c.constraints.gear_speeds = joint_values(kv, "gear_speeds", c.constraints.gear_speeds);
  c.constraints.t_switch = kv.get_double("t_switch", c.constraints.t_switch);
  c.constraints.e = kv.get_double("e", c.constraints.e);
  c.k1 = count(kv, "k1", c.k1);
  c.k2 = count(kv, "k2", c.k2);
  c.eta_u = kv.get_double("eta_u", c.eta_u);
  c.precondition = kv.get_bool("precondition", c.precondition);
  c.backtrack = kv.get_bool("backtrack", c.backtrack);
  c.omega_from_gear = kv.get_bool("omega_from_gear", c.omega_from_gear);
  c.online = kv.get_bool("online", c.online);
  c.extraction = extraction_from_string(kv.get_string("extraction", "mean"));
  c.residual.eta_w = kv.get_double("residual.eta_w", c.residual.eta_w);
  c.residual.eta_b = kv.get_double("residual.eta_b", c.residual.eta_b);
  c.residual.batch_size = count(kv, "residual.batch", c.residual.batch_size);
  c.residual.capacity = count(kv, "residual.capacity", c.residual.capacity);
  c.residual.init_scale = kv.get_double("residual.init_scale", c.residual.init_scale);
  c.residual.loops = c.k2;
  c.warmup_gear = count(kv, "warmup_gear", c.warmup_gear);
  c.start_gear = count(kv, "start_gear", c.start_gear);
  kv.reject_unused();
  c.validate();
  return c;
}

NmpcConfig load_nmpc_config(const std::filesystem::path& path) { return parse_nmpc_config(KeyValueFile::load(path)); }

NmpcController::NmpcController(SsmpModel offline, NmpcConfig config, std::uint64_t seed)
    : offline_(std::move(offline)),
      config_(std::move(config)),
      residual_(offline_, config_.residual, seed),
      buffer_(config_.residual.capacity) {
  config_.validate();
  gear_ = config_.start_gear;
}

void NmpcController::reset(std::uint64_t seed) {
  residual_.reset(seed);
  buffer_.clear();
  states_.clear();
  inputs_.clear();
  pending_.clear();
  pid_ = PidState{};
  cycle_ = 0;
  gear_ = config_.start_gear;
  last_switch_ = -1e9;
  last_command_.reset();
}

void NmpcController::clear_history() {
  states_.clear();
  inputs_.clear();
  pending_.clear();
  pid_ = PidState{};
}

bool NmpcController::warm() const { return inputs_.size() >= offline_.history(); }

HistoryWindow NmpcController::current_window() const {
  const std::size_t h = offline_.history();
  HistoryWindow w;
  w.states.assign(states_.end() - static_cast<std::ptrdiff_t>(h), states_.end());
  w.inputs.assign(inputs_.end() - static_cast<std::ptrdiff_t>(h), inputs_.end());
  w.anchor_state = states_[states_.size() - 2];
  return w;
}

void NmpcController::record_mismatch() {
  // The window from N cycles ago now has its N applied inputs and outcomes.
  const std::size_t n = offline_.horizon();
  while (!pending_.empty() && pending_.front().cycle + n <= cycle_) {
    Pending p = std::move(pending_.front());
    pending_.pop_front();
    if (p.cycle + n != cycle_) continue;
    const std::size_t back = cycle_ - p.cycle;  // == n
    InputSequence applied(static_cast<Eigen::Index>(n), 4);
    OutputSequence realized(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      applied.row(static_cast<Eigen::Index>(i)) = inputs_[inputs_.size() - back + i].transpose();
      realized.row(static_cast<Eigen::Index>(i)) = select_output(states_[states_.size() - back + i]).transpose();
    }
    OutputSequence off = offline_.predict_from_feature(p.feature, p.window.anchor_output(), applied);
    buffer_.push({std::move(p.window), std::move(applied), std::move(off), std::move(realized)});
  }
}

void NmpcController::emit(const InputVector& u, double time) {
  const std::size_t g = std::min<std::size_t>(2, static_cast<std::size_t>(
      std::distance(config_.constraints.gear_speeds.begin(),
                    std::min_element(config_.constraints.gear_speeds.begin(), config_.constraints.gear_speeds.end(),
                                     [&](double a, double b) { return std::abs(a - u(3)) < std::abs(b - u(3)); }))));
  if (g != gear_) {
    gear_ = g;
    last_switch_ = time;
  }
  inputs_.push_back(u);
  last_command_ = u;
  const std::size_t keep = offline_.history() + offline_.horizon() + 2;
  while (inputs_.size() > keep) inputs_.pop_front();
}

CycleOutput NmpcController::step(const StateVector& x, double time, const ReferenceWindow& ref,
                                 const OutputVector& ref_now) {
  const auto t0 = std::chrono::steady_clock::now();
  CycleOutput out;
  CycleDiagnostics& d = out.diagnostics;
  d.time = time;
  states_.push_back(x);
  const std::size_t keep = offline_.history() + offline_.horizon() + 2;
  while (states_.size() > keep) states_.pop_front();
  const OutputVector y = select_output(x);
  d.error = ref_now - y;

  if (!warm()) {
    d.warmup = true;
    out.command = pid_step(pid_, config_.warmup_gains, ref_now, y,
                           config_.constraints.gear_speeds[config_.warmup_gear]);
  } else {
    try {
      if (inject_fault_) {
        inject_fault_ = false;
        throw PredictionError("injected fault");
      }
      const HistoryWindow window = current_window();
      const HybridPredictor predictor(offline_, config_.online ? &residual_ : nullptr, window);
      d.eta = adapt_learning_rate(config_.eta_u, position_error(ref_now, y), config_.constraints.e);
      GdSettings gs;
      gs.iterations = config_.k1;
      gs.backtrack = config_.backtrack;
      if (config_.omega_from_gear) gs.omega_start = config_.constraints.gear_speeds[gear_];
      if (config_.precondition) {
        const Vector range = offline_.normalizer().input.scale();
        for (std::size_t k = 0; k < 4; ++k) gs.step_scale[k] = range(static_cast<Eigen::Index>(k)) * range(static_cast<Eigen::Index>(k));
      }
      const GdResult gd = gd_optimize(predictor, ref, config_.weights, config_.constraints, gs, y, d.eta);
      if (gd.failed) throw PredictionError("non-finite cost in gradient descent");
      d.j_initial = gd.cost.front();
      d.j_final = gd.cost.back();
      d.cost_trace = gd.cost;
      d.rejected_steps = gd.rejected;
      d.sequence = gd.u;
      const GearDecision gear = project_gear(gd.u.col(3), config_.constraints.gear_speeds, gear_, last_switch_,
                                             config_.constraints.t_switch, time);
      out.command = extract_control(gd.u, config_.extraction, config_.constraints, gear);
      pending_.push_back({window, predictor.feature(), cycle_});
    } catch (const Error& e) {
      d.failsafe = true;
      d.fault = e.what();
      out.command = last_command_.value_or(InputVector(0.0, 0.0, 0.0, config_.constraints.gear_speeds[gear_]));
    }
  }

  if (config_.online) {
    try {
      record_mismatch();
      if (!buffer_.empty() && config_.k2 > 0 && !d.warmup) {
        const OnlineUpdateResult upd = online_update(residual_, buffer_, config_.k2);
        if (upd.rolled_back) {
          d.rolled_back = true;
          d.fault += (d.fault.empty() ? "" : "; ") + upd.error;
        }
      }
    } catch (const Error& e) {
      d.fault += (d.fault.empty() ? "" : "; ") + std::string(e.what());
    }
  }

  emit(out.command, time);
  d.gear = gear_;
  ++cycle_;
  d.cycle_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ReferenceWindow reference_window(const Scenario& scenario, double time, std::size_t horizon, double dt) {
  ReferenceWindow r;
  r.angle.resize(static_cast<Eigen::Index>(horizon), 3);
  r.rate.resize(static_cast<Eigen::Index>(horizon), 3);
  for (std::size_t i = 0; i < horizon; ++i) {
    const double t = time + static_cast<double>(i + 1) * dt;
    r.angle.row(static_cast<Eigen::Index>(i)) = scenario.reference_at(t).transpose();
    r.rate.row(static_cast<Eigen::Index>(i)) = scenario.reference_rate_at(t).transpose();
  }
  return r;
}

}  // namespace hnmpc
