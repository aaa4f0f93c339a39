#pragma once

#include "hydronmpc/nmpc/optimizer.hpp"
#include "hydronmpc/online/residual.hpp"
#include "hydronmpc/plant/pid.hpp"
#include "hydronmpc/util/keyvalue.hpp"

#include <deque>
#include <optional>
#include <string>

namespace hnmpc {

struct NmpcConfig {
  CostWeights weights;
  ConstraintSpec constraints;
  std::size_t k1 = 30;
  std::size_t k2 = 30;
  double eta_u = 1.0;
  bool precondition = true;  // scale steps by squared input ranges
  bool backtrack = true;
  bool omega_from_gear = true;  // start the engine channel at the current gear speed
  bool online = true;        // run the residual model and its updates
  Extraction extraction = Extraction::Mean;
  ResidualConfig residual;
  PidGains warmup_gains;
  std::size_t warmup_gear = 2;
  std::size_t start_gear = 0;

  void validate() const;
};

/// Keys: a, b (one or three values), c, u_min, u_max, gear_speeds, t_switch, e,
/// k1, k2, eta_u, precondition, backtrack, omega_from_gear, online, extraction, residual.eta_w,
/// residual.eta_b, residual.batch, residual.capacity, residual.init_scale,
/// warmup_gear, start_gear. Unknown keys are rejected.
NmpcConfig parse_nmpc_config(const KeyValueFile& kv);
NmpcConfig load_nmpc_config(const std::filesystem::path& path);

struct CycleDiagnostics {
  double time = 0.0;
  double j_initial = std::nan("");
  double j_final = std::nan("");
  double eta = 0.0;
  std::size_t gear = 0;
  OutputVector error = OutputVector::Zero();  // R_Y - Y at the current time
  double cycle_ms = 0.0;
  bool warmup = false;
  bool failsafe = false;
  bool rolled_back = false;
  std::size_t rejected_steps = 0;
  std::vector<double> cost_trace;
  InputSequence sequence;  // optimized U before extraction
  std::string fault;
};

struct CycleOutput {
  InputVector command;
  CycleDiagnostics diagnostics;
};

/// Receding-horizon controller. Each cycle: read the state, optimize on the
/// pre-update hybrid model, record the completed mismatch sample, update the
/// residual model, emit the control. PID runs until h inputs are recorded.
class NmpcController {
 public:
  NmpcController(SsmpModel offline, NmpcConfig config, std::uint64_t seed);

  /// Fresh residual weights, empty buffer and history.
  void reset(std::uint64_t seed);
  /// Drops the state/input history and pending samples but keeps the
  /// learned residual; the next h cycles run the warm-up controller.
  void clear_history();

  CycleOutput step(const StateVector& x, double time, const ReferenceWindow& ref, const OutputVector& ref_now);

  const SsmpModel& offline() const { return offline_; }
  const ResidualModel& residual() const { return residual_; }
  const MismatchBuffer& buffer() const { return buffer_; }
  const NmpcConfig& config() const { return config_; }
  std::size_t gear() const { return gear_; }
  double last_switch() const { return last_switch_; }
  bool warm() const;
  /// Run the cycle with an exception injected into the optimizer (tests).
  void inject_fault_once() { inject_fault_ = true; }

 private:
  struct Pending {
    HistoryWindow window;
    Vector feature;
    std::size_t cycle;
  };

  HistoryWindow current_window() const;
  void record_mismatch();
  void emit(const InputVector& u, double time);

  SsmpModel offline_;
  NmpcConfig config_;
  ResidualModel residual_;
  MismatchBuffer buffer_;
  std::deque<StateVector> states_;
  std::deque<InputVector> inputs_;
  std::deque<Pending> pending_;
  PidState pid_;
  std::size_t cycle_ = 0;
  std::size_t gear_ = 0;
  double last_switch_ = -1e9;
  std::optional<InputVector> last_command_;
  bool inject_fault_ = false;
};

/// Reference rows for t+1..t+N from a scenario.
ReferenceWindow reference_window(const Scenario& scenario, double time, std::size_t horizon,
                                 double dt = kControlPeriod);

}  // namespace hnmpc
