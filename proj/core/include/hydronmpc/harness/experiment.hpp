#pragma once

#include "hydronmpc/harness/metrics.hpp"
#include "hydronmpc/nmpc/controller.hpp"
#include "hydronmpc/plant/pid.hpp"
#include "hydronmpc/plant/plant.hpp"
#include "hydronmpc/plant/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hnmpc {

struct RunTrace {
  std::string scenario;
  std::string controller;  // "nmpc" or "pid"
  std::vector<double> time;
  std::vector<StateVector> states;
  std::vector<InputVector> inputs;
  std::vector<OutputVector> reference;
  std::vector<PlantTelemetry> telemetry;
  std::vector<std::size_t> gears;
  std::vector<CycleDiagnostics> diagnostics;  // empty for PID runs
  EnergySeries efficiency;
};

struct RunSummary {
  std::string scenario;
  std::string controller;
  std::size_t cycles = 0;
  double score_from = 0.0;
  std::array<double, 3> rmse{};        // per joint over [score_from, end)
  double rmse_mean = 0.0;
  double final_efficiency = 1.0;
  bool efficiency_undefined = false;
  std::size_t gear_switches = 0;
  double min_switch_interval = 0.0;    // inf when fewer than two switches
  std::size_t warmup_cycles = 0;
  std::size_t failsafe_cycles = 0;
  std::size_t rollbacks = 0;
};

/// Copies the scenario's extraction mode and start gear into `config`.
NmpcConfig apply_scenario(NmpcConfig config, const Scenario& scenario);

/// Closed loop against the surrogate plant. With a controller the NMPC runs
/// as configured; otherwise the PID runs at the scenario's fixed gear.
RunTrace run_experiment(const Scenario& scenario, const PlantParams& params, NmpcController* controller,
                        const PidGains& pid_gains = {});
RunTrace run_pid_experiment(const Scenario& scenario, const PlantParams& params, const PidGains& gains,
                            std::size_t gear);

RunSummary summarize(const RunTrace& trace, double score_from);

/// Per-cycle CSV. Columns: t, ref_{swing,boom,arm}, q_{..}, u_{..}, omega, gear,
/// supply, overflow, efficiency, j_initial, j_final, eta, err_{..}, warmup,
/// failsafe, then cycle_ms only when wall_clock is set.
void write_trace_csv(std::ostream& out, const RunTrace& trace, bool wall_clock = false);
void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace hnmpc
