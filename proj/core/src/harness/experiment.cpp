#include "hydronmpc/harness/experiment.hpp"

#include "hydronmpc/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

namespace hnmpc {

namespace {

void record(RunTrace& trace, double t, const PlantState& s, const InputVector& u, const OutputVector& r,
            const StepResult& next) {
  trace.time.push_back(t);
  trace.states.push_back(s.x);
  trace.inputs.push_back(u);
  trace.reference.push_back(r);
  trace.telemetry.push_back(next.telemetry);
  trace.gears.push_back(next.state.gear);
}

void finish(RunTrace& trace) {
  std::vector<EnergySample> samples;
  samples.reserve(trace.telemetry.size());
  for (const PlantTelemetry& tel : trace.telemetry) samples.push_back({tel.supply, tel.overflow});
  trace.efficiency = energy_efficiency(samples, kControlPeriod);
}

}  // namespace

RunTrace run_pid_experiment(const Scenario& scenario, const PlantParams& params, const PidGains& gains,
                            std::size_t gear) {
  const ClosedLoopTrace pid = run_pid_scenario(params, gains, scenario, gear);
  RunTrace trace;
  trace.scenario = scenario.name;
  trace.controller = "pid";
  trace.time = pid.time;
  trace.states = pid.states;
  trace.inputs = pid.inputs;
  trace.reference = pid.reference;
  trace.telemetry = pid.telemetry;
  trace.gears = pid.gears;
  finish(trace);
  return trace;
}

NmpcConfig apply_scenario(NmpcConfig config, const Scenario& scenario) {
  config.extraction = extraction_from_string(scenario.extraction);
  config.start_gear = scenario.start_gear;
  return config;
}

RunTrace run_experiment(const Scenario& scenario, const PlantParams& params, NmpcController* controller,
                        const PidGains& pid_gains) {
  if (controller == nullptr) return run_pid_experiment(scenario, params, pid_gains, scenario.pid_gear);
  const std::size_t n = controller->offline().horizon();
  RunTrace trace;
  trace.scenario = scenario.name;
  trace.controller = "nmpc";
  PlantState s = initial_state(params, scenario.reference_at(0.0), controller->gear(), scenario.load_at(0.0));
  const std::size_t steps = scenario.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * kControlPeriod;
    const OutputVector r = scenario.reference_at(t);
    CycleOutput out = controller->step(s.x, t, reference_window(scenario, t, n), r);
    StepResult next = plant_step(s, params, out.command, scenario.load_at(t));
    record(trace, t, s, out.command, r, next);
    trace.diagnostics.push_back(std::move(out.diagnostics));
    s = std::move(next.state);
  }
  finish(trace);
  return trace;
}

RunSummary summarize(const RunTrace& trace, double score_from) {
  RunSummary r;
  r.scenario = trace.scenario;
  r.controller = trace.controller;
  r.cycles = trace.time.size();
  r.score_from = score_from;
  std::array<double, 3> sum{};
  std::size_t count = 0;
  for (std::size_t k = 0; k < trace.time.size(); ++k) {
    if (trace.time[k] + 1e-9 < score_from) continue;
    for (int j = 0; j < 3; ++j) {
      const double e = trace.reference[k](j) - trace.states[k](j);
      sum[static_cast<std::size_t>(j)] += e * e;
    }
    ++count;
  }
  if (count == 0) throw ContractError("summarize: empty scoring window");
  for (std::size_t j = 0; j < 3; ++j) {
    r.rmse[j] = std::sqrt(sum[j] / static_cast<double>(count));
    r.rmse_mean += r.rmse[j] / 3.0;
  }
  r.final_efficiency = trace.efficiency.final_value();
  r.efficiency_undefined = trace.efficiency.undefined;
  r.min_switch_interval = std::numeric_limits<double>::infinity();
  double last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 1; k < trace.gears.size(); ++k) {
    if (trace.gears[k] == trace.gears[k - 1]) continue;
    ++r.gear_switches;
    if (!std::isnan(last)) r.min_switch_interval = std::min(r.min_switch_interval, trace.time[k] - last);
    last = trace.time[k];
  }
  for (const CycleDiagnostics& d : trace.diagnostics) {
    r.warmup_cycles += d.warmup ? 1 : 0;
    r.failsafe_cycles += d.failsafe ? 1 : 0;
    r.rollbacks += d.rolled_back ? 1 : 0;
  }
  return r;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace, bool wall_clock) {
  out << "t,ref_swing,ref_boom,ref_arm,q_swing,q_boom,q_arm,u_swing,u_boom,u_arm,omega,gear,supply,overflow,"
         "efficiency,j_initial,j_final,eta,err_swing,err_boom,err_arm,warmup,failsafe";
  if (wall_clock) out << ",cycle_ms";
  out << '\n' << std::setprecision(10);
  for (std::size_t k = 0; k < trace.time.size(); ++k) {
    out << trace.time[k];
    for (int j = 0; j < 3; ++j) out << ',' << trace.reference[k](j);
    for (int j = 0; j < 3; ++j) out << ',' << trace.states[k](j);
    for (int j = 0; j < 4; ++j) out << ',' << trace.inputs[k](j);
    out << ',' << trace.gears[k] << ',' << trace.telemetry[k].supply << ',' << trace.telemetry[k].overflow << ','
        << trace.efficiency.efficiency[k];
    if (k < trace.diagnostics.size()) {
      const CycleDiagnostics& d = trace.diagnostics[k];
      out << ',' << d.j_initial << ',' << d.j_final << ',' << d.eta;
      for (int j = 0; j < 3; ++j) out << ',' << d.error(j);
      out << ',' << d.warmup << ',' << d.failsafe;
      if (wall_clock) out << ',' << d.cycle_ms;
    } else {
      out << ",,,";
      for (int j = 0; j < 3; ++j) out << ',' << trace.reference[k](j) - trace.states[k](j);
      out << ",0,0";
      if (wall_clock) out << ',';
    }
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows) {
  out << "scenario,controller,cycles,score_from,rmse_swing,rmse_boom,rmse_arm,rmse_mean,final_efficiency,"
         "efficiency_undefined,gear_switches,min_switch_interval,warmup_cycles,failsafe_cycles,rollbacks\n"
      << std::setprecision(10);
  for (const RunSummary& r : rows) {
    out << r.scenario << ',' << r.controller << ',' << r.cycles << ',' << r.score_from;
    for (double v : r.rmse) out << ',' << v;
    out << ',' << r.rmse_mean << ',' << r.final_efficiency << ',' << r.efficiency_undefined << ','
        << r.gear_switches << ',' << r.min_switch_interval << ',' << r.warmup_cycles << ',' << r.failsafe_cycles
        << ',' << r.rollbacks << '\n';
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << contents;
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace hnmpc
