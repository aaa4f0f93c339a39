// hydronmpc: data collection, training, evaluation, closed-loop runs,
// timing and the UDP bridge from the command line.

#include "hydronmpc/errors.hpp"
#include "hydronmpc/harness/bench.hpp"
#include "hydronmpc/harness/experiment.hpp"
#include "hydronmpc/harness/metrics.hpp"
#include "hydronmpc/harness/pipeline.hpp"
#include "hydronmpc/harness/udp.hpp"
#include "hydronmpc/ssmp/checkpoint.hpp"
#include "hydronmpc/ssmp/dataset.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace hnmpc;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  std::string out_dir = ".";
  bool wall_clock = false;
};

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::ostringstream csv() {
  std::ostringstream o;
  o << std::setprecision(10);
  return o;
}

NmpcConfig controller_config(const Globals& g, const Scenario& scenario) {
  NmpcConfig cfg = g.config.empty() ? NmpcConfig{} : load_nmpc_config(g.config);
  return apply_scenario(cfg, scenario);
}

const char* source_name(TickSource s) {
  switch (s) {
    case TickSource::Fresh: return "fresh";
    case TickSource::Held: return "held";
    case TickSource::Dropped: return "dropped";
    case TickSource::Failsafe: return "failsafe";
  }
  return "?";
}

// ---- collect ---------------------------------------------------------------

struct CollectArgs {
  std::size_t open_loop = 30;
  std::size_t closed_loop = 30;
  std::size_t length = 1000;
  double load_mass = 0.0;
};

void run_collect(const Globals& g, const CollectArgs& a) {
  DatasetRecipe recipe;
  recipe.open_loop_episodes = a.open_loop;
  recipe.closed_loop_episodes = a.closed_loop;
  recipe.collect.length = a.length;
  recipe.collect.load_mass = a.load_mass;
  recipe.seed = g.seed;
  const EpisodeStore store = build_dataset(PlantParams{}, recipe);
  fs::create_directories(g.out_dir);
  write_dataset(g.out_dir, store);
  std::cout << "collected " << store.episodes.size() << " episodes, " << store.total_samples() << " samples\n";
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::size_t history = 10;
  std::size_t horizon = 10;
  std::size_t hidden = 64;
  std::size_t iterations = 50000;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  bool absolute = false;
  std::string model_name = "model.ssmp";
};

void run_train(const Globals& g, const TrainArgs& a) {
  const EpisodeStore store = read_dataset(a.data);
  TrainRecipe recipe;
  recipe.dims = SsmpDims{a.history, a.horizon, a.hidden, {a.hidden, a.hidden},
                         a.absolute ? TargetMode::Absolute : TargetMode::Delta};
  recipe.train.iterations = a.iterations;
  recipe.train.batch_size = a.batch;
  recipe.train.learning_rate = a.learning_rate;
  recipe.train.seed = g.seed;
  const TrainedModel trained = train_recipe(store, recipe);
  save_model(out_path(g, a.model_name), trained.model);

  auto loss = csv();
  loss << "iteration,loss\n";
  for (const LossPoint& p : trained.result.trace) loss << p.iteration << ',' << p.loss << '\n';
  write_file(out_path(g, "train_loss.csv"), loss.str());

  auto summary = csv();
  const Armse3& v = trained.validation;
  summary << "h,N,j,target,iterations,final_loss,val_swing,val_boom,val_arm,val_mean,windows\n"
          << a.history << ',' << a.horizon << ',' << a.hidden << ',' << (a.absolute ? "absolute" : "delta") << ','
          << a.iterations << ',' << trained.result.final_loss << ',' << v.joint[0] << ',' << v.joint[1] << ','
          << v.joint[2] << ',' << v.mean << ',' << v.windows << '\n';
  write_file(out_path(g, "train_summary.csv"), summary.str());
  std::cout << "validation ARMSE " << v.mean << " over " << v.windows << " windows\n";
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::vector<std::string> models;
};

void run_eval(const Globals& g, const EvalArgs& a) {
  const EpisodeStore store = read_dataset(a.data);
  auto out = csv();
  out << "model,h,N,armse_swing,armse_boom,armse_arm,armse_mean,windows\n";
  for (const std::string& path : a.models) {
    const SsmpModel model = load_model(path);
    const Armse3 r = prediction_armse(model, store);
    out << fs::path(path).filename().string() << ',' << model.history() << ',' << model.horizon() << ','
        << r.joint[0] << ',' << r.joint[1] << ',' << r.joint[2] << ',' << r.mean << ',' << r.windows << '\n';
  }
  write_file(out_path(g, "armse.csv"), out.str());
  std::cout << out.str();
}

// ---- control ---------------------------------------------------------------

struct ControlArgs {
  std::string model;
  std::string scenario;
  std::string controller;  // empty: the scenario's choice
  int pid_gear = -1;
};

void run_control(const Globals& g, const ControlArgs& a) {
  Scenario scenario = load_scenario(a.scenario);
  if (!a.controller.empty()) scenario.controller = a.controller;
  if (a.pid_gear >= 0) scenario.pid_gear = static_cast<std::size_t>(a.pid_gear);
  const PlantParams params;
  RunTrace trace;
  if (scenario.controller == "pid") {
    if (scenario.pid_gear > 2) throw ConfigError("pid gear must be 0, 1 or 2");
    trace = run_pid_experiment(scenario, params, PidGains{}, scenario.pid_gear);
  } else if (scenario.controller == "nmpc") {
    if (a.model.empty()) throw ConfigError("--model is required for the nmpc controller");
    NmpcController controller(load_model(a.model), controller_config(g, scenario), g.seed);
    trace = run_experiment(scenario, params, &controller);
  } else {
    throw ConfigError("unknown controller '" + scenario.controller + "'");
  }
  const RunSummary summary = summarize(trace, scenario.score_from);
  std::ostringstream t, s;
  write_trace_csv(t, trace, g.wall_clock);
  write_summary_csv(s, {summary});
  write_file(out_path(g, "trace.csv"), t.str());
  write_file(out_path(g, "summary.csv"), s.str());
  std::cout << s.str();
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::size_t repetitions = 1000;
  std::size_t k1 = 30;
  std::size_t k2 = 1;
};

void run_bench(const Globals& g, const BenchArgs& a) {
  const std::vector<BenchPoint> grid = default_bench_grid();
  std::vector<BenchRow> rows;
  if (g.wall_clock) {
    rows = timing_bench(grid, BenchSettings{a.repetitions, a.k1, a.k2, g.seed});
  } else {
    for (const BenchPoint& p : grid) {
      BenchRow r;
      r.point = p;
      r.flops = flops_estimate(p.history, kStateDim, kInputDim, p.hidden, p.horizon);
      rows.push_back(r);
    }
  }
  std::ostringstream grid_csv;
  write_bench_grid_csv(grid_csv, rows);
  write_file(out_path(g, "bench_grid.csv"), grid_csv.str());
  if (g.wall_clock) {
    std::ostringstream timing;
    write_bench_timing_csv(timing, rows);
    write_file(out_path(g, "bench_timing.csv"), timing.str());
    std::cout << timing.str();
  } else {
    std::cout << grid_csv.str();
  }
}

// ---- serve / drive / loop --------------------------------------------------

struct UdpArgs {
  std::string model;
  std::string scenario;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::size_t max_packets = 0;
  std::vector<std::string> silent;  // "first:last"
  std::size_t cycles = 500;
  double drop_rate = 0.0;
  int reply_timeout_ms = 100;
  bool paced = false;
};

std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_ranges(const std::vector<std::string>& specs) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const std::string& s : specs) {
    const auto parts = split_tokens(s, ":");
    if (parts.size() != 2) throw ConfigError("sequence range must be first:last, got '" + s + "'");
    const double first = parse_double(parts[0], "range start");
    const double last = parse_double(parts[1], "range end");
    if (first < 0 || last < first) throw ConfigError("bad sequence range '" + s + "'");
    out.emplace_back(static_cast<std::uint32_t>(first), static_cast<std::uint32_t>(last));
  }
  return out;
}

std::string serve_stats_csv(const ServeStats& s) {
  auto o = csv();
  o << "received,replied,malformed,stale,silenced,failsafe_entries\n"
    << s.received << ',' << s.replied << ',' << s.malformed << ',' << s.stale << ',' << s.silenced << ','
    << s.failsafe_entries << '\n';
  return o.str();
}

void write_drive(const Globals& g, const DriveResult& r) {
  auto ticks = csv();
  ticks << "sequence,source,u_swing,u_boom,u_arm,omega,flags,q_swing,q_boom,q_arm\n";
  for (std::size_t k = 0; k < r.ticks.size(); ++k) {
    const DriveTick& t = r.ticks[k];
    ticks << t.sequence << ',' << source_name(t.source);
    for (int j = 0; j < 4; ++j) ticks << ',' << t.applied(j);
    ticks << ',' << t.flags;
    for (int j = 0; j < 3; ++j) ticks << ',' << r.states[k](j);
    ticks << '\n';
  }
  write_file(out_path(g, "drive.csv"), ticks.str());
  auto summary = csv();
  summary << "ticks,dropped,held,failsafe_ticks,malformed,stale\n"
          << r.ticks.size() << ',' << r.dropped << ',' << r.held << ',' << r.failsafe_ticks << ',' << r.malformed
          << ',' << r.stale << '\n';
  write_file(out_path(g, "drive_summary.csv"), summary.str());
  std::cout << summary.str();
}

DriveConfig drive_config(const Globals& g, const UdpArgs& a, std::uint16_t port) {
  DriveConfig cfg;
  cfg.host = a.host;
  cfg.port = port;
  cfg.cycles = a.cycles;
  cfg.drop_rate = a.drop_rate;
  cfg.drop_seed = g.seed;
  cfg.reply_timeout_ms = a.reply_timeout_ms;
  cfg.paced = a.paced;
  return cfg;
}

void run_serve(const Globals& g, const UdpArgs& a) {
  if (a.model.empty()) throw ConfigError("--model is required");
  const Scenario scenario = load_scenario(a.scenario);
  NmpcController controller(load_model(a.model), controller_config(g, scenario), g.seed);
  UdpSocket socket(a.host, a.port);
  std::cerr << "serving on " << a.host << ':' << socket.port() << '\n';
  ServeConfig cfg;
  cfg.host = a.host;
  cfg.port = socket.port();
  cfg.max_packets = a.max_packets;
  cfg.silent_sequences = parse_ranges(a.silent);
  const std::atomic<bool> stop{false};
  const ServeStats stats = udp_serve(socket, controller, scenario, cfg, stop);
  write_file(out_path(g, "serve_stats.csv"), serve_stats_csv(stats));
  std::cout << serve_stats_csv(stats);
}

void run_drive(const Globals& g, const UdpArgs& a) {
  if (a.port == 0) throw ConfigError("--port is required");
  const Scenario scenario = load_scenario(a.scenario);
  UdpSocket socket(a.host, 0);
  write_drive(g, udp_drive(socket, PlantParams{}, scenario, drive_config(g, a, a.port)));
}

void run_loop(const Globals& g, const UdpArgs& a) {
  if (a.model.empty()) throw ConfigError("--model is required");
  const Scenario scenario = load_scenario(a.scenario);
  NmpcController controller(load_model(a.model), controller_config(g, scenario), g.seed);
  UdpSocket server(a.host, 0);
  UdpSocket plant(a.host, 0);
  ServeConfig cfg;
  cfg.host = a.host;
  cfg.silent_sequences = parse_ranges(a.silent);
  std::atomic<bool> stop{false};
  ServeStats stats;
  std::thread thread([&] { stats = udp_serve(server, controller, scenario, cfg, stop); });
  DriveResult result;
  try {
    result = udp_drive(plant, PlantParams{}, scenario, drive_config(g, a, server.port()));
  } catch (...) {
    stop = true;
    thread.join();
    throw;
  }
  stop = true;
  thread.join();
  write_file(out_path(g, "serve_stats.csv"), serve_stats_csv(stats));
  write_drive(g, result);
}

void add_udp_options(CLI::App* cmd, UdpArgs& a, bool needs_model) {
  cmd->add_option("--scenario", a.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--host", a.host, "IPv4 address");
  if (needs_model) cmd->add_option("--model", a.model, "SSMP model file")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hydronmpc: learned-model NMPC for a hydraulic excavator surrogate"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config, "Controller config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_flag("--wall-clock", g.wall_clock, "Include wall-clock timings in outputs");

  CollectArgs collect;
  auto* c = app.add_subcommand("collect", "Simulate open- and closed-loop episodes into a dataset directory");
  c->add_option("--open-loop", collect.open_loop, "Open-loop episodes");
  c->add_option("--closed-loop", collect.closed_loop, "Closed-loop episodes");
  c->add_option("--length", collect.length, "Samples per episode");
  c->add_option("--load-mass", collect.load_mass, "Attached load, kg");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train an SSMP model on a dataset");
  t->add_option("--data", train.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--history", train.history, "History length h");
  t->add_option("--horizon", train.horizon, "Prediction horizon N");
  t->add_option("--hidden", train.hidden, "LSTM and head width");
  t->add_option("--iterations", train.iterations, "Adam iterations");
  t->add_option("--batch", train.batch, "Minibatch size");
  t->add_option("--lr", train.learning_rate, "Adam learning rate");
  t->add_flag("--absolute", train.absolute, "Predict absolute angles instead of changes");
  t->add_option("--model-name", train.model_name, "Model file name inside the output directory");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Prediction ARMSE of trained models on a dataset");
  e->add_option("--data", eval.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--model", eval.models, "Model files")->required()->check(CLI::ExistingFile);

  ControlArgs control;
  auto* k = app.add_subcommand("control", "Closed-loop run of a scenario against the surrogate plant");
  k->add_option("--model", control.model, "SSMP model file")->check(CLI::ExistingFile);
  k->add_option("--scenario", control.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  k->add_option("--controller", control.controller, "nmpc or pid (default: scenario)");
  k->add_option("--pid-gear", control.pid_gear, "Gear for the PID baseline (0 low, 1 medium, 2 high)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "flops estimate over the timing grid; timings with --wall-clock");
  b->add_option("--repetitions", bench.repetitions, "Timed repetitions per point");
  b->add_option("--k1", bench.k1, "GD iterations per cycle");
  b->add_option("--k2", bench.k2, "Online loops per cycle");

  UdpArgs serve;
  auto* s = app.add_subcommand("serve", "Controller side of the UDP loop");
  add_udp_options(s, serve, true);
  s->add_option("--port", serve.port, "Port to bind (0 picks one)");
  s->add_option("--max-packets", serve.max_packets, "Exit after this many state packets (0: never)");
  s->add_option("--silent", serve.silent, "Ignore state sequences in first:last");

  UdpArgs drive;
  auto* d = app.add_subcommand("drive", "Plant side of the UDP loop");
  add_udp_options(d, drive, false);
  d->add_option("--port", drive.port, "Controller port")->required();
  d->add_option("--cycles", drive.cycles, "Control ticks");
  d->add_option("--drop-rate", drive.drop_rate, "Share of commands discarded on arrival");
  d->add_option("--reply-timeout", drive.reply_timeout_ms, "Wait per tick, ms");
  d->add_flag("--paced", drive.paced, "Run at the 50 Hz period");

  UdpArgs loop;
  auto* l = app.add_subcommand("loop", "Controller and plant over loopback UDP in one process");
  add_udp_options(l, loop, true);
  l->add_option("--cycles", loop.cycles, "Control ticks");
  l->add_option("--drop-rate", loop.drop_rate, "Share of commands discarded on arrival");
  l->add_option("--silent", loop.silent, "Controller ignores state sequences in first:last");
  l->add_option("--reply-timeout", loop.reply_timeout_ms, "Wait per tick, ms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 1;
  }

  try {
    if (*c) run_collect(g, collect);
    if (*t) run_train(g, train);
    if (*e) run_eval(g, eval);
    if (*k) run_control(g, control);
    if (*b) run_bench(g, bench);
    if (*s) run_serve(g, serve);
    if (*d) run_drive(g, drive);
    if (*l) run_loop(g, loop);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
