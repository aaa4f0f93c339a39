#include "doctest.h"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/plant/collect.hpp"
#include "hydronmpc/plant/pid.hpp"
#include "hydronmpc/plant/plant.hpp"
#include "hydronmpc/plant/scenario.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <limits>

using namespace hnmpc;

namespace {

const std::filesystem::path kScenarios = HYDRONMPC_SCENARIO_DIR;

InputVector command(double s, double b, double a, double omega) {
  InputVector u;
  u << s, b, a, omega;
  return u;
}

PlantState settle(const PlantParams& p, PlantState s, const InputVector& u, double load, std::size_t steps) {
  for (std::size_t k = 0; k < steps; ++k) s = plant_step(s, p, u, load).state;
  return s;
}

bool same_bits(const StateVector& a, const StateVector& b) { return std::memcmp(a.data(), b.data(), sizeof(double) * 9) == 0; }

}  // namespace

TEST_CASE("dead zone: no demand, full overflow, joints come to rest") {
  const PlantParams p;
  PlantState s = initial_state(p, Workspace{}.center(), 2);
  s.x(3) = 0.3;
  s.x(4) = -0.2;
  const InputVector u = command(0.09, -0.11, 0.05, p.gear_speeds[2]);
  double prev = 1e9;
  for (int k = 0; k < 200; ++k) {
    const StepResult r = plant_step(s, p, u, 0.0);
    CHECK(r.telemetry.demand == 0.0);
    CHECK(r.telemetry.overflow == r.telemetry.supply);
    const double speed = r.state.x.segment<3>(3).cwiseAbs().maxCoeff();
    CHECK(speed <= prev);
    prev = speed;
    s = r.state;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("one valve fully open at high gear reaches the closed-form velocity") {
  const PlantParams p;
  for (std::size_t j = 0; j < 3; ++j) {
    InputVector u = command(0, 0, 0, p.gear_speeds[2]);
    u(static_cast<Eigen::Index>(j)) = 1.0;
    const PlantState start = initial_state(p, Workspace{}.center(), 2);
    PlantState s = start;
    StepResult r{};
    for (int k = 0; k < 40; ++k) {
      r = plant_step(s, p, u, 0.0);
      s = r.state;
      // Keep the joint away from the mechanical stops.
      s.x(static_cast<Eigen::Index>(j)) = start.x(static_cast<Eigen::Index>(j));
    }
    const double v_expect = p.gain[j] * std::min(p.max_flow[j], p.supply_at(p.gear_speeds[2]));
    for (int k = 0; k < 400; ++k) {
      r = plant_step(s, p, u, 0.0);
      s = r.state;
      s.x(static_cast<Eigen::Index>(j)) = start.x(static_cast<Eigen::Index>(j));
    }
    CHECK(r.telemetry.allocated[j] == doctest::Approx(p.max_flow[j]).epsilon(1e-9));
    CHECK(s.x(static_cast<Eigen::Index>(3 + j)) == doctest::Approx(v_expect).epsilon(1e-9));
  }
}

TEST_CASE("starvation: a moving boom takes flow from the loaded arm") {
  const PlantParams p;
  const double load = 1500.0;
  const double omega = p.gear_speeds[0];
  PlantState s0 = initial_state(p, Workspace{}.center(), 0, load);
  const auto arm_only = plant_step(settle(p, s0, command(0, 0, 1.0, omega), load, 20), p,
                                   command(0, 0, 1.0, omega), load);
  const auto both = plant_step(settle(p, s0, command(0, 1.0, 1.0, omega), load, 20), p,
                               command(0, 1.0, 1.0, omega), load);
  CHECK(both.telemetry.demand > both.telemetry.supply);
  CHECK(both.telemetry.allocated[2] < arm_only.telemetry.allocated[2]);

  // Direct rule check: equal demands, the loaded joint gets the smaller share.
  const JointArray alloc = allocate_flow({1.0, 1.0, 0.0}, {0.0, 5e4, 0.0}, 1.0, 4e-5);
  CHECK(alloc[1] < alloc[0]);
  CHECK(alloc[0] + alloc[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(alloc[0] / alloc[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("flow conservation on every step of a random drive") {
  const PlantParams p;
  Rng rng(3);
  std::uniform_real_distribution<double> valve(-1.0, 1.0);
  std::uniform_int_distribution<int> gear(0, 2);
  PlantState s = initial_state(p, Workspace{}.center(), 1, 800.0);
  for (int k = 0; k < 3000; ++k) {
    const InputVector u = command(valve(rng), valve(rng), valve(rng), p.gear_speeds[gear(rng)]);
    const StepResult r = plant_step(s, p, u, k > 1500 ? 1500.0 : 0.0);
    const PlantTelemetry& t = r.telemetry;
    const double used = (t.allocated[0] + t.allocated[1]) + t.allocated[2];
    CHECK(t.overflow >= 0.0);
    CHECK(std::abs(used + t.overflow - t.supply) <= 2.0 * std::numeric_limits<double>::epsilon() * t.supply);
    CHECK(used <= t.supply * (1.0 + 2.0 * std::numeric_limits<double>::epsilon()));
    if (t.demand <= t.supply) CHECK(t.overflow == t.supply - t.demand);
    s = r.state;
  }
}

TEST_CASE("plant is deterministic") {
  const PlantParams p;
  auto run = [&] {
    Rng rng(11);
    std::uniform_real_distribution<double> valve(-1.0, 1.0);
    PlantState s = initial_state(p, Workspace{}.center(), 0);
    std::vector<StateVector> out;
    for (int k = 0; k < 500; ++k) {
      s = plant_step(s, p, command(valve(rng), valve(rng), valve(rng), p.gear_speeds[k / 200]), 700.0).state;
      out.push_back(s.x);
    }
    return out;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(same_bits(a[k], b[k]));
}

TEST_CASE("switching low to high gear raises every allocated flow") {
  const PlantParams p;
  const JointArray demand{1.4e-3, 2.0e-3, 1.8e-3};
  const JointArray none{0.0, 0.0, 0.0};
  double previous_supply = 0.0;
  JointArray previous{0.0, 0.0, 0.0};
  for (std::size_t g = 0; g < 3; ++g) {
    const double supply = p.supply_at(p.gear_speeds[g]);
    CHECK(supply > previous_supply);
    const JointArray a = allocate_flow(demand, none, supply, p.priority_penalty);
    for (std::size_t j = 0; j < 3; ++j) CHECK(a[j] > previous[j]);
    previous = a;
    previous_supply = supply;
  }
  // Same through the plant once the engine and spools have settled.
  const InputVector low = command(0.9, 0.9, 0.9, p.gear_speeds[0]);
  const InputVector high = command(0.9, 0.9, 0.9, p.gear_speeds[2]);
  const PlantState s0 = initial_state(p, Workspace{}.center(), 0);
  const auto a_low = plant_step(settle(p, s0, low, 0.0, 100), p, low, 0.0).telemetry;
  const auto a_high = plant_step(settle(p, s0, high, 0.0, 100), p, high, 0.0).telemetry;
  CHECK(a_low.demand > a_low.supply);
  for (std::size_t j = 0; j < 3; ++j) CHECK(a_high.allocated[j] > a_low.allocated[j]);
}

TEST_CASE("gear switches are timestamped") {
  const PlantParams p;
  PlantState s = initial_state(p, Workspace{}.center(), 0);
  s = settle(p, s, command(0, 0, 0, p.gear_speeds[0]), 0.0, 10);
  CHECK(s.last_switch_time < 0.0);
  s = plant_step(s, p, command(0, 0, 0, p.gear_speeds[2]), 0.0).state;
  CHECK(s.gear == 2);
  CHECK(s.last_switch_time == doctest::Approx(0.2));
  CHECK(p.nearest_gear(0.5 * (p.gear_speeds[0] + p.gear_speeds[1])) == 0);
  CHECK_THROWS_AS(plant_step(s, p, command(std::nan(""), 0, 0, 100), 0.0), SimulationError);
}

TEST_CASE("pid_step examples") {
  PidGains g;
  PidState st;
  const OutputVector r(0.2, 0.3, -1.0);
  InputVector u = pid_step(st, g, r, r, 157.0);
  CHECK(u.head<3>().cwiseAbs().maxCoeff() == 0.0);
  CHECK(u(3) == 157.0);

  PidGains p_only = g;
  p_only.ki = {0, 0, 0};
  p_only.kd = {0, 0, 0};
  p_only.kp = {1.0, 2.0, 0.5};
  PidState fresh;
  const OutputVector y(0.15, 0.32, -1.0 - 0.1);
  u = pid_step(fresh, p_only, r, y, 104.0);
  CHECK(u(0) == doctest::Approx(1.0 * 0.05 + 0.10));
  CHECK(u(1) == doctest::Approx(2.0 * -0.02 - 0.12));
  CHECK(u(2) == doctest::Approx(0.5 * 0.1 + 0.10));

  PidState sat;
  u = pid_step(sat, g, OutputVector(5, -5, 5), OutputVector::Zero(), 104.0);
  CHECK(u(0) == g.u_max);
  CHECK(u(1) == g.u_min);
  for (int k = 0; k < 1000; ++k) pid_step(sat, g, OutputVector(5, -5, 5), OutputVector::Zero(), 104.0);
  CHECK(std::abs(sat.integral[0]) <= g.integral_limit);
}

TEST_CASE("safety_check and forward kinematics") {
  const Workspace ws;
  StateVector x = StateVector::Zero();
  x.head<3>() = ws.center();
  CHECK(!safety_check(x, ws));
  x(1) = ws.q_max[1] + 1e-9;
  const auto v = safety_check(x, ws);
  REQUIRE(v);
  CHECK(v->kind == SafetyViolation::Kind::Joint);
  CHECK(v->joint == 1);
  Rng rng(5);
  std::uniform_real_distribution<double> ang(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const double q1 = ang(rng), q2 = ang(rng);
    // Rotate the link vectors as complex numbers.
    const std::complex<double> tip = std::complex<double>(ws.base_offset, 0.0) + std::polar(ws.boom_length, q1) +
                                     std::polar(ws.boom_length, q1) / ws.boom_length * std::polar(ws.arm_length, q2);
    const Cartesian c = forward_kinematics(ws, q1, q2);
    CHECK(c.radius == doctest::Approx(tip.real()).epsilon(1e-12));
    CHECK(c.height == doctest::Approx(tip.imag()).epsilon(1e-12));
  }
  x.head<3>() << 0.0, 0.0, ws.q_max[2] - 0.01;  // nearly straight, reaching out
  const auto far = safety_check(x, ws);
  REQUIRE(far);
  CHECK(far->kind == SafetyViolation::Kind::Cartesian);
}

TEST_CASE("open-loop collection: deterministic, zero amplitude, replay audit") {
  const PlantParams p;
  const Workspace ws;
  CollectConfig cfg;
  cfg.length = 600;
  const EpisodeStore a = collect_open_loop(p, ws, cfg, 6, 4);
  const EpisodeStore b = collect_open_loop(p, ws, cfg, 6, 4);
  REQUIRE(a.episodes.size() == 6);
  for (std::size_t e = 0; e < 6; ++e) {
    REQUIRE(a.episodes[e].states.size() == b.episodes[e].states.size());
    CHECK(a.episodes[e].states.size() == a.episodes[e].inputs.size());
    for (std::size_t k = 0; k < a.episodes[e].states.size(); ++k) {
      CHECK(same_bits(a.episodes[e].states[k], b.episodes[e].states[k]));
    }
    const auto& ep = a.episodes[e];
    const bool truncated = ep.states.size() < cfg.length;
    for (std::size_t k = 0; k < ep.states.size(); ++k) {
      const bool last = k + 1 == ep.states.size();
      if (!(truncated && last)) CHECK(!safety_check(ep.states[k], ws));
    }
    if (truncated) CHECK(safety_check(ep.states.back(), ws));
  }
  cfg.amp_min = cfg.amp_max = 0.0;
  const EpisodeStore still = collect_open_loop(p, ws, cfg, 2, 9);
  for (const auto& ep : still.episodes) {
    CHECK(ep.states.size() == cfg.length);
    for (std::size_t k = 0; k < ep.states.size(); ++k) {
      CHECK(ep.inputs[k].head<3>().cwiseAbs().maxCoeff() == 0.0);
      CHECK(ep.states[k] == ep.states[0]);
    }
  }
}

TEST_CASE("closed-loop collection: deterministic and audited") {
  const PlantParams p;
  const Workspace ws;
  CollectConfig cfg;
  cfg.length = 600;
  const EpisodeStore a = collect_closed_loop(p, ws, PidGains{}, cfg, 4, 8);
  const EpisodeStore b = collect_closed_loop(p, ws, PidGains{}, cfg, 4, 8);
  std::size_t moving = 0;
  for (std::size_t e = 0; e < a.episodes.size(); ++e) {
    const auto& ep = a.episodes[e];
    REQUIRE(ep.states.size() == b.episodes[e].states.size());
    const bool truncated = ep.states.size() < cfg.length;
    for (std::size_t k = 0; k < ep.states.size(); ++k) {
      CHECK(same_bits(ep.states[k], b.episodes[e].states[k]));
      CHECK(ep.inputs[k] == b.episodes[e].inputs[k]);
      if (!(truncated && k + 1 == ep.states.size())) CHECK(!safety_check(ep.states[k], ws));
    }
    if ((ep.states.back() - ep.states.front()).head<3>().norm() > 0.05) ++moving;
    CHECK(ep.meta.mode == CollectionMode::ClosedLoop);
  }
  CHECK(moving >= 3);
}

TEST_CASE("collection switches gear no faster than once a second") {
  const PlantParams p;
  CollectConfig cfg;
  const EpisodeStore s = collect_open_loop(p, Workspace{}, cfg, 4, 21);
  for (const auto& ep : s.episodes) {
    double last = -1e9;
    for (std::size_t k = 1; k < ep.inputs.size(); ++k) {
      if (ep.inputs[k](3) != ep.inputs[k - 1](3)) {
        const double t = static_cast<double>(k) * kControlPeriod;
        CHECK(t - last >= 1.0 - 1e-9);
        last = t;
      }
    }
  }
}

TEST_CASE("reference profiles") {
  const ReferenceProfile r = ReferenceProfile::parse("const 0.1; move 1 3 0.5; step 4 -0.2; sine 5 7 0.1 0.5");
  CHECK(r.value(0.5) == 0.1);
  CHECK(r.value(2.0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(r.value(3.5) == 0.5);
  CHECK(r.value(4.5) == -0.2);
  CHECK(r.value(5.5) == doctest::Approx(-0.2 + 0.1 * std::sin(M_PI * 0.5)).epsilon(1e-12));
  for (double t : {1.5, 2.2, 2.9, 5.3, 6.1}) {
    const double fd = (r.value(t + 1e-6) - r.value(t - 1e-6)) / 2e-6;
    CHECK(r.rate(t) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK_THROWS_AS(ReferenceProfile::parse("move 1 2 3"), ConfigError);
  CHECK_THROWS_AS(ReferenceProfile::parse("const 1; wiggle 2"), ConfigError);
  CHECK_THROWS_AS(ReferenceProfile::parse("const 1; move 2 1 0"), ConfigError);
}

TEST_CASE("scenario files parse and reject unknown keys") {
  const Scenario s = load_scenario(kScenarios / "loaded.kv");
  CHECK(s.load_at(4.9) == 0.0);
  CHECK(s.load_at(5.0) == 1500.0);
  CHECK(s.steps() == 1000);
  CHECK_THROWS_AS(parse_scenario(KeyValueFile::parse("ref.swing = const 0\nref.boom = const 0\nref.arm = const 0\nbogus = 1")),
                  ConfigError);
  CHECK_THROWS_AS(parse_scenario(KeyValueFile::parse("ref.swing = const 0\nref.boom = const 0")), ConfigError);
}

TEST_CASE("loaded scenario: PID loses control at low gear, not at high gear") {
  const PlantParams p;
  const Scenario s = load_scenario(kScenarios / "loaded.kv");
  const double t0 = 6.0;
  const auto low = run_pid_scenario(p, PidGains{}, s, 0);
  const auto high = run_pid_scenario(p, PidGains{}, s, 2);
  const double low_err = std::max(window_rms_error(low, 1, t0, s.duration), window_rms_error(low, 2, t0, s.duration));
  const double high_boom = window_rms_error(high, 1, t0, s.duration);
  const double high_arm = window_rms_error(high, 2, t0, s.duration);
  MESSAGE("low-gear worst " << low_err << ", high-gear boom " << high_boom << " arm " << high_arm);
  CHECK(low_err > 0.05);
  CHECK(high_boom < 0.02);
  CHECK(high_arm < 0.02);
}
