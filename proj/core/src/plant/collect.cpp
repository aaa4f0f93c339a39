#include "hydronmpc/plant/collect.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/nn/matrix.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace hnmpc {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Gear changes at random times at least hold_min apart.
class GearSchedule {
 public:
  GearSchedule(const CollectConfig& cfg, Rng& rng)
      : cfg_(cfg), rng_(rng), gear_(std::uniform_int_distribution<int>(0, 2)(rng)) {
    next_ = uniform(rng_, cfg_.gear_hold_min, cfg_.gear_hold_max);
  }
  std::size_t gear() const { return static_cast<std::size_t>(gear_); }
  std::size_t at(double t) {
    if (t >= next_) {
      gear_ = (gear_ + std::uniform_int_distribution<int>(1, 2)(rng_)) % 3;
      next_ = t + uniform(rng_, cfg_.gear_hold_min, cfg_.gear_hold_max);
    }
    return gear();
  }

 private:
  const CollectConfig& cfg_;
  Rng& rng_;
  int gear_;
  double next_;
};

OutputVector random_start(const Workspace& ws, Rng& rng, double spread) {
  OutputVector q;
  const OutputVector c = ws.center();
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const double half = 0.5 * (ws.q_max[j] - ws.q_min[j]);
    q(static_cast<Eigen::Index>(j)) = c(static_cast<Eigen::Index>(j)) + spread * half * uniform(rng, -1.0, 1.0);
  }
  return q;
}

/// Moves an unsafe start toward the workspace center until it is safe.
OutputVector safe_start(const Workspace& ws, OutputVector q) {
  const OutputVector c = ws.center();
  for (int k = 0; k < 20; ++k) {
    StateVector x = StateVector::Zero();
    x.head<3>() = q;
    if (!safety_check(x, ws)) return q;
    q = 0.5 * (q + c);
  }
  return c;
}

void check_config(const CollectConfig& cfg) {
  if (cfg.length < 2) throw ConfigError("collect: episode length must be at least 2");
  if (cfg.amp_min < 0.0 || cfg.amp_max < cfg.amp_min) throw ConfigError("collect: bad amplitude range");
  if (!(cfg.freq_min > 0.0) || cfg.freq_max < cfg.freq_min) throw ConfigError("collect: bad frequency range");
  if (cfg.gear_hold_min < 1.0 || cfg.gear_hold_max < cfg.gear_hold_min) {
    throw ConfigError("collect: gear holds must be at least 1 s");
  }
  if (!(cfg.step_hold_min > 0.0) || cfg.step_hold_max < cfg.step_hold_min) {
    throw ConfigError("collect: bad step hold range");
  }
}

template <typename Policy>
Episode run_episode(const PlantParams& params, const Workspace& ws, const CollectConfig& cfg,
                    const OutputVector& start, GearSchedule& gears, Policy&& policy) {
  PlantState s = initial_state(params, start, gears.gear(), cfg.load_mass);
  Episode ep;
  ep.meta.load_kg = cfg.load_mass;
  for (std::size_t k = 0; k < cfg.length; ++k) {
    const double t = static_cast<double>(k) * kControlPeriod;
    const double omega = params.gear_speeds[gears.at(t)];
    ep.states.push_back(s.x);
    if (safety_check(s.x, ws)) {
      // Halt: the last sample carries closed valves and ends the episode.
      InputVector halt = InputVector::Zero();
      halt(kEngineChannel) = omega;
      ep.inputs.push_back(halt);
      break;
    }
    const InputVector u = policy(t, s, omega);
    ep.inputs.push_back(u);
    s = plant_step(s, params, u, cfg.load_mass).state;
  }
  return ep;
}

}  // namespace

EpisodeStore collect_open_loop(const PlantParams& params, const Workspace& ws, const CollectConfig& cfg,
                               std::size_t episodes, std::uint64_t seed) {
  params.validate();
  check_config(cfg);
  EpisodeStore store;
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng(seed * 1000003ULL + e);
    std::array<double, 3> amp{}, freq{}, phase{};
    for (std::size_t j = 0; j < kJointCount; ++j) {
      amp[j] = uniform(rng, cfg.amp_min, cfg.amp_max);
      freq[j] = uniform(rng, cfg.freq_min, cfg.freq_max);
      phase[j] = uniform(rng, 0.0, kTwoPi);
    }
    const OutputVector start = safe_start(ws, random_start(ws, rng, 0.3));
    GearSchedule gears(cfg, rng);
    // Odd episodes hold random levels for random short spans instead.
    const bool stepped = e % 2 == 1;
    std::array<double, 3> level{}, next_change{};
    Episode ep = run_episode(params, ws, cfg, start, gears, [&](double t, const PlantState&, double omega) {
      InputVector u;
      for (std::size_t j = 0; j < kJointCount; ++j) {
        if (stepped) {
          if (t >= next_change[j]) {
            level[j] = amp[j] * uniform(rng, -1.0, 1.0);
            next_change[j] = t + uniform(rng, cfg.step_hold_min, cfg.step_hold_max);
          }
          u(static_cast<Eigen::Index>(j)) = level[j];
        } else {
          u(static_cast<Eigen::Index>(j)) = amp[j] * std::sin(kTwoPi * freq[j] * t + phase[j]);
        }
      }
      u(kEngineChannel) = omega;
      return u;
    });
    ep.meta.mode = CollectionMode::OpenLoop;
    ep.meta.seed = seed * 1000003ULL + e;
    store.episodes.push_back(std::move(ep));
  }
  return store;
}

EpisodeStore collect_closed_loop(const PlantParams& params, const Workspace& ws, const PidGains& gains,
                                 const CollectConfig& cfg, std::size_t episodes, std::uint64_t seed) {
  params.validate();
  check_config(cfg);
  EpisodeStore store;
  const OutputVector center = ws.center();
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng(seed * 2000003ULL + e + 17);
    const double duration = static_cast<double>(cfg.length) * kControlPeriod;
    std::array<std::function<double(double)>, kJointCount> ref;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const double half = cfg.ref_fraction * 0.5 * (ws.q_max[j] - ws.q_min[j]);
      const double c = center(static_cast<Eigen::Index>(j));
      if (e % 2 == 0) {
        const double share = uniform(rng, 0.3, 1.0);
        const double offset = (1.0 - share) * half * uniform(rng, -1.0, 1.0);
        const double a1 = share * half * uniform(rng, 0.3, 0.7);
        const double a2 = share * half - a1;
        const double f1 = uniform(rng, cfg.ref_freq_min, cfg.ref_freq_max);
        const double f2 = uniform(rng, cfg.ref_freq_min, cfg.ref_freq_max);
        const double p1 = uniform(rng, 0.0, kTwoPi), p2 = uniform(rng, 0.0, kTwoPi);
        ref[j] = [=](double t) {
          return c + offset + a1 * std::sin(kTwoPi * f1 * t + p1) + a2 * std::sin(kTwoPi * f2 * t + p2);
        };
      } else {
        // Cosine moves between random targets separated by random rests.
        std::vector<std::array<double, 3>> moves;  // t0, t1, target
        double t = 0.0;
        double v = c + half * uniform(rng, -0.6, 0.6);
        const double v0 = v;
        while (t < duration) {
          const double rest = uniform(rng, 0.2, 2.0);
          const double span = uniform(rng, 0.8, 3.0);
          const double target = c + half * uniform(rng, -1.0, 1.0);
          moves.push_back({t + rest, t + rest + span, target});
          t += rest + span;
          v = target;
        }
        ref[j] = [moves, v0](double time) {
          double value = v0;
          for (const auto& m : moves) {
            if (time >= m[1]) value = m[2];
            else if (time > m[0]) value += (m[2] - value) * (0.5 - 0.5 * std::cos(M_PI * (time - m[0]) / (m[1] - m[0])));
          }
          return value;
        };
      }
    }
    OutputVector start;
    for (std::size_t j = 0; j < kJointCount; ++j) start(static_cast<Eigen::Index>(j)) = ref[j](0.0);
    start = safe_start(ws, start);
    GearSchedule gears(cfg, rng);
    PidState pid;
    Episode ep = run_episode(params, ws, cfg, start, gears, [&](double t, const PlantState& s, double omega) {
      OutputVector r;
      for (std::size_t j = 0; j < kJointCount; ++j) r(static_cast<Eigen::Index>(j)) = ref[j](t);
      return pid_step(pid, gains, r, select_output(s.x), omega);
    });
    ep.meta.mode = CollectionMode::ClosedLoop;
    ep.meta.seed = seed * 2000003ULL + e + 17;
    store.episodes.push_back(std::move(ep));
  }
  return store;
}

}  // namespace hnmpc
