#pragma once

#include "hydronmpc/plant/pid.hpp"
#include "hydronmpc/plant/plant.hpp"

namespace hnmpc {

struct CollectConfig {
  std::size_t length = 1000;      // samples per episode
  double amp_min = 0.2;           // valve sine amplitude range (open loop)
  double amp_max = 1.0;
  double freq_min = 0.15;         // Hz
  double freq_max = 1.0;
  double step_hold_min = 0.04;    // s, stepped open-loop episodes
  double step_hold_max = 0.6;
  double ref_fraction = 0.85;     // closed-loop references stay in this share of the box
  double ref_freq_min = 0.05;
  double ref_freq_max = 0.35;
  double gear_hold_min = 1.0;     // s between random gear changes
  double gear_hold_max = 4.0;
  double load_mass = 0.0;
};

/// Random-amplitude, random-frequency sine on every valve (even episodes) or
/// random levels held for random spans (odd episodes), and a random gear
/// schedule. A safety violation halts the input and ends the episode; the
/// violating sample is kept as the last one.
EpisodeStore collect_open_loop(const PlantParams& params, const Workspace& ws, const CollectConfig& cfg,
                               std::size_t episodes, std::uint64_t seed);

/// PID tracking of random references inside the workspace: even episodes
/// use sums of sines, odd ones cosine moves between random targets with
/// rests. Same gear schedule and truncation rule as the open-loop case.
EpisodeStore collect_closed_loop(const PlantParams& params, const Workspace& ws, const PidGains& gains,
                                 const CollectConfig& cfg, std::size_t episodes, std::uint64_t seed);

}  // namespace hnmpc
