#pragma once

#include "hydronmpc/plant/plant.hpp"
#include "hydronmpc/util/keyvalue.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hnmpc {

/// Piecewise reference for one joint, built left to right:
///   const v              start value
///   move t0 t1 v         cosine blend from the current value to v over [t0, t1]
///   step t v             jump to v at t
///   sine t0 t1 amp freq  additive amp * sin(2 pi freq (t - t0)) on [t0, t1]
/// Segments are separated by ';'.
class ReferenceProfile {
 public:
  ReferenceProfile() = default;
  explicit ReferenceProfile(double constant);
  static ReferenceProfile parse(const std::string& spec, const std::string& what = "reference");

  double value(double t) const;
  double rate(double t) const;
  double start() const { return start_; }

 private:
  struct Segment {
    enum class Kind { Move, Step, Sine } kind;
    double t0, t1, a, b;  // move: target a; step: value a; sine: amp a, freq b
  };
  double start_ = 0.0;
  std::vector<Segment> segments_;
};

struct LoadEvent {
  double time = 0.0;
  double mass = 0.0;
};

struct Scenario {
  std::string name = "scenario";
  double duration = 20.0;
  std::array<ReferenceProfile, kJointCount> reference;
  std::vector<LoadEvent> load_schedule;  // step changes, sorted by time
  std::string controller = "nmpc";       // nmpc | pid
  std::size_t pid_gear = 2;
  std::size_t start_gear = 0;
  std::string extraction = "mean";       // mean | first
  std::uint64_t seed = 1;
  double score_from = 0.0;               // s, start of the tracking-error window

  double load_at(double t) const;
  OutputVector reference_at(double t) const;
  OutputVector reference_rate_at(double t) const;
  std::size_t steps(double dt = kControlPeriod) const;
};

/// Keys: name, duration, ref.swing / ref.boom / ref.arm, load.schedule
/// ("t mass, t mass, ..."), controller, pid_gear, start_gear, extraction, seed.
Scenario parse_scenario(const KeyValueFile& kv);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace hnmpc
