#include "hydronmpc/plant/scenario.hpp"

#include "hydronmpc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hnmpc {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double blend(double s) { return 0.5 - 0.5 * std::cos(M_PI * s); }

}  // namespace

ReferenceProfile::ReferenceProfile(double constant) : start_(constant) {}

ReferenceProfile ReferenceProfile::parse(const std::string& spec, const std::string& what) {
  ReferenceProfile p;
  bool have_start = false;
  double last_time = -1e300;
  for (const auto& part : split_tokens(spec, ";")) {
    const auto tok = split_tokens(part, " \t");
    auto num = [&](std::size_t i) {
      if (i >= tok.size()) throw ConfigError(what + ": missing field in '" + part + "'");
      return parse_double(tok[i], what);
    };
    auto need = [&](std::size_t n) {
      if (tok.size() != n) throw ConfigError(what + ": wrong field count in '" + part + "'");
    };
    if (tok[0] == "const") {
      need(2);
      if (have_start) throw ConfigError(what + ": 'const' must come first and only once");
      p.start_ = num(1);
      have_start = true;
      continue;
    }
    if (!have_start) throw ConfigError(what + ": profile must start with 'const'");
    Segment s{};
    if (tok[0] == "move") {
      need(4);
      s = {Segment::Kind::Move, num(1), num(2), num(3), 0.0};
      if (!(s.t1 > s.t0)) throw ConfigError(what + ": move needs t1 > t0");
    } else if (tok[0] == "step") {
      need(3);
      s = {Segment::Kind::Step, num(1), num(1), num(2), 0.0};
    } else if (tok[0] == "sine") {
      need(5);
      s = {Segment::Kind::Sine, num(1), num(2), num(3), num(4)};
      if (!(s.t1 > s.t0)) throw ConfigError(what + ": sine needs t1 > t0");
    } else {
      throw ConfigError(what + ": unknown segment '" + tok[0] + "'");
    }
    if (s.kind != Segment::Kind::Sine) {
      if (s.t0 < last_time) throw ConfigError(what + ": move/step segments must be in time order");
      last_time = s.t1;
    }
    p.segments_.push_back(s);
  }
  if (!have_start) throw ConfigError(what + ": empty profile");
  return p;
}

double ReferenceProfile::value(double t) const {
  double v = start_;
  double extra = 0.0;
  for (const auto& s : segments_) {
    switch (s.kind) {
      case Segment::Kind::Move:
        if (t >= s.t1) v = s.a;
        else if (t > s.t0) v = v + (s.a - v) * blend((t - s.t0) / (s.t1 - s.t0));
        break;
      case Segment::Kind::Step:
        if (t >= s.t0) v = s.a;
        break;
      case Segment::Kind::Sine:
        if (t >= s.t0 && t <= s.t1) extra += s.a * std::sin(kTwoPi * s.b * (t - s.t0));
        break;
    }
  }
  return v + extra;
}

double ReferenceProfile::rate(double t) const {
  double v = start_;
  double r = 0.0;
  for (const auto& s : segments_) {
    switch (s.kind) {
      case Segment::Kind::Move:
        if (t >= s.t1) {
          v = s.a;
          r = 0.0;
        } else if (t > s.t0) {
          const double span = s.t1 - s.t0;
          const double x = (t - s.t0) / span;
          r = (s.a - v) * 0.5 * M_PI * std::sin(M_PI * x) / span;
          v = v + (s.a - v) * blend(x);
        }
        break;
      case Segment::Kind::Step:
        if (t >= s.t0) {
          v = s.a;
          r = 0.0;
        }
        break;
      case Segment::Kind::Sine:
        break;
    }
  }
  for (const auto& s : segments_) {
    if (s.kind == Segment::Kind::Sine && t >= s.t0 && t <= s.t1) {
      r += s.a * kTwoPi * s.b * std::cos(kTwoPi * s.b * (t - s.t0));
    }
  }
  return r;
}

double Scenario::load_at(double t) const {
  double m = 0.0;
  for (const auto& e : load_schedule) {
    if (t + 1e-9 >= e.time) m = e.mass;
  }
  return m;
}

OutputVector Scenario::reference_at(double t) const {
  OutputVector r;
  for (std::size_t j = 0; j < kJointCount; ++j) r(static_cast<Eigen::Index>(j)) = reference[j].value(t);
  return r;
}

OutputVector Scenario::reference_rate_at(double t) const {
  OutputVector r;
  for (std::size_t j = 0; j < kJointCount; ++j) r(static_cast<Eigen::Index>(j)) = reference[j].rate(t);
  return r;
}

std::size_t Scenario::steps(double dt) const { return static_cast<std::size_t>(std::llround(duration / dt)); }

Scenario parse_scenario(const KeyValueFile& kv) {
  Scenario s;
  s.name = kv.get_string("name", s.name);
  s.duration = kv.get_double("duration", s.duration);
  if (!(s.duration > 0.0)) throw ConfigError(kv.origin() + ": duration must be positive");
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const std::string key = std::string("ref.") + kJointNames[j];
    const auto spec = kv.raw(key);
    if (!spec) throw ConfigError(kv.origin() + ": missing " + key);
    s.reference[j] = ReferenceProfile::parse(*spec, kv.origin() + ": " + key);
  }
  if (const auto load = kv.raw("load.schedule")) {
    for (const auto& item : split_tokens(*load, ",")) {
      const auto tok = split_tokens(item, " \t");
      if (tok.size() != 2) throw ConfigError(kv.origin() + ": load.schedule entries are 'time mass'");
      const LoadEvent e{parse_double(tok[0], "load time"), parse_double(tok[1], "load mass")};
      if (e.mass < 0.0) throw ConfigError(kv.origin() + ": negative load mass");
      if (!s.load_schedule.empty() && e.time < s.load_schedule.back().time) {
        throw ConfigError(kv.origin() + ": load.schedule must be sorted by time");
      }
      s.load_schedule.push_back(e);
    }
  }
  s.controller = kv.get_string("controller", s.controller);
  if (s.controller != "nmpc" && s.controller != "pid") {
    throw ConfigError(kv.origin() + ": controller must be 'nmpc' or 'pid'");
  }
  const long long gear = kv.get_int("pid_gear", static_cast<long long>(s.pid_gear));
  const long long start_gear = kv.get_int("start_gear", static_cast<long long>(s.start_gear));
  if (gear < 0 || gear > 2 || start_gear < 0 || start_gear > 2) {
    throw ConfigError(kv.origin() + ": gear indices are 0 (low), 1 (medium), 2 (high)");
  }
  s.pid_gear = static_cast<std::size_t>(gear);
  s.start_gear = static_cast<std::size_t>(start_gear);
  s.extraction = kv.get_string("extraction", s.extraction);
  if (s.extraction != "mean" && s.extraction != "first") {
    throw ConfigError(kv.origin() + ": extraction must be 'mean' or 'first'");
  }
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(s.seed)));
  s.score_from = kv.get_double("score_from", s.score_from);
  if (s.score_from < 0.0 || s.score_from >= s.duration) {
    throw ConfigError(kv.origin() + ": score_from must lie inside the run");
  }
  kv.reject_unused();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(KeyValueFile::load(path)); }

}  // namespace hnmpc
