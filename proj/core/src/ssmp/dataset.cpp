#include "hydronmpc/ssmp/dataset.hpp"

#include "hydronmpc/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace hnmpc {
namespace {

const char* kEpisodeHeader =
    "t,q_swing,q_boom,q_arm,qd_swing,qd_boom,qd_arm,qdd_swing,qdd_boom,qdd_arm,"
    "u_swing,u_boom,u_arm,omega_engine";

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

WindowIndex index_windows(const EpisodeStore& store, std::size_t history, std::size_t horizon) {
  if (history == 0 || horizon == 0) throw ConfigError("index_windows: h and N must be positive");
  WindowIndex index;
  for (std::size_t e = 0; e < store.episodes.size(); ++e) {
    const std::size_t len = store.episodes[e].size();
    if (len < history + horizon + 1 || history < 1) {
      ++index.skipped_episodes;
      continue;
    }
    // The anchor X_{t-1} must exist, so h = 1 still needs t >= 1.
    const std::size_t first = std::max<std::size_t>(history, 1);
    for (std::size_t t = first; t + horizon <= len - 1; ++t) index.refs.push_back({e, t});
  }
  return index;
}

HistoryWindow window_at(const Episode& ep, std::size_t t, std::size_t history) {
  if (t < history || t < 1 || t >= ep.size()) throw ContractError("window_at: t out of range");
  HistoryWindow w;
  w.states.reserve(history);
  w.inputs.reserve(history);
  for (std::size_t k = 0; k < history; ++k) {
    w.states.push_back(ep.states[t - history + 1 + k]);
    w.inputs.push_back(ep.inputs[t - history + k]);
  }
  w.anchor_state = ep.states[t - 1];
  return w;
}

InputSequence future_inputs_at(const Episode& ep, std::size_t t, std::size_t horizon) {
  if (t + horizon > ep.inputs.size()) throw ContractError("future_inputs_at: horizon past episode end");
  InputSequence u(static_cast<Eigen::Index>(horizon), 4);
  for (std::size_t i = 0; i < horizon; ++i) u.row(static_cast<Eigen::Index>(i)) = ep.inputs[t + i].transpose();
  return u;
}

OutputSequence realized_outputs_at(const Episode& ep, std::size_t t, std::size_t horizon) {
  if (t + horizon >= ep.size()) throw ContractError("realized_outputs_at: horizon past episode end");
  OutputSequence y(static_cast<Eigen::Index>(horizon), 3);
  for (std::size_t i = 0; i < horizon; ++i) {
    y.row(static_cast<Eigen::Index>(i)) = select_output(ep.states[t + 1 + i]).transpose();
  }
  return y;
}

OutputSequence target_at(const Episode& ep, std::size_t t, std::size_t horizon, TargetMode mode) {
  OutputSequence y = realized_outputs_at(ep, t, horizon);
  if (mode == TargetMode::Delta) {
    const OutputVector anchor = select_output(ep.states[t - 1]);
    y.rowwise() -= anchor.transpose();
  }
  return y;
}

std::vector<WindowSample> build_windows(const EpisodeStore& store, std::size_t history,
                                        std::size_t horizon, std::size_t* skipped) {
  const WindowIndex index = index_windows(store, history, horizon);
  if (skipped != nullptr) *skipped = index.skipped_episodes;
  std::vector<WindowSample> out;
  out.reserve(index.refs.size());
  for (const auto& r : index.refs) {
    const Episode& ep = store.episodes[r.episode];
    out.push_back({window_at(ep, r.t, history), future_inputs_at(ep, r.t, horizon),
                   target_at(ep, r.t, horizon)});
  }
  return out;
}

std::pair<EpisodeStore, EpisodeStore> split_validation(const EpisodeStore& store, double fraction) {
  EpisodeStore train, valid;
  train.dt = valid.dt = store.dt;
  const std::size_t n = store.episodes.size();
  std::size_t n_valid = static_cast<std::size_t>(static_cast<double>(n) * fraction + 0.5);
  if (n >= 2 && n_valid == 0 && fraction > 0.0) n_valid = 1;
  if (n_valid >= n) n_valid = n > 0 ? n - 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - n_valid ? train : valid).episodes.push_back(store.episodes[i]);
  }
  return {std::move(train), std::move(valid)};
}

void write_episode_csv(const std::filesystem::path& file, const Episode& ep, double dt) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << kEpisodeHeader << '\n';
  for (std::size_t k = 0; k < ep.size(); ++k) {
    out << fmt_double(static_cast<double>(k) * dt);
    for (int i = 0; i < 9; ++i) out << ',' << fmt_double(ep.states[k](i));
    const InputVector u = k < ep.inputs.size() ? ep.inputs[k] : InputVector::Zero();
    for (int i = 0; i < 4; ++i) out << ',' << fmt_double(u(i));
    out << '\n';
  }
}

Episode read_episode_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line != kEpisodeHeader) throw FormatError(file.string() + ": unexpected header");
  Episode ep;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 14) throw FormatError(file.string() + ":" + std::to_string(lineno) + ": expected 14 columns");
    StateVector x;
    InputVector u;
    for (int i = 0; i < 9; ++i) x(i) = parse_double(cells[static_cast<std::size_t>(1 + i)], file, lineno);
    for (int i = 0; i < 4; ++i) u(i) = parse_double(cells[static_cast<std::size_t>(10 + i)], file, lineno);
    ep.states.push_back(x);
    ep.inputs.push_back(u);
  }
  return ep;
}

void write_dataset(const std::filesystem::path& dir, const EpisodeStore& store) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
  if (!manifest) throw ConfigError("cannot write manifest in " + dir.string());
  manifest << "file,mode,seed,load_kg,samples,dt\n";
  for (std::size_t i = 0; i < store.episodes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04zu.csv", i);
    const Episode& ep = store.episodes[i];
    write_episode_csv(dir / name, ep, store.dt);
    manifest << name << ',' << to_string(ep.meta.mode) << ',' << ep.meta.seed << ','
             << fmt_double(ep.meta.load_kg) << ',' << ep.size() << ',' << fmt_double(store.dt) << '\n';
  }
}

EpisodeStore read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw ConfigError("no manifest.csv in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  if (line != "file,mode,seed,load_kg,samples,dt") throw FormatError("manifest.csv: unexpected header");
  EpisodeStore store;
  std::size_t lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) throw FormatError("manifest.csv:" + std::to_string(lineno) + ": expected 6 columns");
    Episode ep = read_episode_csv(dir / cells[0]);
    ep.meta.mode = collection_mode_from_string(cells[1]);
    ep.meta.seed = std::stoull(cells[2]);
    ep.meta.load_kg = parse_double(cells[3], dir / "manifest.csv", lineno);
    if (ep.size() != std::stoull(cells[4])) {
      throw FormatError(cells[0] + ": sample count disagrees with manifest");
    }
    store.dt = parse_double(cells[5], dir / "manifest.csv", lineno);
    store.episodes.push_back(std::move(ep));
  }
  return store;
}

}  // namespace hnmpc
