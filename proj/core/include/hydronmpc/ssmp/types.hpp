#pragma once

#include "hydronmpc/nn/matrix.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hnmpc {

inline constexpr std::size_t kJointCount = 3;
inline constexpr std::size_t kStateDim = 9;   // n
inline constexpr std::size_t kInputDim = 4;   // m
inline constexpr std::size_t kOutputDim = 3;  // l
inline constexpr double kControlPeriod = 0.02;

enum class Joint : std::size_t { Swing = 0, Boom = 1, Arm = 2 };
inline constexpr std::array<const char*, kJointCount> kJointNames{"swing", "boom", "arm"};

/// [q_swing, q_boom, q_arm, qd_*, qdd_*] in rad, rad/s, rad/s^2.
using StateVector = Eigen::Matrix<double, 9, 1>;
/// [u_swing, u_boom, u_arm, omega_engine]; valves in [-1, 1], omega in rad/s.
using InputVector = Eigen::Matrix<double, 4, 1>;
/// Joint angles selected from a state.
using OutputVector = Eigen::Matrix<double, 3, 1>;

inline constexpr std::size_t angle_index(std::size_t joint) { return joint; }
inline constexpr std::size_t velocity_index(std::size_t joint) { return 3 + joint; }
inline constexpr std::size_t acceleration_index(std::size_t joint) { return 6 + joint; }
inline constexpr std::size_t kEngineChannel = 3;

/// Constant output selector C: one unit entry per row picking q_j.
Eigen::Matrix<double, 3, 9> output_selector();
inline OutputVector select_output(const StateVector& x) { return x.head<3>(); }

/// h past states X_{t-h+1..t}, paired with the inputs U_{t-h..t-1} that led
/// into them, plus the anchor X_{t-1}.
struct HistoryWindow {
  std::vector<StateVector> states;
  std::vector<InputVector> inputs;
  StateVector anchor_state = StateVector::Zero();

  std::size_t length() const { return states.size(); }
  OutputVector anchor_output() const { return select_output(anchor_state); }
};

/// Future input sequence U_{t..t+N-1}, one row per step.
using InputSequence = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;
/// Predicted or realized joint angles over the horizon, one row per step.
using OutputSequence = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Row-major flattening [row0..., row1..., ...].
Vector flatten_rows(const InputSequence& seq);
Vector flatten_rows(const OutputSequence& seq);
OutputSequence unflatten_outputs(const Vector& flat);
InputSequence unflatten_inputs(const Vector& flat);

enum class CollectionMode { OpenLoop, ClosedLoop, Scenario };
std::string to_string(CollectionMode mode);
CollectionMode collection_mode_from_string(const std::string& s);

struct EpisodeMeta {
  CollectionMode mode = CollectionMode::OpenLoop;
  std::uint64_t seed = 0;
  double load_kg = 0.0;
};

/// Uniformly sampled trajectory; inputs[k] is applied at step k and produces
/// states[k + 1].
struct Episode {
  std::vector<StateVector> states;
  std::vector<InputVector> inputs;
  EpisodeMeta meta;

  std::size_t size() const { return states.size(); }
};

struct EpisodeStore {
  std::vector<Episode> episodes;
  double dt = kControlPeriod;

  std::size_t total_samples() const;
};

}  // namespace hnmpc
