#pragma once

#include "hydronmpc/ssmp/types.hpp"

#include <filesystem>
#include <vector>

namespace hnmpc {

enum class TargetMode { Delta = 0, Absolute = 1 };

/// Position of a training window inside a store: window ending at time t.
struct WindowRef {
  std::size_t episode = 0;
  std::size_t t = 0;
};

struct WindowSample {
  HistoryWindow window;
  InputSequence future_inputs;  // N x 4
  OutputSequence target;        // N x 3
};

struct WindowIndex {
  std::vector<WindowRef> refs;
  std::size_t skipped_episodes = 0;  // shorter than h + N + 1
};

/// Enumerates every valid window: t in [h, L - 1 - N] for each episode.
WindowIndex index_windows(const EpisodeStore& store, std::size_t history, std::size_t horizon);

HistoryWindow window_at(const Episode& episode, std::size_t t, std::size_t history);
InputSequence future_inputs_at(const Episode& episode, std::size_t t, std::size_t horizon);
/// Realized joint angles q_{t+1..t+N}.
OutputSequence realized_outputs_at(const Episode& episode, std::size_t t, std::size_t horizon);
/// Delta mode: q_{t+1+i} - q_{t-1}. Absolute mode: q_{t+1+i}.
OutputSequence target_at(const Episode& episode, std::size_t t, std::size_t horizon,
                         TargetMode mode = TargetMode::Delta);

/// Materialized windows with delta targets.
std::vector<WindowSample> build_windows(const EpisodeStore& store, std::size_t history,
                                        std::size_t horizon, std::size_t* skipped = nullptr);

/// Splits episodes: the final `fraction` of episodes (at least one when
/// there are two or more) go to the second store.
std::pair<EpisodeStore, EpisodeStore> split_validation(const EpisodeStore& store, double fraction);

/// Dataset directory: manifest.csv plus one episode_NNNN.csv per episode.
void write_dataset(const std::filesystem::path& dir, const EpisodeStore& store);
EpisodeStore read_dataset(const std::filesystem::path& dir);

void write_episode_csv(const std::filesystem::path& file, const Episode& episode, double dt);
Episode read_episode_csv(const std::filesystem::path& file);

}  // namespace hnmpc
