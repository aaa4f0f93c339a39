#pragma once

#include "hydronmpc/plant/collect.hpp"
#include "hydronmpc/ssmp/train.hpp"

#include <array>

namespace hnmpc {

struct DatasetRecipe {
  std::size_t open_loop_episodes = 30;
  std::size_t closed_loop_episodes = 30;
  CollectConfig collect;
  std::uint64_t seed = 1;
};

/// Open-loop episodes followed by closed-loop ones.
EpisodeStore build_dataset(const PlantParams& params, const DatasetRecipe& recipe);

struct TrainRecipe {
  SsmpDims dims{10, 10, 64, {64, 64}, TargetMode::Delta};
  OfflineTrainConfig train;
  double validation_fraction = 0.2;
};

struct Armse3 {
  std::array<double, 3> joint{};
  double mean = 0.0;
  std::size_t windows = 0;
};

/// Per-window horizon RMSE against realized angles, averaged over windows.
Armse3 prediction_armse(const SsmpModel& model, const EpisodeStore& store);

struct TrainedModel {
  SsmpModel model;
  OfflineTrainResult result;
  Armse3 validation;
};

/// Episode-level split, normalizer fitted on the training part only.
TrainedModel train_recipe(const EpisodeStore& store, const TrainRecipe& recipe);

}  // namespace hnmpc
