#pragma once

#include "hydronmpc/ssmp/dataset.hpp"
#include "hydronmpc/ssmp/model.hpp"
#include "hydronmpc/ssmp/train.hpp"

#include <filesystem>
#include <string>

namespace fixture {

inline hnmpc::SsmpModel small_model(const hnmpc::EpisodeStore& store, std::size_t h, std::size_t n,
                                    std::uint64_t seed, std::size_t hidden = 8) {
  hnmpc::SsmpDims dims;
  dims.history = h;
  dims.horizon = n;
  dims.lstm_hidden = hidden;
  dims.head_hidden = {12, 12};
  hnmpc::Rng rng(seed);
  return hnmpc::SsmpModel(dims, hnmpc::fit_normalizer(store, h, n), rng);
}

inline hnmpc::SsmpModel trained_model(const hnmpc::EpisodeStore& store, std::size_t h, std::size_t n,
                                      std::uint64_t seed, std::size_t iterations) {
  hnmpc::SsmpModel model = small_model(store, h, n, seed, 16);
  hnmpc::OfflineTrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_size = 16;
  cfg.seed = seed;
  hnmpc::train_offline(model, store, hnmpc::index_windows(store, h, n).refs, cfg);
  return model;
}

inline std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hydronmpc_test_" + name);
}

}  // namespace fixture
