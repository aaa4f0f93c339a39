#pragma once

#include "hydronmpc/nn/optim.hpp"
#include "hydronmpc/ssmp/model.hpp"

#include <functional>
#include <vector>

namespace hnmpc {

struct OfflineTrainConfig {
  std::size_t iterations = 50000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::size_t trace_every = 100;
};

struct LossPoint {
  std::size_t iteration = 0;
  double loss = 0.0;
};

struct OfflineTrainResult {
  std::vector<LossPoint> trace;  // minibatch loss every trace_every iterations
  double final_loss = 0.0;
};

/// Windows with normalized tensors, gathered once before training.
class WindowBatcher {
 public:
  WindowBatcher(const SsmpModel& model, const EpisodeStore& store, std::vector<WindowRef> refs);

  std::size_t size() const { return refs_.size(); }
  /// Fills sequence (h matrices 13 x B), head future block (4N x B) and
  /// normalized targets (3N x B) for the given window positions.
  void gather(const std::vector<std::size_t>& picks, std::vector<Matrix>& sequence, Matrix& future,
              Matrix& targets) const;

 private:
  const SsmpModel& model_;
  const EpisodeStore& store_;
  std::vector<WindowRef> refs_;
  std::vector<Matrix> normalized_;  // per episode, 13 x L
};

/// Mean over the batch of ||z_pred - z_target||^2 in normalized output units.
double evaluate_loss(const SsmpModel& model, const EpisodeStore& store, const std::vector<WindowRef>& refs);

/// Joint Adam training of encoder and head on random minibatches.
/// Throws TrainingError if the loss becomes non-finite.
OfflineTrainResult train_offline(SsmpModel& model, const EpisodeStore& store,
                                 const std::vector<WindowRef>& refs, const OfflineTrainConfig& config);

}  // namespace hnmpc
