#pragma once

#include "hydronmpc/online/residual.hpp"

#include <array>

namespace hnmpc {

struct AdaptationResult {
  std::array<double, 3> offline_armse{};  // per joint, over the scored cycles
  std::array<double, 3> hybrid_armse{};
  double offline_mean = 0.0;  // mean over joints
  double hybrid_mean = 0.0;
  std::size_t cycles = 0;
  std::size_t rollbacks = 0;

  /// 100 * (1 - hybrid / offline) on the joint means.
  double percent_decrease() const;
};

/// Replays a recorded episode as a stream of control cycles. At cycle t the
/// offline and hybrid predictors forecast Y_{t+1:t+N} from the applied
/// inputs, the window that completed N cycles ago enters the buffer, and
/// `loops` update passes run. Cycles in [score_begin, score_end) are scored.
AdaptationResult replay_adaptation(const SsmpModel& offline, ResidualModel& online, const Episode& episode,
                                   std::size_t score_begin, std::size_t score_end, std::size_t loops);

}  // namespace hnmpc
