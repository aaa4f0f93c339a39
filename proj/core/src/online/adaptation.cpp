#include "hydronmpc/online/adaptation.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/harness/metrics.hpp"
#include "hydronmpc/ssmp/dataset.hpp"

#include <algorithm>

namespace hnmpc {

double AdaptationResult::percent_decrease() const {
  return offline_mean > 0.0 ? 100.0 * (1.0 - hybrid_mean / offline_mean) : 0.0;
}

AdaptationResult replay_adaptation(const SsmpModel& offline, ResidualModel& online, const Episode& episode,
                                   std::size_t score_begin, std::size_t score_end, std::size_t loops) {
  const std::size_t h = offline.history();
  const std::size_t n = offline.horizon();
  const std::size_t first = std::max<std::size_t>(h, 1);
  if (episode.states.size() < first + n + 1) throw ConfigError("replay_adaptation: episode too short");
  const std::size_t last = episode.states.size() - 1 - n;  // inclusive
  score_end = std::min(score_end, last + 1);

  struct Pending {
    HistoryWindow window;
    InputSequence applied;
    OutputSequence offline;
  };
  std::vector<Pending> pending(episode.states.size());

  MismatchBuffer buffer(online.config().capacity);
  std::array<Armse, 3> off_acc, hyb_acc;
  AdaptationResult result;

  for (std::size_t t = first; t <= last; ++t) {
    Pending p{window_at(episode, t, h), future_inputs_at(episode, t, n), {}};
    const Vector feature = offline.encode(p.window);
    p.offline = offline.predict_from_feature(feature, p.window.anchor_output(), p.applied);
    if (t >= score_begin && t < score_end) {
      const OutputSequence hybrid = p.offline + online.predict_residual(p.window, p.applied);
      const OutputSequence truth = realized_outputs_at(episode, t, n);
      for (int j = 0; j < 3; ++j) {
        off_acc[j].add(rmse(truth.col(j), p.offline.col(j)));
        hyb_acc[j].add(rmse(truth.col(j), hybrid.col(j)));
      }
      ++result.cycles;
    }
    pending[t] = std::move(p);

    // Y_{t-N+1..t} is now measured: the window from N cycles ago is complete.
    if (t >= first + n) {
      Pending& done = pending[t - n];
      buffer.push({std::move(done.window), std::move(done.applied), std::move(done.offline),
                   realized_outputs_at(episode, t - n, n)});
      const OnlineUpdateResult upd = online_update(online, buffer, loops);
      if (upd.rolled_back) ++result.rollbacks;
    }
  }

  if (result.cycles == 0) throw ConfigError("replay_adaptation: empty scoring window");
  for (int j = 0; j < 3; ++j) {
    result.offline_armse[j] = off_acc[j].value();
    result.hybrid_armse[j] = hyb_acc[j].value();
    result.offline_mean += result.offline_armse[j] / 3.0;
    result.hybrid_mean += result.hybrid_armse[j] / 3.0;
  }
  return result;
}

}  // namespace hnmpc
