#pragma once

#include "hydronmpc/nn/mlp.hpp"
#include "hydronmpc/ssmp/checkpoint.hpp"
#include "hydronmpc/ssmp/model.hpp"

#include <deque>
#include <string>
#include <utility>
#include <vector>

namespace hnmpc {

struct ResidualConfig {
  std::vector<std::size_t> hidden{64, 64};
  double init_scale = 1e-3;
  double eta_w = 0.005;
  double eta_b = 0.005;
  std::size_t batch_size = 32;
  std::size_t capacity = 256;
  std::size_t loops = 30;
};

/// Online mismatch model H over [X_t^h, U_{t-1}^h, U_{t:t+N-1}], all
/// normalized with the offline normalizer. Outputs are offline-delta
/// normalized residuals; predictions rescale them without the min offset
/// so a zero network predicts a zero residual.
class ResidualModel {
 public:
  ResidualModel() = default;
  ResidualModel(const SsmpModel& offline, const ResidualConfig& config, std::uint64_t seed);
  ResidualModel(std::size_t history, std::size_t horizon, Normalizer normalizer,
                const ResidualConfig& config, Mlp net);

  /// Re-draws weights in +-init_scale with zero biases.
  void reset(std::uint64_t seed);

  std::size_t history() const { return history_; }
  std::size_t horizon() const { return horizon_; }
  const ResidualConfig& config() const { return config_; }
  ResidualConfig& mutable_config() { return config_; }
  const Normalizer& normalizer() const { return normalizer_; }
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }

  std::size_t input_size() const { return 13 * history_ + 4 * horizon_; }
  /// Normalized history part of the input, 13h.
  Vector history_input(const HistoryWindow& window) const;
  Vector input(const HistoryWindow& window, const InputSequence& future) const;
  Vector input_from_history(const Vector& history, const InputSequence& future) const;

  OutputSequence predict_residual(const HistoryWindow& window, const InputSequence& future) const;
  OutputSequence predict_from_history(const Vector& history, const InputSequence& future) const;
  /// (d residual / d U)^T * upstream over the flattened residual (3N).
  Vector vjp_from_history(const Vector& history, const InputSequence& future, const Vector& upstream) const;
  Matrix jacobian_from_history(const Vector& history, const InputSequence& future) const;

  /// Offline-normalized residual target (Y - Xhat) / scale, flattened.
  Vector normalized_target(const OutputSequence& realized, const OutputSequence& offline) const;

  void check_shapes(const HistoryWindow& window, const InputSequence& future) const;

 private:
  std::size_t history_ = 0;
  std::size_t horizon_ = 0;
  Normalizer normalizer_;
  ResidualConfig config_;
  Mlp net_;
};

struct MismatchEntry {
  HistoryWindow window;
  InputSequence applied;     // N inputs actually applied after the window
  OutputSequence offline;    // offline prediction for those inputs
  OutputSequence realized;   // measured Y_{t+1:t+N}
};

/// Chronological ring buffer; the oldest entry drops once full.
class MismatchBuffer {
 public:
  explicit MismatchBuffer(std::size_t capacity = 256);

  void push(MismatchEntry entry);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const MismatchEntry& operator[](std::size_t i) const { return entries_[i]; }
  const MismatchEntry& back() const { return entries_.back(); }

 private:
  std::size_t capacity_;
  std::deque<MismatchEntry> entries_;
};

struct OnlineUpdateResult {
  std::vector<double> loss;  // M before each loop, then after the last
  bool rolled_back = false;
  std::string error;
};

/// Mean over the batch of || target - H(x) ||^2 in normalized units.
double residual_loss(const ResidualModel& model, const MismatchBuffer& buffer, std::size_t batch);

/// k2 SGD steps on the most recent min(B, size) entries. A non-finite loss
/// or weight restores the pre-update model and reports the failure.
OnlineUpdateResult online_update(ResidualModel& model, const MismatchBuffer& buffer, std::size_t loops);

/// Offline prediction plus residual. Both models must agree on h and N.
OutputSequence hybrid_predict(const SsmpModel& offline, const ResidualModel& online,
                              const HistoryWindow& window, const InputSequence& future);

inline constexpr std::string_view kResidualMagic = "RESID1";

/// RESID1 layout: magic, u32 {h, N, layer_count, sizes...}, f64 eta_w,
/// eta_b, init_scale, u32 batch, capacity, loops, u64 payload count, then
/// layer weights (row-major) and biases.
void encode_residual(ByteWriter& out, const ResidualModel& model);
ResidualModel decode_residual(ByteReader& in, const Normalizer& normalizer);

void save_hybrid(const std::filesystem::path& path, const SsmpModel& offline, const ResidualModel& online);
/// The residual section is optional; absent, a fresh model is built from
/// `fallback` and `seed`.
std::pair<SsmpModel, ResidualModel> load_hybrid(const std::filesystem::path& path,
                                                const ResidualConfig& fallback = {},
                                                std::uint64_t seed = 0);

}  // namespace hnmpc
