#include "hydronmpc/ssmp/train.hpp"

#include "hydronmpc/errors.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace hnmpc {

WindowBatcher::WindowBatcher(const SsmpModel& model, const EpisodeStore& store, std::vector<WindowRef> refs)
    : model_(model), store_(store), refs_(std::move(refs)) {
  const Normalizer& n = model_.normalizer();
  normalized_.reserve(store_.episodes.size());
  for (const auto& ep : store_.episodes) {
    Matrix m(13, static_cast<Eigen::Index>(ep.size()));
    for (std::size_t k = 0; k < ep.size(); ++k) {
      m.col(static_cast<Eigen::Index>(k)).head(9) = n.state.normalize(ep.states[k]);
      m.col(static_cast<Eigen::Index>(k)).tail(4) = n.input.normalize(ep.inputs[k]);
    }
    normalized_.push_back(std::move(m));
  }
}

void WindowBatcher::gather(const std::vector<std::size_t>& picks, std::vector<Matrix>& sequence,
                           Matrix& future, Matrix& targets) const {
  const std::size_t h = model_.history();
  const std::size_t horizon = model_.horizon();
  const auto batch = static_cast<Eigen::Index>(picks.size());
  const Normalizer& n = model_.normalizer();
  sequence.assign(h, Matrix(13, batch));
  future.resize(static_cast<Eigen::Index>(4 * horizon), batch);
  targets.resize(static_cast<Eigen::Index>(3 * horizon), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const WindowRef& r = refs_.at(picks[static_cast<std::size_t>(b)]);
    const Matrix& ep = normalized_[r.episode];
    for (std::size_t k = 0; k < h; ++k) {
      const auto s = static_cast<Eigen::Index>(r.t - h + 1 + k);
      sequence[k].col(b).head(9) = ep.col(s).head(9);
      sequence[k].col(b).tail(4) = ep.col(s - 1).tail(4);
    }
    for (std::size_t i = 0; i < horizon; ++i) {
      future.col(b).segment(static_cast<Eigen::Index>(4 * i), 4) =
          ep.col(static_cast<Eigen::Index>(r.t + i)).tail(4);
    }
    targets.col(b) = n.output.normalize(
        flatten_rows(target_at(store_.episodes[r.episode], r.t, horizon, model_.dims().target)));
  }
}

namespace {

Matrix head_batch(const Matrix& hidden, const Matrix& future) {
  Matrix in(hidden.rows() + future.rows(), hidden.cols());
  in.topRows(hidden.rows()) = hidden;
  in.bottomRows(future.rows()) = future;
  return in;
}

}  // namespace

double evaluate_loss(const SsmpModel& model, const EpisodeStore& store, const std::vector<WindowRef>& refs) {
  if (refs.empty()) throw ConfigError("evaluate_loss: no windows");
  const WindowBatcher batcher(model, store, refs);
  double total = 0.0;
  constexpr std::size_t kChunk = 256;
  std::vector<Matrix> seq;
  Matrix future, targets;
  for (std::size_t start = 0; start < refs.size(); start += kChunk) {
    std::vector<std::size_t> picks(std::min(kChunk, refs.size() - start));
    std::iota(picks.begin(), picks.end(), start);
    batcher.gather(picks, seq, future, targets);
    const LstmCache enc = model.encoder().forward(seq);
    const MlpCache head = model.head().forward(head_batch(enc.hidden, future));
    total += (head.output - targets).squaredNorm();
  }
  return total / static_cast<double>(refs.size());
}

OfflineTrainResult train_offline(SsmpModel& model, const EpisodeStore& store,
                                 const std::vector<WindowRef>& refs, const OfflineTrainConfig& config) {
  OfflineTrainResult result;
  if (config.iterations == 0) return result;
  if (refs.empty()) throw ConfigError("train_offline: no training windows");
  if (config.batch_size == 0 || !(config.learning_rate > 0.0) || config.trace_every == 0) {
    throw ConfigError("train_offline: batch size, learning rate and trace interval must be positive");
  }
  const WindowBatcher batcher(model, store, refs);
  Rng rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, refs.size() - 1);
  AdamState adam(model.parameter_count(), config.learning_rate);
  Vector params = model.parameters();
  const auto j = static_cast<Eigen::Index>(model.dims().lstm_hidden);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  std::vector<std::size_t> picks(config.batch_size);
  std::vector<Matrix> seq;
  Matrix future, targets;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (auto& p : picks) p = pick(rng);
    batcher.gather(picks, seq, future, targets);

    const LstmCache enc = model.encoder().forward(seq);
    const MlpCache head = model.head().forward(head_batch(enc.hidden, future));
    const Matrix residual = head.output - targets;
    const double loss = residual.squaredNorm() * inv_batch;
    if (!std::isfinite(loss)) {
      throw TrainingError("train_offline: loss became non-finite at iteration " + std::to_string(it));
    }
    if (it % config.trace_every == 0 || it + 1 == config.iterations) result.trace.push_back({it, loss});
    result.final_loss = loss;

    const MlpGradients g_head = model.head().backward(head, 2.0 * inv_batch * residual);
    const LstmGradients g_enc = model.encoder().backward(enc, g_head.input.topRows(j));
    Vector grads(params.size());
    const auto ne = static_cast<Eigen::Index>(model.encoder().parameter_count());
    grads.head(ne) = g_enc.flatten();
    grads.tail(grads.size() - ne) = g_head.flatten();
    adam_step(adam, params, grads);
    model.set_parameters(params);
  }
  return result;
}

}  // namespace hnmpc
