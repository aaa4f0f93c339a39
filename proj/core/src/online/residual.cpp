#include "hydronmpc/online/residual.hpp"

#include "hydronmpc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hnmpc {

namespace {

std::vector<std::size_t> residual_sizes(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output) {
  std::vector<std::size_t> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

}  // namespace

ResidualModel::ResidualModel(const SsmpModel& offline, const ResidualConfig& config, std::uint64_t seed)
    : history_(offline.history()),
      horizon_(offline.horizon()),
      normalizer_(offline.normalizer()),
      config_(config) {
  reset(seed);
}

ResidualModel::ResidualModel(std::size_t history, std::size_t horizon, Normalizer normalizer,
                             const ResidualConfig& config, Mlp net)
    : history_(history),
      horizon_(horizon),
      normalizer_(std::move(normalizer)),
      config_(config),
      net_(std::move(net)) {
  const auto sizes = net_.sizes();
  if (sizes.empty() || sizes.front() != input_size() || sizes.back() != 3 * horizon_) {
    throw ConfigError("ResidualModel: network sizes do not match h and N");
  }
}

void ResidualModel::reset(std::uint64_t seed) {
  if (history_ == 0 || horizon_ == 0) throw ConfigError("ResidualModel: reset before dimensions are set");
  Rng rng(seed);
  net_ = Mlp::uniform(residual_sizes(input_size(), config_.hidden, 3 * horizon_), config_.init_scale, rng);
}

Vector ResidualModel::history_input(const HistoryWindow& window) const {
  if (window.states.size() != history_ || window.inputs.size() != history_) {
    throw ConfigError("ResidualModel: history length does not match h");
  }
  Vector x(static_cast<Eigen::Index>(13 * history_));
  for (std::size_t k = 0; k < history_; ++k) {
    const auto off = static_cast<Eigen::Index>(13 * k);
    x.segment(off, 9) = normalizer_.state.normalize(window.states[k]);
    x.segment(off + 9, 4) = normalizer_.input.normalize(window.inputs[k]);
  }
  return x;
}

Vector ResidualModel::input_from_history(const Vector& history, const InputSequence& future) const {
  if (static_cast<std::size_t>(future.rows()) != horizon_) {
    throw ConfigError("ResidualModel: future input rows do not match N");
  }
  Vector x(static_cast<Eigen::Index>(input_size()));
  const Eigen::Index hist = history.size();
  x.head(hist) = history;
  for (Eigen::Index i = 0; i < future.rows(); ++i) {
    x.segment(hist + 4 * i, 4) = normalizer_.input.normalize(future.row(i).transpose());
  }
  return x;
}

Vector ResidualModel::input(const HistoryWindow& window, const InputSequence& future) const {
  return input_from_history(history_input(window), future);
}

OutputSequence ResidualModel::predict_from_history(const Vector& history, const InputSequence& future) const {
  const Vector z = net_.forward(input_from_history(history, future));
  const Vector r = (z.array() * normalizer_.output.scale().array()).matrix();
  if (!r.allFinite()) throw PredictionError("ResidualModel: non-finite residual");
  return unflatten_outputs(r);
}

OutputSequence ResidualModel::predict_residual(const HistoryWindow& window, const InputSequence& future) const {
  check_shapes(window, future);
  return predict_from_history(history_input(window), future);
}

Vector ResidualModel::vjp_from_history(const Vector& history, const InputSequence& future,
                                       const Vector& upstream) const {
  const MlpCache cache = net_.forward(Matrix(input_from_history(history, future)));
  const Vector scaled = (upstream.array() * normalizer_.output.scale().array()).matrix();
  const Matrix d_in = net_.backward_input(cache, Matrix(scaled));
  Vector g = d_in.col(0).tail(static_cast<Eigen::Index>(4 * horizon_));
  const Vector in_scale = normalizer_.input.scale();
  for (Eigen::Index c = 0; c < g.size(); ++c) g(c) /= in_scale(c % 4);
  return g;
}

Matrix ResidualModel::jacobian_from_history(const Vector& history, const InputSequence& future) const {
  Matrix jac = net_.input_jacobian(input_from_history(history, future), 13 * history_, 4 * horizon_);
  const Vector in_scale = normalizer_.input.scale();
  for (Eigen::Index c = 0; c < jac.cols(); ++c) jac.col(c) /= in_scale(c % 4);
  return normalizer_.output.scale().asDiagonal() * jac;
}

Vector ResidualModel::normalized_target(const OutputSequence& realized, const OutputSequence& offline) const {
  const Vector diff = flatten_rows(OutputSequence(realized - offline));
  return (diff.array() / normalizer_.output.scale().array()).matrix();
}

void ResidualModel::check_shapes(const HistoryWindow& window, const InputSequence& future) const {
  if (window.states.size() != history_ || window.inputs.size() != history_) {
    throw ConfigError("ResidualModel: history length does not match h");
  }
  if (static_cast<std::size_t>(future.rows()) != horizon_) {
    throw ConfigError("ResidualModel: future input rows do not match N");
  }
  for (const auto& x : window.states) {
    if (!x.allFinite()) throw PredictionError("ResidualModel: non-finite history state");
  }
  for (const auto& u : window.inputs) {
    if (!u.allFinite()) throw PredictionError("ResidualModel: non-finite history input");
  }
  if (!future.allFinite()) throw PredictionError("ResidualModel: non-finite future input");
}

MismatchBuffer::MismatchBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("MismatchBuffer: capacity must be positive");
}

void MismatchBuffer::push(MismatchEntry entry) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(entry));
}

namespace {

struct Batch {
  Matrix inputs;
  Matrix targets;
};

Batch recent_batch(const ResidualModel& model, const MismatchBuffer& buffer, std::size_t batch) {
  const std::size_t count = std::min(batch, buffer.size());
  const std::size_t first = buffer.size() - count;
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(model.input_size()), static_cast<Eigen::Index>(count));
  b.targets.resize(static_cast<Eigen::Index>(3 * model.horizon()), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const MismatchEntry& e = buffer[first + i];
    const auto c = static_cast<Eigen::Index>(i);
    b.inputs.col(c) = model.input(e.window, e.applied);
    b.targets.col(c) = model.normalized_target(e.realized, e.offline);
  }
  return b;
}

double batch_loss(const Matrix& output, const Matrix& targets) {
  return (output - targets).squaredNorm() / static_cast<double>(targets.cols());
}

}  // namespace

double residual_loss(const ResidualModel& model, const MismatchBuffer& buffer, std::size_t batch) {
  if (buffer.empty()) return 0.0;
  const Batch b = recent_batch(model, buffer, batch);
  return batch_loss(model.net().forward(b.inputs).output, b.targets);
}

OnlineUpdateResult online_update(ResidualModel& model, const MismatchBuffer& buffer, std::size_t loops) {
  OnlineUpdateResult result;
  if (buffer.empty() || loops == 0) return result;

  const Batch b = recent_batch(model, buffer, model.config().batch_size);
  const double inv = 1.0 / static_cast<double>(b.targets.cols());
  Mlp& net = model.mutable_net();
  const Vector saved = net.parameters();
  const std::vector<bool> mask = net.bias_mask();
  Vector rates(static_cast<Eigen::Index>(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    rates(static_cast<Eigen::Index>(i)) = mask[i] ? model.config().eta_b : model.config().eta_w;
  }

  auto fail = [&](const std::string& what) {
    net.set_parameters(saved);
    result.rolled_back = true;
    result.error = what;
    return result;
  };

  Vector params = saved;
  for (std::size_t k = 0; k <= loops; ++k) {
    const MlpCache cache = net.forward(b.inputs);
    const double loss = batch_loss(cache.output, b.targets);
    if (!std::isfinite(loss)) return fail("online update: non-finite loss at loop " + std::to_string(k));
    result.loss.push_back(loss);
    if (k == loops) break;
    const Matrix upstream = (2.0 * inv) * (cache.output - b.targets);
    const Vector grad = net.backward(cache, upstream).flatten();
    if (!grad.allFinite()) return fail("online update: non-finite gradient at loop " + std::to_string(k));
    params.array() -= rates.array() * grad.array();
    if (!params.allFinite()) return fail("online update: non-finite weights at loop " + std::to_string(k));
    net.set_parameters(params);
  }
  return result;
}

OutputSequence hybrid_predict(const SsmpModel& offline, const ResidualModel& online,
                              const HistoryWindow& window, const InputSequence& future) {
  if (offline.history() != online.history() || offline.horizon() != online.horizon()) {
    throw ConfigError("hybrid_predict: offline and online models disagree on h or N");
  }
  const OutputSequence base = offline.predict(window, future);
  const OutputSequence residual = online.predict_residual(window, future);
  return base + residual;
}

void encode_residual(ByteWriter& out, const ResidualModel& model) {
  const auto sizes = model.net().sizes();
  const ResidualConfig& c = model.config();
  out.tag(kResidualMagic);
  out.u32(static_cast<std::uint32_t>(model.history()));
  out.u32(static_cast<std::uint32_t>(model.horizon()));
  out.u32(static_cast<std::uint32_t>(sizes.size()));
  for (std::size_t s : sizes) out.u32(static_cast<std::uint32_t>(s));
  out.f64(c.eta_w);
  out.f64(c.eta_b);
  out.f64(c.init_scale);
  out.u32(static_cast<std::uint32_t>(c.batch_size));
  out.u32(static_cast<std::uint32_t>(c.capacity));
  out.u32(static_cast<std::uint32_t>(c.loops));
  out.u64(static_cast<std::uint64_t>(model.net().parameter_count()));
  for (std::size_t i = 0; i < model.net().num_layers(); ++i) {
    out.f64s(model.net().layer(i).weight);
    out.f64s(model.net().layer(i).bias);
  }
}

ResidualModel decode_residual(ByteReader& in, const Normalizer& normalizer) {
  in.expect_tag(kResidualMagic, "residual section");
  const std::size_t h = in.u32();
  const std::size_t n = in.u32();
  const std::size_t count = in.u32();
  if (count < 2 || count > 64) throw FormatError("residual section: implausible layer count");
  std::vector<std::size_t> sizes(count);
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < count; ++i) {
    sizes[i] = in.u32();
    if (sizes[i] == 0) throw FormatError("residual section: zero layer size");
    if (i > 0) expected += sizes[i] * sizes[i - 1] + sizes[i];
  }
  if (sizes.front() != 13 * h + 4 * n || sizes.back() != 3 * n) {
    throw FormatError("residual section: layer sizes disagree with h and N");
  }
  if (normalizer.horizon() != n) throw FormatError("residual section: horizon disagrees with offline model");
  ResidualConfig c;
  c.eta_w = in.f64();
  c.eta_b = in.f64();
  c.init_scale = in.f64();
  c.batch_size = in.u32();
  c.capacity = in.u32();
  c.loops = in.u32();
  c.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  const std::uint64_t payload = in.u64();
  if (payload != expected) throw FormatError("residual section: payload count disagrees with layer sizes");
  if (in.remaining() < payload * 8) throw FormatError("residual section: truncated payload");
  Mlp net(sizes);
  for (std::size_t i = 0; i + 1 < count; ++i) {
    DenseLayer& l = net.mutable_layer(i);
    l.weight = in.f64s(static_cast<Eigen::Index>(sizes[i + 1]), static_cast<Eigen::Index>(sizes[i]));
    l.bias = in.f64s(static_cast<Eigen::Index>(sizes[i + 1]));
  }
  return ResidualModel(h, n, normalizer, c, std::move(net));
}

void save_hybrid(const std::filesystem::path& path, const SsmpModel& offline, const ResidualModel& online) {
  if (offline.history() != online.history() || offline.horizon() != online.horizon()) {
    throw ConfigError("save_hybrid: offline and online models disagree on h or N");
  }
  ByteWriter w;
  encode_ssmp(w, offline);
  encode_residual(w, online);
  write_file_bytes(path, w.bytes());
}

std::pair<SsmpModel, ResidualModel> load_hybrid(const std::filesystem::path& path, const ResidualConfig& fallback,
                                                std::uint64_t seed) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  SsmpModel offline = decode_ssmp(r);
  if (r.at_end()) {
    ResidualModel online(offline, fallback, seed);
    return {std::move(offline), std::move(online)};
  }
  ResidualModel online = decode_residual(r, offline.normalizer());
  if (online.history() != offline.history()) throw FormatError("residual section: history disagrees with offline model");
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after residual section");
  return {std::move(offline), std::move(online)};
}

}  // namespace hnmpc
