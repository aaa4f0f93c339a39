#include "hydronmpc/ssmp/normalizer.hpp"

#include "hydronmpc/errors.hpp"

#include <cmath>
#include <string>

namespace hnmpc {

MinMaxRange MinMaxRange::fit(const Matrix& samples) {
  if (samples.cols() == 0 || samples.rows() == 0) throw ConfigError("MinMaxRange::fit: no samples");
  MinMaxRange r;
  r.min = samples.rowwise().minCoeff();
  r.max = samples.rowwise().maxCoeff();
  for (Eigen::Index i = 0; i < r.min.size(); ++i) {
    if (!(r.max(i) > r.min(i))) {
      r.min(i) -= kDegeneratePad;
      r.max(i) += kDegeneratePad;
    }
  }
  r.validate("MinMaxRange::fit");
  return r;
}

Vector MinMaxRange::normalize(const Vector& x) const {
  if (x.size() != min.size()) throw ContractError("MinMaxRange::normalize: dimension mismatch");
  return ((x - min).array() / (max - min).array()).matrix();
}

Vector MinMaxRange::denormalize(const Vector& z) const {
  if (z.size() != min.size()) throw ContractError("MinMaxRange::denormalize: dimension mismatch");
  return (min.array() + z.array() * (max - min).array()).matrix();
}

void MinMaxRange::validate(const char* what) const {
  if (min.size() != max.size()) throw ConfigError(std::string(what) + ": min/max sizes differ");
  for (Eigen::Index i = 0; i < min.size(); ++i) {
    if (!std::isfinite(min(i)) || !std::isfinite(max(i)) || !(max(i) > min(i))) {
      throw ConfigError(std::string(what) + ": invalid range at dimension " + std::to_string(i));
    }
  }
}

Normalizer fit_normalizer(const EpisodeStore& store, std::size_t history, std::size_t horizon,
                          TargetMode mode) {
  const std::size_t total = store.total_samples();
  if (total == 0) throw ConfigError("fit_normalizer: empty store");
  Matrix states(9, static_cast<Eigen::Index>(total));
  Matrix inputs(4, static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (const auto& ep : store.episodes) {
    for (std::size_t k = 0; k < ep.size(); ++k, ++col) {
      states.col(col) = ep.states[k];
      inputs.col(col) = ep.inputs[k];
    }
  }
  const WindowIndex index = index_windows(store, history, horizon);
  if (index.refs.empty()) throw ConfigError("fit_normalizer: no windows of length h + N + 1");
  Matrix targets(static_cast<Eigen::Index>(3 * horizon), static_cast<Eigen::Index>(index.refs.size()));
  for (std::size_t i = 0; i < index.refs.size(); ++i) {
    const auto& r = index.refs[i];
    targets.col(static_cast<Eigen::Index>(i)) =
        flatten_rows(target_at(store.episodes[r.episode], r.t, horizon, mode));
  }
  return {MinMaxRange::fit(states), MinMaxRange::fit(inputs), MinMaxRange::fit(targets)};
}

}  // namespace hnmpc
