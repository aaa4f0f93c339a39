#pragma once

#include "hydronmpc/ssmp/dataset.hpp"

namespace hnmpc {

/// Per-dimension min-max scaling onto [0, 1].
struct MinMaxRange {
  Vector min;
  Vector max;

  static constexpr double kDegeneratePad = 1e-6;

  /// Fits over the columns of `samples`; constant dimensions are padded
  /// symmetrically by kDegeneratePad.
  static MinMaxRange fit(const Matrix& samples);

  Eigen::Index size() const { return min.size(); }
  Vector scale() const { return max - min; }
  Vector normalize(const Vector& x) const;
  Vector denormalize(const Vector& z) const;
  void validate(const char* what) const;
};

struct Normalizer {
  MinMaxRange state;   // 9
  MinMaxRange input;   // 4
  MinMaxRange output;  // 3N, delta (or absolute) targets per horizon slot

  std::size_t horizon() const { return static_cast<std::size_t>(output.size() / 3); }
};

/// States and inputs over every sample of the store; outputs over every
/// window target at horizon N.
Normalizer fit_normalizer(const EpisodeStore& store, std::size_t history, std::size_t horizon,
                          TargetMode mode = TargetMode::Delta);

}  // namespace hnmpc
