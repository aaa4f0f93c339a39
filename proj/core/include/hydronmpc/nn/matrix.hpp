#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>

namespace hnmpc {

// Column-major storage in memory; checkpoints serialize row-major.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Fills `m` with U(-bound, bound) draws in row-major order.
void fill_uniform(Matrix& m, double bound, Rng& rng);
void fill_uniform(Vector& v, double bound, Rng& rng);

/// Glorot/Xavier uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

/// Process-wide unique stamp used to detect stale forward caches.
std::uint64_t next_parameter_version();

}  // namespace hnmpc
