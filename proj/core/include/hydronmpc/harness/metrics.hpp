#pragma once

#include "hydronmpc/nn/matrix.hpp"

#include <cstdint>
#include <vector>

namespace hnmpc {

/// sqrt(||y - yhat||^2 / N).
double rmse(const Vector& y, const Vector& yhat);

/// Streaming mean of per-cycle RMSE values.
class Armse {
 public:
  void add(double value);
  double value() const;
  std::size_t count() const { return count_; }

 private:
  double mean_ = 0.0;
  std::size_t count_ = 0;
};

struct EnergySample {
  double supply = 0.0;    // omega * L_pump
  double overflow = 0.0;  // Q_overflow
};

struct EnergySeries {
  std::vector<double> efficiency;  // E(t) per sample
  bool undefined = false;          // pump never delivered flow; E reported as 1
  double final_value() const { return efficiency.empty() ? 1.0 : efficiency.back(); }
};

/// E(t) = 1 - int overflow / int supply, trapezoidal at step dt.
EnergySeries energy_efficiency(const std::vector<EnergySample>& samples, double dt);

/// Operation count of one prediction: 4jh(n+j+3) + (hn + 2m + 3j + 2N + 6) j.
std::uint64_t flops_estimate(std::uint64_t h, std::uint64_t n, std::uint64_t m, std::uint64_t j, std::uint64_t N);

}  // namespace hnmpc
