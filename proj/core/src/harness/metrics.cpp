#include "hydronmpc/harness/metrics.hpp"

#include "hydronmpc/errors.hpp"

#include <cmath>

namespace hnmpc {

double rmse(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size() || y.size() == 0) throw ContractError("rmse: lengths differ or are zero");
  return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

void Armse::add(double value) {
  ++count_;
  mean_ += (value - mean_) / static_cast<double>(count_);
}

double Armse::value() const {
  if (count_ == 0) throw ContractError("armse: no samples");
  return mean_;
}

EnergySeries energy_efficiency(const std::vector<EnergySample>& samples, double dt) {
  EnergySeries out;
  out.efficiency.reserve(samples.size());
  double supplied = 0.0;
  double lost = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (k > 0) {
      supplied += 0.5 * dt * (samples[k - 1].supply + samples[k].supply);
      lost += 0.5 * dt * (samples[k - 1].overflow + samples[k].overflow);
    }
    if (supplied > 0.0) {
      out.efficiency.push_back(1.0 - lost / supplied);
    } else {
      out.efficiency.push_back(1.0);
    }
  }
  out.undefined = !(supplied > 0.0);
  return out;
}

std::uint64_t flops_estimate(std::uint64_t h, std::uint64_t n, std::uint64_t m, std::uint64_t j, std::uint64_t N) {
  if (h == 0 || n == 0 || m == 0 || j == 0 || N == 0) throw ConfigError("flops_estimate: arguments must be positive");
  return 4 * j * h * (n + j + 3) + (h * n + 2 * m + 3 * j + 2 * N + 6) * j;
}

}  // namespace hnmpc
