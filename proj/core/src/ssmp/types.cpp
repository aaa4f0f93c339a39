#include "hydronmpc/ssmp/types.hpp"

#include "hydronmpc/errors.hpp"

namespace hnmpc {

Eigen::Matrix<double, 3, 9> output_selector() {
  Eigen::Matrix<double, 3, 9> c = Eigen::Matrix<double, 3, 9>::Zero();
  for (std::size_t j = 0; j < kJointCount; ++j) {
    c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(angle_index(j))) = 1.0;
  }
  return c;
}

Vector flatten_rows(const InputSequence& seq) {
  return Eigen::Map<const Vector>(seq.data(), seq.size());
}

Vector flatten_rows(const OutputSequence& seq) {
  return Eigen::Map<const Vector>(seq.data(), seq.size());
}

OutputSequence unflatten_outputs(const Vector& flat) {
  if (flat.size() % 3 != 0) throw ContractError("unflatten_outputs: length not a multiple of 3");
  return Eigen::Map<const OutputSequence>(flat.data(), flat.size() / 3, 3);
}

InputSequence unflatten_inputs(const Vector& flat) {
  if (flat.size() % 4 != 0) throw ContractError("unflatten_inputs: length not a multiple of 4");
  return Eigen::Map<const InputSequence>(flat.data(), flat.size() / 4, 4);
}

std::string to_string(CollectionMode mode) {
  switch (mode) {
    case CollectionMode::OpenLoop: return "open_loop";
    case CollectionMode::ClosedLoop: return "closed_loop";
    case CollectionMode::Scenario: return "scenario";
  }
  return "unknown";
}

CollectionMode collection_mode_from_string(const std::string& s) {
  if (s == "open_loop") return CollectionMode::OpenLoop;
  if (s == "closed_loop") return CollectionMode::ClosedLoop;
  if (s == "scenario") return CollectionMode::Scenario;
  throw FormatError("unknown collection mode '" + s + "'");
}

std::size_t EpisodeStore::total_samples() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.size();
  return n;
}

}  // namespace hnmpc
