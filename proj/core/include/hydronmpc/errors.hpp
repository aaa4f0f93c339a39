#pragma once

#include <stdexcept>
#include <string>

namespace hnmpc {

/// Base class for every error raised by the library. The CLI maps
/// ConfigError to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration, dimension mismatch between components, bad files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (stale cache, empty sequence, length mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class PredictionError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hnmpc
