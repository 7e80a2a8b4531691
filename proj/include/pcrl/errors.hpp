#pragma once

#include <stdexcept>
#include <string>

namespace pcrl {

// Invalid configuration (bad distribution parameters, impossible batch shape).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke an interface precondition (dimension mismatch, too few
// candidates).
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// A gradient update was attempted with rollouts from a different policy step.
struct StalenessError : std::runtime_error {
  explicit StalenessError(const std::string& msg) : std::runtime_error(msg) {}
};

// A resampling strategy exceeded its round bound without filling a batch.
struct StarvationError : std::runtime_error {
  explicit StarvationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A diagnostic is undefined on the given inputs (e.g. zero truth variance).
struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// A state update produced or received non-finite values.
struct UpdateRejected : std::runtime_error {
  explicit UpdateRejected(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pcrl
