#pragma once

#include <stdexcept>
#include <string>

namespace airtp {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size mismatch between operands.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Argument outside its mathematical domain (negative variance, trace
// target out of range, step weight outside (0,1], ...).
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Effective channel too close to singular for channel inversion.
struct DegenerateChannelError : Error {
  explicit DegenerateChannelError(const std::string& msg) : Error(msg) {}
};

// Model assignment leaves some device without positive residual power.
struct InfeasibleAssignmentError : Error {
  explicit InfeasibleAssignmentError(const std::string& msg) : Error(msg) {}
};

// Requested partition cannot be realized (more devices than columns/heads).
struct PartitionError : Error {
  explicit PartitionError(const std::string& msg) : Error(msg) {}
};

// Configuration file problems; message carries the line number when known.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace airtp
