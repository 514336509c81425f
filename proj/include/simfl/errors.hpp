#pragma once

#include <stdexcept>

namespace simfl {

// Malformed IDX input.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PartitionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (sizes, ranges, symmetry).
struct ArgError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateAffinityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoUpdatesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unrecoverable failure while an experiment is running (lost peer, timeout
// during registration).
struct RuntimeAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace simfl
