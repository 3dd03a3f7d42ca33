#pragma once

#include <stdexcept>
#include <string>

namespace tembed {

// Malformed or out-of-domain input (bad file rows, non-finite times, ...).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration object violates its invariants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced inside a numerical routine.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A time delta cannot be resolved unambiguously from two embeddings.
class AmbiguityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric is not defined for the given batch (e.g. single-class AUC).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace tembed
