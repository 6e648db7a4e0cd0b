#pragma once

#include <stdexcept>
#include <string>

namespace gksim {

// Mismatched support sizes or matrix shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// q > 0 where the reference measure is 0: the divergence is +infinity.
class InfiniteDivergence : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Conditioning on an observation with zero marginal probability.
class ImpossibleObservation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-positive gap or distance where a strictly positive one is required.
class DegenerateGeometry : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation invoked on an object in the wrong lifecycle state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Vehicles cannot be placed on the road with the requested spacing.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unreadable experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gksim
