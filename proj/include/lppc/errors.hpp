#pragma once

#include <stdexcept>
#include <string>

namespace lppc {

// Stimulus outside a family's sample space, or NaN input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation requires a proper (normalizable) density or other unmet precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Requested operation is not available for this family.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite parameters or rates during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail

}  // namespace lppc
