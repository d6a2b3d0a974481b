#pragma once

#include <stdexcept>
#include <string>

namespace nll {

/// Dimension disagreement between arrays that must be shape-congruent.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An argument violates a documented precondition (range, normalization, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Mathematically undefined input (zero-norm vector, empty search set).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// API called out of order (e.g. backward without a recorded forward).
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

/// EM cannot fit the requested mixture (e.g. all losses identical).
struct DegenerateFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nll
