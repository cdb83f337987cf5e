#pragma once

#include <stdexcept>
#include <string>

namespace lil {

// Quadrature / root bracketing failed to reach the requested accuracy.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A tabulated scale function was evaluated outside its knot range.
// Distinct from NumericError so callers can tell "your table is too short"
// from "the integral did not converge".
struct ExtrapolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate input to a statistical routine (all-zero quantiles, empty
// exceedance range, overflowing Young function, ...).
struct StatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An occupation-field center grid does not cover the visited range.
struct CoverageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failures of the harness (lock held, unwritable dir, bad dump).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lil
