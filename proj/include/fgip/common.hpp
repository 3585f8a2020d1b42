#pragma once

#include <stdexcept>
#include <string>

namespace fgip {

// Violated precondition or type invariant (bad shapes, out-of-range parameters).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerical failure at runtime: degenerate message, unanchored chain, CG divergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File and format problems in the I/O layer.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A scale of zero is encoded as a finite but very large precision so the
// quadratic problems stay symmetric positive definite.
inline constexpr double kWeightCap = 1e12;

// Slope-noise scale factors are kept in [eps_floor, kScaleCap]; the square of
// the cap equals kWeightCap, so r^2 never exceeds the weight cap either.
inline constexpr double kScaleCap = 1e6;

}  // namespace fgip
