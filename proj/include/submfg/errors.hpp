#pragma once

#include <stdexcept>
#include <string>

namespace submfg {

/// Simulation or regression produced values outside the representable or
/// plausible range (state blow-up, non-finite regression output).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace submfg
