#pragma once

#include "teamsort/dist.hpp"

namespace teamsort {

// Piecewise-linear worked example with a closed-form equilibrium:
// p_low = 0.05, I(p_low) = 0.1, I(p_high) = 0.8, C = 0.064.
// The knot at 0.5 is chosen so the cutoff condition holds exactly.
inline TypeDistribution figure_one_distribution() {
  return TypeDistribution::piecewise({{0.0, 0.0},
                                      {0.025, 0.05},
                                      {0.05, 0.1},
                                      {0.5, 0.4785079522239654323198893},
                                      {0.9, 0.8},
                                      {0.95, 0.9},
                                      {1.0, 1.0}});
}

}  // namespace teamsort
