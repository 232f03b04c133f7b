#pragma once

// Checks that controlled trajectories form a lattice under the pathwise
// order: switching between two controls at the state-coordinate crossing
// indicator and resimulating should reproduce the pathwise meet/join of the
// original trajectories, up to discretization error.

#include "submfg/simulate.hpp"

namespace submfg {

struct LatticeReport {
  double max_meet_deviation = 0.0;  // sup-entry |replay - pathwise min|
  double max_join_deviation = 0.0;
  double mean_meet_deviation = 0.0;  // average absolute entry deviation
  double mean_join_deviation = 0.0;
  int n_steps = 0;
};

/// Simulates both controls on shared noise (recording applied controls),
/// builds the switched control paths (coordinate c follows whichever
/// original control currently sits at the lower state coordinate c for the
/// meet, higher for the join; ties go to the second control for the meet and
/// the first for the join), resimulates them open loop, and reports the
/// deviation from the meet/join of the original trajectories.  Requires
/// matching state and control dimensions (the coordinatewise switch rule).
LatticeReport verify_trajectory_lattice(const ModelSpec& model, const NoisePlan& plan,
                                        const SummaryTable& frozen,
                                        const FeedbackControl& ctrl_a,
                                        const FeedbackControl& ctrl_b,
                                        const SimulateOptions& opts = {});

}  // namespace submfg
