#pragma once

// Fixed-point loop for the coupled forward-backward system under a frozen
// summary flow: simulate forward with the current decoupling-field feedback,
// re-solve the backward equation on the new paths, repeat until the adjoint
// stabilizes in the path-quadrature L2 metric.

#include <vector>

#include "submfg/bsde.hpp"
#include "submfg/hamiltonian.hpp"
#include "submfg/meanfield.hpp"
#include "submfg/simulate.hpp"

namespace submfg {

struct PicardSettings {
  int max_iters = 50;
  double tol = 1e-6;     // on the path-quadrature L2 change of the adjoint
  double damping = 1.0;  // blend weight for successive decoupling fits
  RegressionBasis basis{};
  bool estimate_z = false;
  int threads = 1;
};

struct PicardResult {
  PathBundle x;
  BsdeSolution adjoint;
  int iterations = 0;  // forward/backward sweeps after the initial one
  double final_change = 0.0;
  bool converged = false;
  std::vector<double> change_history;
};

/// Iterate 0 simulates with the zero-adjoint control and solves the backward
/// equation along those paths; each loop pass re-simulates with the previous
/// fitted decoupling field and re-solves.  A warm start replaces iterate 0
/// with a previously fitted solution (shapes must match the plan).  Throws
/// ConvergenceError, with the change history attached, on divergence or when
/// the iteration budget is exhausted.
PicardResult solve_fbsde_picard(const ModelSpec& model, const NoisePlan& plan,
                                const SummaryTable& flow,
                                const PicardSettings& settings = {},
                                const BsdeSolution* warm_start = nullptr);

/// Convenience overload building the summary table from a law flow.
PicardResult solve_fbsde_picard(const ModelSpec& model, const NoisePlan& plan,
                                const ConditionalLawFlow& flow,
                                const PicardSettings& settings = {});

/// Feedback rule reading the adjoint from a fitted decoupling field and
/// minimizing the Hamiltonian; the zero-field variant uses y = 0.
FeedbackControl decoupling_control(const ModelSpec& model, const BsdeSolution* field);

/// Path-quadrature L2 distance between two same-shape bundles:
/// sqrt(mean over paths of the quadrature integral of |a_k - b_k|^2).
double quadrature_l2_distance(const PathBundle& a, const PathBundle& b);

}  // namespace submfg
