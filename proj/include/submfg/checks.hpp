#pragma once

// Structural verifiers.  Probe-grid falsification of the monotone-coupling
// conditions a model must satisfy for the ordered-equilibrium machinery to
// apply: cross-difference signs (submodularity, decreasing differences),
// drift shape and sign conditions, gradient monotonicity, growth bounds, and
// convexity/Lipschitz regularity.  Checks report witnesses; they never
// throw on a clean "fail".

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "submfg/model.hpp"

namespace submfg {

struct ProbeConfig {
  int points_per_axis = 9;  // grid points along each varied coordinate
  int n_base = 5;           // deterministic draws for the frozen coordinates
  int n_time = 5;           // time probe count
  double step = 1e-3;       // finite-difference offset
  double tol = 1e-9;        // scaled by (1 + |f|) at the base point
  std::uint64_t seed = 77;
  double x_halfwidth = 2.0;    // state probe window half-width
  double window_cap = 2.0;     // cap for unbounded control/summary windows
  int max_witnesses = 8;       // per check
};

struct ProbeWitness {
  std::string check;
  int i = -1, j = -1;  // coordinate pair when applicable
  double t = 0.0;
  Eigen::VectorXd x, x2, m, m2, a, a2;  // probe context; unused parts empty
  double value = 0.0;
  std::string note;
};

struct DiffReport {
  bool pass = true;
  double worst = 0.0;  // most positive cross difference seen
  long n_evaluated = 0;
  std::string note;
  std::vector<ProbeWitness> violations;
};

using BivariateFn =
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Mixed differences f(x+s e_i, y+s e_j) - f(x+s e_i, y) - f(x, y+s e_j)
/// + f(x, y) over a probe grid; passes iff every estimate stays below the
/// scaled tolerance.
DiffReport check_decreasing_differences(const BivariateFn& f,
                                        const Eigen::VectorXd& x_lo,
                                        const Eigen::VectorXd& x_hi,
                                        const Eigen::VectorXd& y_lo,
                                        const Eigen::VectorXd& y_hi,
                                        const ProbeConfig& cfg = {});

/// Cross differences of f within x (pairs i < j).  One-dimensional domains
/// pass unconditionally with a note.
DiffReport check_submodularity_x(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 const ProbeConfig& cfg = {});

/// Componentwise nondecreasing probe for a vector map on a box.
DiffReport check_monotone_map(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    const ProbeConfig& cfg = {});

struct CheckResult {
  std::string name;
  bool pass = true;
  double worst = 0.0;
  long n_evaluated = 0;
  std::string note;
  std::vector<ProbeWitness> witnesses;
};

struct AssumptionReport {
  Regime regime = Regime::Separable;
  bool pass = true;
  std::vector<CheckResult> checks;
};

/// Regime-dispatched sweep of the structural conditions on a model's
/// evaluators.  Separable: interaction-free diagonal drift, state
/// submodularity and state/interaction decreasing differences of the running
/// and terminal costs.  Nonseparable: affine drift with nonnegative
/// state/control matrices and nondecreasing offset, gradient growth, control
/// submodularity, control/state and control/interaction decreasing
/// differences, and nonincreasing cost gradients.
AssumptionReport check_assumption_suite(const ModelSpec& model,
                                        const ProbeConfig& cfg = {});

struct RegularityReport {
  bool pass = true;
  double empirical_lambda = 0.0;  // worst convexity-gap quotient of h in a
  double declared_lambda = 0.0;
  double lip_drift = 0.0;  // worst state-difference quotients
  double lip_sigma = 0.0;
  double lip_dx_h = 0.0;
  double lip_da_h = 0.0;
  double lip_dx_g = 0.0;
  double growth_dx_h = 0.0;  // worst |D_x h| / (K (1 + |m|_1)) ratio
  double growth_dx_g = 0.0;
  std::vector<std::string> notes;
};

/// Samples the convexity modulus of h in the control, difference quotients
/// of the coefficient maps, and the gradient growth ratios against the
/// model's declared constants.
RegularityReport validate_regularity(const ModelSpec& model,
                                     const ProbeConfig& cfg = {});

}  // namespace submfg
