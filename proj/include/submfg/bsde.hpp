#pragma once

// Backward adjoint solve along a frozen forward ensemble.  Conditional
// expectations are replaced by pooled least-squares projections on polynomial
// features of (state, scenario summary); the implicit Euler step is handled
// by one predictor regression and one corrected regression per grid step.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "submfg/meanfield.hpp"
#include "submfg/model.hpp"
#include "submfg/noise.hpp"
#include "submfg/path_bundle.hpp"

namespace submfg {

struct RegressionBasis {
  int degree = 2;      // total degree of the (x, m) monomials
  double ridge = 1e-10;
};

struct BasisLayout {
  int dim_x = 0, dim_m = 0, n_features = 0;
  // one entry per feature: dim_x + dim_m exponents, graded lexicographic
  std::vector<std::vector<int>> exponents;
};

BasisLayout build_basis(int dim_x, int dim_m, int degree);

/// Writes the layout's monomials evaluated at (x, m) into out[0..n_features).
void eval_features(const BasisLayout& layout, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& m, double* out);

struct BsdeOptions {
  bool estimate_z = false;  // also fit the martingale integrand diagnostics
  int threads = 1;
};

struct BsdeSolution {
  PathBundle y;                         // adjoint values along the input paths
  std::vector<Eigen::MatrixXd> coeffs;  // per step 0..N-1: n_features x dim_x
  BasisLayout layout;
  // Monomials are built from standardized inputs z_j = (v_j - shift[k][j]) /
  // scale[k][j] with v = (x, m) pooled over the step's sample.  Without this
  // the early-step Gram matrices are nearly collinear whenever the paths are
  // still clustered near the initial condition, and the resulting huge
  // canceling coefficients destabilize the forward feedback.  A coordinate
  // with no sample spread keeps scale 1; its centered features are exactly
  // zero so the fit drops it.
  std::vector<Eigen::VectorXd> shift;  // per step: length dim_x + dim_m
  std::vector<Eigen::VectorXd> scale;
  std::optional<PathBundle> z;   // dim_x * dim_w components, row-major pairs
  std::optional<PathBundle> z0;  // dim_x * dim_b components
  int ridge_fallbacks = 0;       // steps where the Gram matrix was rank-deficient
  std::vector<std::string> warnings;

  /// Fitted decoupling field at an interior grid step (step < coeffs.size()).
  Eigen::VectorXd eval_y(int step, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& m) const;
};

/// Exact re-expression of a polynomial between two standardizations: if a
/// field has coefficient column w under (shift_from, scale_from), then C * w
/// is the same polynomial's coefficients under (shift_to, scale_to).  Lets
/// callers mix coefficient matrices fitted on different samples.
Eigen::MatrixXd standardization_change(const BasisLayout& layout,
                                       const Eigen::VectorXd& shift_from,
                                       const Eigen::VectorXd& scale_from,
                                       const Eigen::VectorXd& shift_to,
                                       const Eigen::VectorXd& scale_to);

/// Terminal condition is the exact terminal cost gradient; each earlier step
/// regresses y_{k+1} + driver * dt, where the driver couples back through the
/// minimized control.  The summary table supplies the scenario inputs m.
BsdeSolution solve_bsde_backward(const ModelSpec& model, const NoisePlan& plan,
                                 const PathBundle& x, const SummaryTable& flow,
                                 const RegressionBasis& basis,
                                 const BsdeOptions& opts = {});

}  // namespace submfg
