#pragma once

// Closed-form reference for linear-convex control under a frozen summary
// path: backward matrix Riccati integration and the induced affine adjoint
// and feedback.  Used to cross-check the regression solver on models where
// the decoupling field is exactly affine.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "submfg/grid.hpp"
#include "submfg/model.hpp"
#include "submfg/path_bundle.hpp"

namespace submfg {

/// Reduced linear-quadratic data: dynamics dx = (b0 + bbar1 x + b2 a) dt + noise,
/// running cost x'S(t)x + L(t).x + a'R(t)a plus terms free of (x, a),
/// terminal cost x'S_T x + L_T.x.
struct LqControlData {
  std::function<Eigen::MatrixXd(double)> bbar1, b2, R, S;
  std::function<Eigen::VectorXd(double)> b0, L;
  Eigen::MatrixXd S_T;
  Eigen::VectorXd L_T;
};

struct RiccatiSolution {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> P;   // quadratic value coefficient at grid points
  std::vector<Eigen::VectorXd> r;   // affine value coefficient
  std::vector<Eigen::MatrixXd> K1;  // feedback a = K1 x + k0
  std::vector<Eigen::VectorXd> k0;

  Eigen::VectorXd adjoint(int step, const Eigen::VectorXd& x) const {
    return 2.0 * (P[step] * x) + r[step];
  }
  Eigen::VectorXd feedback(int step, const Eigen::VectorXd& x) const {
    return K1[step] * x + k0[step];
  }
};

/// Integrates, with RK4 substeps between grid points,
///   -P' = P bbar1 + bbar1' P - P b2 R^{-1} b2' P + S,   P(T) = S_T,
///   -r' = bbar1' r - P b2 R^{-1} b2' r + 2 P b0 + L,    r(T) = L_T,
/// and tabulates Y(t,x) = 2 P x + r with minimizer a = -R^{-1} b2' (P x + r/2).
RiccatiSolution riccati_oracle(const LqControlData& data, const TimeGrid& grid,
                               int substeps = 8);

/// Reduced data for the separable quadratic family against a frozen summary
/// path s(t): running cost x'P x + (x - s)'Q (x - s) + a'R a.
LqControlData lq_control_data_variant1(const LQModelParams& params,
                                       std::function<Eigen::VectorXd(double)> summary);

/// Verifies the oracle feedback stays strictly inside the control box along
/// a state ensemble (the premise for ignoring the box in the ODE); returns
/// the worst slack (positive = interior everywhere by that margin).
double feedback_interior_slack(const RiccatiSolution& sol, const ControlBox& box,
                               const PathBundle& states);

}  // namespace submfg
