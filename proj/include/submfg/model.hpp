#pragma once

// Game model description: dynamics and cost evaluators plus the structural
// metadata the solvers and the structural checkers need.  Two regimes:
//  - Separable: drift coordinate i is b1_i(t, x_i) + (b2(t) a)_i with diagonal
//    b2, measure enters the running/terminal costs only.
//  - Nonseparable: drift is b0(t, m) + bbar1(t) x + b2(t) a with the measure
//    entering through the summary vector m.
// Cost gradients are part of the model because the adjoint solver consumes
// them directly.  Interactions enter every evaluator through a summary vector
// m: either functional averages <phi_j, mu> (scalar type) or a per-state
// kernel average (order-1 type).

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "submfg/expr.hpp"
#include "submfg/noise.hpp"

namespace submfg {

struct ControlBox {
  Eigen::VectorXd lower, upper;  // entries may be -inf / +inf

  ControlBox() = default;
  ControlBox(Eigen::VectorXd lo, Eigen::VectorXd hi);

  static ControlBox unbounded(int k);
  static ControlBox cube(int k, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool is_compact() const;
  Eigen::VectorXd project(const Eigen::VectorXd& a) const;
  bool contains(const Eigen::VectorXd& a, double tol = 0.0) const;

  /// Finite surrogate endpoints for grid search over unbounded coordinates.
  Eigen::VectorXd clipped_lower(double big = 1e6) const;
  Eigen::VectorXd clipped_upper(double big = 1e6) const;
};

/// One scalar functional x -> phi_j(x) of the state.
struct PhiFn {
  enum class Kind { Coord, Clamp, Tanh, Expression } kind = Kind::Coord;
  int coord = 0;            // state coordinate feeding Coord/Clamp/Tanh
  double lo = -1.0, hi = 1.0;  // Clamp bounds
  expr::NodePtr expression; // Expression kind, variables x1..xd

  static PhiFn coordinate(int c);
  static PhiFn clamp_coord(int c, double lo, double hi);
  static PhiFn tanh_coord(int c);
  static PhiFn from_expression(expr::NodePtr e);

  double eval(const Eigen::VectorXd& x) const;
};

struct InteractionSpec {
  enum class Kind { None, ScalarFunctionals, Order1Kernel } kind = Kind::None;
  std::vector<PhiFn> functions;  // scalar type, one summary per entry
  expr::NodePtr kernel;          // order-1: gamma(x, y), y the integration slot
  Eigen::VectorXd summary_lo, summary_hi;  // declared reachable summary range

  static InteractionSpec none();
  static InteractionSpec scalar(std::vector<PhiFn> fns, Eigen::VectorXd lo,
                                Eigen::VectorXd hi);
  static InteractionSpec order1(expr::NodePtr kernel, double lo, double hi);

  int n_summaries() const;
};

enum class Regime { Separable, Nonseparable };

/// Declared structural constants: K bounds coefficient growth, kappa the
/// coercivity of the running cost in the control, lambda its strong convexity.
struct ModelConstants {
  double K = 1.0;
  double kappa = 1.0;
  double lambda = 1.0;
};

struct ModelSpec {
  std::string name;
  Regime regime = Regime::Separable;
  int d = 1;   // state dimension
  int k = 1;   // control dimension
  int d1 = 1;  // idiosyncratic noise dimension
  int d2 = 0;  // common noise dimension
  double horizon = 1.0;
  ControlBox box;
  InteractionSpec interaction;
  InitialLaw initial;
  ModelConstants constants;

  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;

  /// Drift with the control term removed: b(t, x, m, 0).
  std::function<Vec(double, const Vec&, const Vec&)> drift_free;
  /// Control loading, d x k.
  std::function<Mat(double)> b2;
  /// Jacobian of drift_free in x (the control term carries no x dependence).
  std::function<Mat(double, const Vec&, const Vec&)> drift_jac_x;
  /// Row i of the idiosyncratic volatility, depends on x through x_i only.
  std::function<Eigen::RowVectorXd(int, double, double)> sigma_row;
  /// Row i of the common-noise volatility.
  std::function<Eigen::RowVectorXd(int, double, double)> sigma0_row;

  std::function<double(double, const Vec&, const Vec&, const Vec&)> h;  // (t,x,m,a)
  std::function<double(const Vec&, const Vec&)> g;                      // (x,m)
  std::function<Vec(double, const Vec&, const Vec&, const Vec&)> dx_h;
  std::function<Vec(double, const Vec&, const Vec&, const Vec&)> da_h;
  std::function<Vec(const Vec&, const Vec&)> dx_g;

  /// When true, h is quadratic in a with x/m-independent diagonal curvature:
  /// da_h(t,x,m,a) = 2 diag(quad_control_diag(t)) a + da_h(t,x,m,0), which
  /// gives the control minimizer in closed form with exact box projection.
  bool quad_control_diagonal = false;
  std::function<Vec(double)> quad_control_diag;

  Eigen::VectorXd summary_lo() const;
  Eigen::VectorXd summary_hi() const;
  int n_summaries() const { return interaction.n_summaries(); }

  Vec drift(double t, const Vec& x, const Vec& m, const Vec& a) const {
    return drift_free(t, x, m) + b2(t) * a;
  }

  Mat sigma(double t, const Vec& x) const;
  Mat sigma0(double t, const Vec& x) const;

  /// Throws when a required evaluator is missing or dimensions disagree.
  void check_wiring() const;
};

// ---------------------------------------------------------------------------
// Built-in linear-quadratic families.

/// Parameters for the two quadratic families.  Variant 1 (separable): running
/// cost x'P x + (x - s)'Q (x - s) + a'R a with s the phi-summary vector,
/// terminal cost of the same tracking form, drift b0 + bbar1 x + b2 a with
/// diagonal bbar1/b2.  Variant 2 (nonseparable): running cost
/// s_phi'Q x + a'R a + (a - s_psi)'P (a - s_psi), terminal s_phi'Q_T x, drift
/// b0c + C0 s_phi + bbar1 x + b2 a.  All matrix handles are time paths;
/// diffusion rows are affine: sigma_i = sigma_p[i] + sigma_q[i] x_i, loading
/// column i when the noise dimension is d and column 0 when it is 1.
struct LQModelParams {
  int variant = 1;
  int d = 1, k = 1;
  int d1 = 1, d2 = 0;
  double horizon = 1.0;

  std::function<Eigen::MatrixXd(double)> P, Q, R;
  Eigen::MatrixXd P_T, Q_T;

  Eigen::VectorXd b0_const;
  Eigen::MatrixXd bbar1, b2;
  Eigen::MatrixXd b0_coupling;  // variant 2 only, d x d acting on s_phi

  Eigen::VectorXd sigma_p, sigma_q, sigma0_p, sigma0_q;

  std::vector<PhiFn> phi;  // d entries
  std::vector<PhiFn> psi;  // variant 2: k entries
  Eigen::VectorXd phi_lo, phi_hi, psi_lo, psi_hi;
  bool phi_bounded_declared = true;

  ControlBox box;
  InitialLaw initial;
  std::string name = "lq";
};

struct ConditionViolation {
  std::string condition;
  double t = 0.0;
  int i = -1, j = -1;
  double value = 0.0;
  std::string note;
};

struct LqBuildReport {
  bool pass = true;
  std::vector<ConditionViolation> violations;
  std::vector<std::string> conditions_checked;
};

struct LqConditionError : std::runtime_error {
  LqBuildReport report;
  explicit LqConditionError(LqBuildReport r);
};

struct LqBuildOptions {
  bool validate = true;
  int probe_times = 21;  // time points where matrix-sign conditions are checked
};

/// Checks the family's structural conditions and returns the report without
/// building.
LqBuildReport check_lq_conditions(const LQModelParams& params,
                                  const LqBuildOptions& opts = {});

/// Builds the model; throws LqConditionError when validation is on and a
/// condition fails.
ModelSpec build_lq_model(const LQModelParams& params, const LqBuildOptions& opts = {});

// Convenience constructors for common handles.
std::function<Eigen::MatrixXd(double)> const_mat(Eigen::MatrixXd m);

}  // namespace submfg
