#pragma once

// Hamiltonian H(t,x,m,y,a) = b(t,x,m,a).y + h(t,x,m,a) and its minimizer over
// the control box.  Models that declare diagonal quadratic control cost get
// the stationarity solve with exact componentwise projection; everything else
// runs projected gradient descent with backtracking.  A bracketing grid
// search is provided as an independent cross-check oracle.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "submfg/model.hpp"

namespace submfg {

struct ConvergenceError : std::runtime_error {
  std::vector<double> history;
  ConvergenceError(const std::string& msg, std::vector<double> hist)
      : std::runtime_error(msg), history(std::move(hist)) {}
};

double hamiltonian_eval(const ModelSpec& model, double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& m, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& a);

/// Gradient of the Hamiltonian in the control: b2(t)' y + da_h(t,x,m,a).
Eigen::VectorXd hamiltonian_grad_a(const ModelSpec& model, double t,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd& a);

struct MinimizeOptions {
  double grad_tol = 1e-10;  // projected-gradient-mapping norm at exit
  int max_iters = 500;
};

struct MinimizeResult {
  Eigen::VectorXd argmin;
  double value = 0.0;
  int iterations = 0;  // 0 when the closed form applied
  double grad_norm = 0.0;
  bool closed_form = false;
};

/// Minimizes a -> H(t,x,m,y,a) over the control box.  Throws
/// ConvergenceError (carrying the objective history) if the iterative path
/// fails to reach tolerance.
MinimizeResult minimize_hamiltonian(const ModelSpec& model, double t,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                                    const Eigen::VectorXd& y,
                                    const MinimizeOptions& opts = {});

/// Independent check: cyclic coordinate descent where each one-dimensional
/// slice is minimized by a bracketing grid refined down to `step`.  Unbounded
/// box coordinates are clipped to +-big.  Valid as a cross-check for costs
/// whose control coupling is diagonal (the built-in families).
Eigen::VectorXd grid_search_hamiltonian(const ModelSpec& model, double t,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& m,
                                        const Eigen::VectorXd& y, double step = 1e-3,
                                        double big = 1e6);

/// Randomized audit of the comparative statics of the minimizer: raising x
/// and m while lowering y must not lower any minimizer coordinate.
struct MonotonicityProbeOptions {
  int n_probes = 1000;
  std::uint64_t seed = 2024;
  double tol = 1e-8;
  double x_halfwidth = 2.0;  // probes drawn in [-w, w]^d around 0
  double y_halfwidth = 3.0;
};

struct MonotonicityProbeReport {
  int n_checked = 0;
  int n_violations = 0;
  double worst_gap = 0.0;  // most positive a_low - a_high coordinate gap
  // witness of the worst violation
  double t = 0.0;
  Eigen::VectorXd x_lo, x_hi, m_lo, m_hi, y_lo, y_hi, a_lo, a_hi;
};

MonotonicityProbeReport feedback_monotonicity_probe(
    const ModelSpec& model, const MonotonicityProbeOptions& opts = {});

}  // namespace submfg
