#include "submfg/picard.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace submfg {

double quadrature_l2_distance(const PathBundle& a, const PathBundle& b) {
  if (!a.same_shape(b) || a.plan_fingerprint() != b.plan_fingerprint())
    throw std::invalid_argument("quadrature distance needs same-plan bundles");
  const TimeGrid& g = a.grid();
  const int np = g.n_points();
  double acc = 0.0;
  for (int o = 0; o < a.n_outer(); ++o)
    for (int i = 0; i < a.n_inner(); ++i)
      for (int k = 0; k < np; ++k)
        acc += g.quad_weight(k) * (a.state(o, i, k) - b.state(o, i, k)).squaredNorm();
  return std::sqrt(acc / a.n_paths());
}

FeedbackControl decoupling_control(const ModelSpec& model, const BsdeSolution* field) {
  if (field == nullptr) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.d);
    return [&model, zero](int, double t, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& m) {
      return minimize_hamiltonian(model, t, x, m, zero).argmin;
    };
  }
  return [&model, field](int step, double t, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& m) {
    return minimize_hamiltonian(model, t, x, m, field->eval_y(step, x, m)).argmin;
  };
}

PicardResult solve_fbsde_picard(const ModelSpec& model, const NoisePlan& plan,
                                const SummaryTable& flow,
                                const PicardSettings& settings,
                                const BsdeSolution* warm_start) {
  if (settings.max_iters < 1 || settings.tol <= 0.0 || settings.damping <= 0.0 ||
      settings.damping > 1.0)
    throw std::invalid_argument("bad fixed-point settings");

  SimulateOptions sim_opts;
  sim_opts.threads = settings.threads;
  BsdeOptions bsde_opts;
  bsde_opts.estimate_z = settings.estimate_z;
  bsde_opts.threads = settings.threads;

  BsdeSolution prev;
  if (warm_start != nullptr) {
    if (warm_start->y.n_outer() != plan.n_outer() ||
        warm_start->y.n_inner() != plan.n_inner() ||
        warm_start->y.plan_fingerprint() != plan.fingerprint())
      throw std::invalid_argument("warm start does not match the noise plan");
    if (warm_start->layout.n_features !=
        build_basis(model.d, flow.n_summaries(), settings.basis.degree).n_features)
      throw std::invalid_argument("warm start was fitted on a different basis");
    prev = *warm_start;
  } else {
    SimulationResult sim0 =
        simulate_forward(model, plan, flow, decoupling_control(model, nullptr), sim_opts);
    prev = solve_bsde_backward(model, plan, sim0.states, flow, settings.basis, bsde_opts);
  }

  PicardResult res;
  double scale = 1.0 + prev.y.state_scale();
  for (int n = 1; n <= settings.max_iters; ++n) {
    SimulationResult sim =
        simulate_forward(model, plan, flow, decoupling_control(model, &prev), sim_opts);
    BsdeSolution cur =
        solve_bsde_backward(model, plan, sim.states, flow, settings.basis, bsde_opts);

    double change = quadrature_l2_distance(cur.y, prev.y);
    res.change_history.push_back(change);
    if (!std::isfinite(change) || change > 1e8 * scale)
      throw ConvergenceError("fixed-point loop diverged at sweep " + std::to_string(n),
                             res.change_history);
    if (change <= settings.tol) {
      res.x = std::move(sim.states);
      res.adjoint = std::move(cur);
      res.iterations = n;
      res.final_change = change;
      res.converged = true;
      return res;
    }
    if (settings.damping < 1.0)
      for (std::size_t k = 0; k < cur.coeffs.size(); ++k) {
        // The two sweeps fit on different samples, so their feature
        // standardizations differ; re-express the old field in the new basis
        // before blending.  The change of basis is exact for polynomials.
        Eigen::MatrixXd C = standardization_change(
            cur.layout, prev.shift[k], prev.scale[k], cur.shift[k], cur.scale[k]);
        cur.coeffs[k] = settings.damping * cur.coeffs[k] +
                        (1.0 - settings.damping) * (C * prev.coeffs[k]);
      }
    prev = std::move(cur);
  }
  throw ConvergenceError(
      "fixed-point loop did not meet tolerance in " +
          std::to_string(settings.max_iters) + " sweeps (last change " +
          std::to_string(res.change_history.empty() ? 0.0
                                                    : res.change_history.back()) +
          ")",
      res.change_history);
}

PicardResult solve_fbsde_picard(const ModelSpec& model, const NoisePlan& plan,
                                const ConditionalLawFlow& flow,
                                const PicardSettings& settings) {
  SummaryTable table(flow, model.interaction);
  return solve_fbsde_picard(model, plan, table, settings, nullptr);
}

}  // namespace submfg
