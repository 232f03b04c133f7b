#include "submfg/simulate.hpp"

#include <cmath>
#include <string>

#include "submfg/errors.hpp"
#include "submfg/parallel.hpp"

namespace submfg {

FeedbackControl constant_control(Eigen::VectorXd a) {
  return [a = std::move(a)](int, double, const Eigen::VectorXd&,
                            const Eigen::VectorXd&) { return a; };
}

namespace {

SimulationResult run_simulation(const ModelSpec& model, const NoisePlan& plan,
                                const SummaryTable* frozen,
                                const FeedbackControl& control,
                                const SimulateOptions& opts,
                                const PathBundle* control_paths = nullptr) {
  if (plan.dim_x() != model.d)
    throw std::invalid_argument("noise plan initial law dimension does not match model");
  if (plan.dim_w() != model.d1 || plan.dim_b() != model.d2)
    throw std::invalid_argument("noise plan Brownian dimensions do not match model");

  const TimeGrid grid = plan.grid();
  const int N = grid.n_steps;
  const int d = model.d;
  const int k_dim = model.k;
  const int n_outer = plan.n_outer();
  const int n_inner = plan.n_inner();
  const double dt = grid.dt();
  const bool self_consistent = frozen == nullptr;
  const auto& inter = model.interaction;

  SimulationResult res;
  res.states = PathBundle(grid, n_outer, n_inner, d, plan.fingerprint());
  if (opts.record_controls)
    res.controls = PathBundle(grid, n_outer, n_inner, k_dim, plan.fingerprint());

  parallel_for(n_outer, opts.threads, [&](int o) {
    for (int i = 0; i < n_inner; ++i)
      res.states.state(o, i, 0) = plan.xi(o, i);

    Eigen::VectorXd scenario_summary;  // scalar-functional self-consistent cache
    for (int k = 0; k < N; ++k) {
      const double t = grid.time(k);
      const Eigen::MatrixXd b2t = model.b2(t);
      const Eigen::VectorXd dB = plan.dB(o, k);

      Cloud live;  // only for self-consistent summaries
      if (self_consistent && inter.kind != InteractionSpec::Kind::None) {
        live.points.resize(n_inner, d);
        for (int i = 0; i < n_inner; ++i)
          live.points.row(i) = res.states.state(o, i, k).transpose();
        live.weights = Eigen::VectorXd::Constant(n_inner, 1.0 / n_inner);
        if (inter.kind == InteractionSpec::Kind::ScalarFunctionals)
          scenario_summary = summaries(live, inter).m;
      }

      for (int i = 0; i < n_inner; ++i) {
        Eigen::VectorXd x = res.states.state(o, i, k);
        Eigen::VectorXd m;
        if (self_consistent) {
          switch (inter.kind) {
            case InteractionSpec::Kind::None:
              m = Eigen::VectorXd(0);
              break;
            case InteractionSpec::Kind::ScalarFunctionals:
              m = scenario_summary;
              break;
            case InteractionSpec::Kind::Order1Kernel:
              m = summaries(live, inter, &x).m;
              break;
          }
        } else {
          m = frozen->eval(o, k, x);
        }

        Eigen::VectorXd a = model.box.project(
            control_paths != nullptr ? Eigen::VectorXd(control_paths->state(o, i, k))
                                     : control(k, t, x, m));
        if (res.controls) res.controls->state(o, i, k) = a;

        Eigen::VectorXd next = x + (model.drift_free(t, x, m) + b2t * a) * dt;
        const Eigen::VectorXd dW = plan.dW(o, i, k);
        for (int c = 0; c < d; ++c) {
          next(c) += model.sigma_row(c, t, x(c)).dot(dW);
          if (model.d2 > 0) next(c) += model.sigma0_row(c, t, x(c)).dot(dB);
        }
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > opts.blowup_limit)
          throw NumericalError("state blow-up in scenario " + std::to_string(o) +
                               ", particle " + std::to_string(i) + ", step " +
                               std::to_string(k + 1));
        res.states.state(o, i, k + 1) = next;
      }
    }
  });
  return res;
}

}  // namespace

SimulationResult simulate_forward(const ModelSpec& model, const NoisePlan& plan,
                                  const SummaryTable& frozen,
                                  const FeedbackControl& control,
                                  const SimulateOptions& opts) {
  return run_simulation(model, plan, &frozen, control, opts);
}

SimulationResult simulate_self_consistent(const ModelSpec& model,
                                          const NoisePlan& plan,
                                          const FeedbackControl& control,
                                          const SimulateOptions& opts) {
  return run_simulation(model, plan, nullptr, control, opts);
}

SimulationResult simulate_with_control_paths(const ModelSpec& model,
                                             const NoisePlan& plan,
                                             const SummaryTable& frozen,
                                             const PathBundle& controls,
                                             const SimulateOptions& opts) {
  if (controls.n_outer() != plan.n_outer() || controls.n_inner() != plan.n_inner() ||
      !(controls.grid() == plan.grid()) || controls.dim() != model.k)
    throw std::invalid_argument("control paths do not match the plan shape");
  return run_simulation(model, plan, &frozen, FeedbackControl{}, opts, &controls);
}

}  // namespace submfg
