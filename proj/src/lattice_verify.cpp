#include "submfg/lattice_verify.hpp"

#include <cmath>
#include <stdexcept>

namespace submfg {

LatticeReport verify_trajectory_lattice(const ModelSpec& model, const NoisePlan& plan,
                                        const SummaryTable& frozen,
                                        const FeedbackControl& ctrl_a,
                                        const FeedbackControl& ctrl_b,
                                        const SimulateOptions& opts) {
  if (model.k != model.d)
    throw std::invalid_argument(
        "switched controls need matching state and control dimensions");

  SimulateOptions rec = opts;
  rec.record_controls = true;
  SimulationResult sim_a = simulate_forward(model, plan, frozen, ctrl_a, rec);
  SimulationResult sim_b = simulate_forward(model, plan, frozen, ctrl_b, rec);
  const PathBundle& xa = sim_a.states;
  const PathBundle& xb = sim_b.states;
  const PathBundle& ua = *sim_a.controls;
  const PathBundle& ub = *sim_b.controls;

  const TimeGrid grid = plan.grid();
  const int N = grid.n_steps;
  const int d = model.d;

  PathBundle u_meet(grid, plan.n_outer(), plan.n_inner(), d, plan.fingerprint());
  PathBundle u_join(grid, plan.n_outer(), plan.n_inner(), d, plan.fingerprint());
  for (int o = 0; o < plan.n_outer(); ++o)
    for (int i = 0; i < plan.n_inner(); ++i)
      for (int k = 0; k < N; ++k)
        for (int c = 0; c < d; ++c) {
          const bool a_lower = xa.at(o, i, k, c) < xb.at(o, i, k, c);
          u_meet.at(o, i, k, c) = a_lower ? ua.at(o, i, k, c) : ub.at(o, i, k, c);
          u_join.at(o, i, k, c) = a_lower ? ub.at(o, i, k, c) : ua.at(o, i, k, c);
        }

  PathBundle x_meet =
      simulate_with_control_paths(model, plan, frozen, u_meet, opts).states;
  PathBundle x_join =
      simulate_with_control_paths(model, plan, frozen, u_join, opts).states;
  PathBundle ref_meet = path_meet(xa, xb);
  PathBundle ref_join = path_join(xa, xb);

  LatticeReport rep;
  rep.n_steps = N;
  double acc_meet = 0.0, acc_join = 0.0;
  const auto& rm = ref_meet.raw();
  const auto& rj = ref_join.raw();
  const auto& sm = x_meet.raw();
  const auto& sj = x_join.raw();
  for (std::size_t idx = 0; idx < rm.size(); ++idx) {
    double dm = std::abs(sm[idx] - rm[idx]);
    double dj = std::abs(sj[idx] - rj[idx]);
    rep.max_meet_deviation = std::max(rep.max_meet_deviation, dm);
    rep.max_join_deviation = std::max(rep.max_join_deviation, dj);
    acc_meet += dm;
    acc_join += dj;
  }
  rep.mean_meet_deviation = acc_meet / rm.size();
  rep.mean_join_deviation = acc_join / rm.size();
  return rep;
}

}  // namespace submfg
