#include "submfg/equilibrium.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "submfg/errors.hpp"
#include "submfg/parallel.hpp"

namespace submfg {

namespace {

// Coordinatewise extremum of b2(t) a over the control box.  For the upper
// bracket every row takes the largest attainable contribution, for the lower
// the smallest; requires finite box endpoints.
Eigen::VectorXd extremal_control_term(const Eigen::MatrixXd& b2t,
                                      const ControlBox& box, bool upper) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b2t.rows());
  for (int i = 0; i < b2t.rows(); ++i) {
    double s = 0.0;
    for (int l = 0; l < b2t.cols(); ++l) {
      const double lo = b2t(i, l) * box.lower(l);
      const double hi = b2t(i, l) * box.upper(l);
      s += upper ? std::max(lo, hi) : std::min(lo, hi);
    }
    out(i) = s;
  }
  return out;
}

PathBundle bound_process(const ModelSpec& model, const NoisePlan& plan,
                         bool upper, int threads) {
  if (!model.box.is_compact())
    throw std::invalid_argument(
        "extremal bracket needs a compact control box; supply explicit "
        "bracket bundles instead");
  const int J = model.n_summaries();
  Eigen::VectorXd m_ext =
      upper ? model.summary_hi() : model.summary_lo();
  if (J > 0 && !m_ext.allFinite())
    throw std::invalid_argument(
        "extremal bracket needs finite declared summary ranges");
  if (plan.dim_x() != model.d || plan.dim_w() != model.d1 ||
      plan.dim_b() != model.d2)
    throw std::invalid_argument("noise plan dimensions do not match model");

  const TimeGrid& grid = plan.grid();
  const int N = grid.n_steps;
  PathBundle out(grid, plan.n_outer(), plan.n_inner(), model.d,
                 plan.fingerprint());

  const int nthreads = resolve_threads(threads);
  parallel_for(plan.n_outer(), nthreads, [&](int o) {
    for (int i = 0; i < plan.n_inner(); ++i)
      out.state(o, i, 0) = plan.xi(o, i);
    const double dt = grid.dt();
    for (int k = 0; k < N; ++k) {
      const double t = grid.time(k);
      const Eigen::MatrixXd b2t = model.b2(t);
      const Eigen::VectorXd slab = extremal_control_term(b2t, model.box, upper);
      const Eigen::VectorXd dB =
          model.d2 > 0 ? plan.dB(o, k) : Eigen::VectorXd();
      for (int i = 0; i < plan.n_inner(); ++i) {
        const Eigen::VectorXd x = out.state(o, i, k);
        const Eigen::VectorXd dW = plan.dW(o, i, k);
        Eigen::VectorXd next = x + (model.drift_free(t, x, m_ext) + slab) * dt;
        for (int c = 0; c < model.d; ++c) {
          next(c) += model.sigma_row(c, t, x(c)).dot(dW);
          if (model.d2 > 0) next(c) += model.sigma0_row(c, t, x(c)).dot(dB);
        }
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e12)
          throw NumericalError("bracket state blow-up in scenario " +
                               std::to_string(o) + ", particle " +
                               std::to_string(i) + ", step " +
                               std::to_string(k));
        out.state(o, i, k + 1) = next;
      }
    }
  });
  return out;
}

void validate_user_bundle(const PathBundle& b, const NoisePlan& plan,
                          const char* which) {
  if (b.n_outer() != plan.n_outer() || b.n_inner() != plan.n_inner() ||
      b.grid().n_points() != plan.grid().n_points() || b.dim() != plan.dim_x())
    throw std::invalid_argument(std::string(which) +
                                " bracket bundle does not match the noise "
                                "plan's ensemble shape");
}

PathBundle starting_bundle(const ModelSpec& model, const NoisePlan& plan,
                           Direction direction, BracketMode mode,
                           const PathBundle* user_lower,
                           const PathBundle* user_upper, int threads) {
  const bool upper = direction == Direction::Maximal;
  if (mode == BracketMode::UserBracket) {
    const PathBundle* chosen = upper ? user_upper : user_lower;
    if (chosen == nullptr)
      throw std::invalid_argument(
          "user bracket mode needs the bracket bundle for the requested "
          "direction");
    validate_user_bundle(*chosen, plan, upper ? "upper" : "lower");
    return *chosen;
  }
  return bound_process(model, plan, upper, threads);
}

std::vector<Eigen::VectorXd> table_values(const SummaryTable& table,
                                          const TimeGrid& grid, int n_outer) {
  const int np = grid.n_points();
  std::vector<Eigen::VectorXd> values(static_cast<std::size_t>(n_outer) * np);
  for (int o = 0; o < n_outer; ++o)
    for (int k = 0; k < np; ++k)
      values[static_cast<std::size_t>(o) * np + k] = table.cached(o, k);
  return values;
}

}  // namespace

PathBundle lower_bound_process(const ModelSpec& model, const NoisePlan& plan,
                               int threads) {
  return bound_process(model, plan, /*upper=*/false, threads);
}

PathBundle upper_bound_process(const ModelSpec& model, const NoisePlan& plan,
                               int threads) {
  return bound_process(model, plan, /*upper=*/true, threads);
}

PicardResult best_reply(const ModelSpec& model, const NoisePlan& plan,
                        const ConditionalLawFlow& flow,
                        const PicardSettings& settings,
                        const BsdeSolution* warm_start) {
  SummaryTable table(flow, model.interaction);
  return solve_fbsde_picard(model, plan, table, settings, warm_start);
}

PicardResult best_reply_table(const ModelSpec& model, const NoisePlan& plan,
                              const SummaryTable& table,
                              const PicardSettings& settings,
                              const BsdeSolution* warm_start) {
  return solve_fbsde_picard(model, plan, table, settings, warm_start);
}

EquilibriumRun iterate_best_reply(const ModelSpec& model, const NoisePlan& plan,
                                  Direction direction,
                                  const EquilibriumSettings& settings) {
  using clock = std::chrono::steady_clock;

  EquilibriumRun run;
  run.direction = direction;
  run.plan_fingerprint = plan.fingerprint();

  PathBundle x = starting_bundle(model, plan, direction, settings.bracket,
                                 settings.user_lower, settings.user_upper,
                                 settings.picard.threads);
  run.final_scale = x.state_scale();
  run.tol_used = settings.tol_scale * run.final_scale;

  BsdeSolution warm_store;
  const BsdeSolution* warm = nullptr;
  const int N = plan.grid().n_steps;

  for (int n = 1; n <= settings.max_outer_iters; ++n) {
    const auto t0 = clock::now();
    ConditionalLawFlow flow = conditional_empirical_law(x);
    SummaryTable table(flow, model.interaction);

    PicardResult pr;
    try {
      pr = solve_fbsde_picard(model, plan, table, settings.picard, warm);
    } catch (const ConvergenceError& e) {
      run.stop = StopReason::Divergence;
      run.flagged = true;
      run.warnings.push_back("best-reply solve failed at outer iteration " +
                             std::to_string(n) + ": " + e.what());
      break;
    }

    IterationStats st;
    st.iter = n;
    st.distance = pathspace_distance(pr.x, x);
    const double scale = pr.x.state_scale();
    run.final_scale = scale;
    run.tol_used = settings.tol_scale * scale;

    const double mono_tol = settings.mono_tol_scale * scale;
    const DominanceReport mono = direction == Direction::Minimal
                                     ? check_dominance_pathwise(x, pr.x, mono_tol)
                                     : check_dominance_pathwise(pr.x, x, mono_tol);
    st.violation = mono.violation;
    st.w2_start = bundle_w2_at_step(pr.x, x, 0);
    st.w2_mid = bundle_w2_at_step(pr.x, x, N / 2);
    st.w2_end = bundle_w2_at_step(pr.x, x, N);
    st.picard_iters = pr.iterations;
    st.picard_change = pr.final_change;
    st.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    run.history.push_back(st);

    if (mono.violation > settings.hard_flag_scale * scale) {
      run.flagged = true;
      run.warnings.push_back(
          "ordering violated at outer iteration " + std::to_string(n) +
          ": violation " + std::to_string(mono.violation) + " exceeds " +
          std::to_string(settings.hard_flag_scale * scale));
    }

    warm_store = std::move(pr.adjoint);
    warm = &warm_store;
    x = std::move(pr.x);

    if (st.distance <= run.tol_used) {
      run.stop = StopReason::TolReached;
      break;
    }
  }

  if (run.stop == StopReason::MaxIters)
    run.warnings.push_back(
        "outer iteration budget exhausted before the distance tolerance");

  run.x = std::move(x);
  run.adjoint = std::move(warm_store);
  return run;
}

EquilibriumRun fictitious_play(const ModelSpec& model, const NoisePlan& plan,
                               Direction direction,
                               const FictitiousPlaySettings& settings) {
  using clock = std::chrono::steady_clock;

  if (model.interaction.kind == InteractionSpec::Kind::Order1Kernel)
    throw std::invalid_argument(
        "averaged scheme needs scalar summaries: averaging a state-dependent "
        "kernel summary over rounds is not exact");

  EquilibriumRun run;
  run.direction = direction;
  run.plan_fingerprint = plan.fingerprint();

  PathBundle prev = starting_bundle(model, plan, direction, settings.bracket,
                                    settings.user_start, settings.user_start,
                                    settings.picard.threads);
  run.final_scale = prev.state_scale();
  run.tol_used = settings.tol_scale * run.final_scale;

  const TimeGrid& grid = plan.grid();
  const int N = grid.n_steps;
  const int n_outer = plan.n_outer();

  // Running average of the round summaries; the summary map is linear in the
  // measure, so averaging summaries equals summarizing the averaged measure.
  std::vector<Eigen::VectorXd> avg;
  {
    ConditionalLawFlow flow0 = conditional_empirical_law(prev);
    SummaryTable table0(flow0, model.interaction);
    avg = table_values(table0, grid, n_outer);
  }

  PathBundle snapshot = prev;
  int next_check = 2;

  BsdeSolution warm_store;
  const BsdeSolution* warm = nullptr;

  for (int r = 1; r <= settings.max_rounds; ++r) {
    const auto t0 = clock::now();
    SummaryTable table(grid, n_outer, avg);

    PicardResult pr;
    try {
      pr = solve_fbsde_picard(model, plan, table, settings.picard, warm);
    } catch (const ConvergenceError& e) {
      run.stop = StopReason::Divergence;
      run.flagged = true;
      run.warnings.push_back("best-reply solve failed at round " +
                             std::to_string(r) + ": " + e.what());
      break;
    }

    std::vector<Eigen::VectorXd> s_new;
    {
      ConditionalLawFlow flow_r = conditional_empirical_law(pr.x);
      SummaryTable table_r(flow_r, model.interaction);
      s_new = table_values(table_r, grid, n_outer);
    }

    IterationStats st;
    st.iter = r;
    st.distance = pathspace_distance(pr.x, prev);
    const double scale = pr.x.state_scale();
    run.final_scale = scale;
    run.tol_used = settings.tol_scale * scale;

    const DominanceReport mono =
        direction == Direction::Minimal
            ? check_dominance_pathwise(prev, pr.x, settings.mono_tol * scale)
            : check_dominance_pathwise(pr.x, prev, settings.mono_tol * scale);
    st.violation = mono.violation;
    st.w2_start = bundle_w2_at_step(pr.x, prev, 0);
    st.w2_mid = bundle_w2_at_step(pr.x, prev, N / 2);
    st.w2_end = bundle_w2_at_step(pr.x, prev, N);
    st.picard_iters = pr.iterations;
    st.picard_change = pr.final_change;

    double min_inc = 0.0;
    bool first_entry = true;
    for (std::size_t idx = 0; idx < avg.size(); ++idx) {
      const Eigen::VectorXd updated = (s_new[idx] + r * avg[idx]) / (r + 1.0);
      for (int j = 0; j < updated.size(); ++j) {
        const double inc = direction == Direction::Minimal
                               ? updated(j) - avg[idx](j)
                               : avg[idx](j) - updated(j);
        if (first_entry || inc < min_inc) {
          min_inc = inc;
          first_entry = false;
        }
      }
      avg[idx] = updated;
    }
    st.summary_min_increment = min_inc;
    if (min_inc < -settings.mono_tol) {
      run.flagged = true;
      run.warnings.push_back("averaged summary moved against the expected "
                             "order at round " +
                             std::to_string(r) + " by " +
                             std::to_string(-min_inc));
    }

    st.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    run.history.push_back(st);

    warm_store = std::move(pr.adjoint);
    warm = &warm_store;
    prev = std::move(pr.x);

    // The round distances decay like 1/r, too slowly for a consecutive-round
    // test; comparing round r against round r/2 sees the whole tail.
    if (r == next_check) {
      const double cauchy = pathspace_distance(prev, snapshot);
      if (cauchy <= run.tol_used) {
        run.stop = StopReason::TolReached;
        break;
      }
      snapshot = prev;
      next_check *= 2;
    }
  }

  if (run.stop == StopReason::MaxIters)
    run.warnings.push_back(
        "round budget exhausted before the halving-window tolerance");

  run.x = std::move(prev);
  run.adjoint = std::move(warm_store);
  return run;
}

ConditionalLawFlow shift_flow(const ConditionalLawFlow& flow,
                              const Eigen::VectorXd& delta) {
  if (delta.size() != flow.dim())
    throw std::invalid_argument("shift vector dimension does not match flow");
  ConditionalLawFlow out(flow.grid(), flow.n_outer(), flow.dim(),
                         flow.plan_fingerprint(), flow.provenance() + "+shift");
  for (int o = 0; o < flow.n_outer(); ++o)
    for (int k = 0; k < flow.grid().n_points(); ++k) {
      const Cloud& src = flow.cloud(o, k);
      Cloud& dst = out.cloud(o, k);
      dst.points = src.points.rowwise() + delta.transpose();
      dst.weights = src.weights;
    }
  return out;
}

ComparisonReport comparison_harness(const ModelSpec& model, const NoisePlan& plan,
                                    const ConditionalLawFlow& flow_low,
                                    const ConditionalLawFlow& flow_high,
                                    const PicardSettings& settings,
                                    double tol_scale) {
  SummaryTable table_low(flow_low, model.interaction);
  SummaryTable table_high(flow_high, model.interaction);
  PicardResult low = solve_fbsde_picard(model, plan, table_low, settings);
  PicardResult high = solve_fbsde_picard(model, plan, table_high, settings);

  ComparisonReport rep;
  rep.picard_iters_low = low.iterations;
  rep.picard_iters_high = high.iterations;
  rep.tolerance =
      tol_scale * std::max(low.x.state_scale(), high.x.state_scale());

  const DominanceReport state =
      check_dominance_pathwise(low.x, high.x, rep.tolerance);
  rep.v_state = state.violation;
  rep.max_state = state.max_pointwise;
  rep.pass = state.pass;

  if (model.regime == Regime::Nonseparable) {
    rep.adjoint_checked = true;
    const DominanceReport adj =
        check_dominance_pathwise(high.adjoint.y, low.adjoint.y, rep.tolerance);
    rep.v_adjoint = adj.violation;
    rep.max_adjoint = adj.max_pointwise;
    rep.pass = rep.pass && adj.pass;
  }
  return rep;
}

double equilibrium_residual(const ModelSpec& model, const NoisePlan& plan,
                            const PathBundle& x_final,
                            const PicardSettings& settings) {
  ConditionalLawFlow flow = conditional_empirical_law(x_final);
  SummaryTable table(flow, model.interaction);
  PicardResult pr = solve_fbsde_picard(model, plan, table, settings);
  return pathspace_distance(pr.x, x_final);
}

}  // namespace submfg
