#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "submfg/equilibrium.hpp"
#include "submfg/expr.hpp"
#include "submfg/meanfield.hpp"
#include "submfg/model.hpp"
#include "submfg/noise.hpp"
#include "submfg/simulate.hpp"

using namespace submfg;

namespace {

// Scalar mean-reverting family with a tracking cost toward the clamped
// population mean.  Compact box and bounded interaction, so the extremal
// brackets are admissible.
LQModelParams coupled_params() {
  LQModelParams p;
  p.variant = 1;
  p.d = 1;
  p.k = 1;
  p.d1 = 1;
  p.d2 = 0;
  p.horizon = 1.0;
  p.P = const_mat(Eigen::MatrixXd::Zero(1, 1));
  p.Q = const_mat(Eigen::MatrixXd::Constant(1, 1, 0.4));
  p.R = const_mat(Eigen::MatrixXd::Identity(1, 1));
  p.P_T = Eigen::MatrixXd::Constant(1, 1, 0.3);
  p.Q_T = Eigen::MatrixXd::Constant(1, 1, 0.2);
  p.b0_const = Eigen::VectorXd::Constant(1, 0.05);
  p.bbar1 = Eigen::MatrixXd::Constant(1, 1, -0.3);
  p.b2 = Eigen::MatrixXd::Identity(1, 1);
  p.sigma_p = Eigen::VectorXd::Constant(1, 0.3);
  p.sigma_q = Eigen::VectorXd::Zero(1);
  p.sigma0_p = Eigen::VectorXd::Zero(1);
  p.sigma0_q = Eigen::VectorXd::Zero(1);
  p.phi = {PhiFn::clamp_coord(0, -2.0, 2.0)};
  p.phi_lo = Eigen::VectorXd::Constant(1, -2.0);
  p.phi_hi = Eigen::VectorXd::Constant(1, 2.0);
  p.box = ControlBox::cube(1, -1.0, 1.0);
  p.initial = InitialLaw::dirac(Eigen::VectorXd::Constant(1, 0.2));
  p.name = "coupled-test";
  return p;
}

NoisePlan small_plan(const ModelSpec& model, std::uint64_t seed = 5) {
  return NoisePlan(seed, TimeGrid{1.0, 10}, 2, 64, model.d1, model.d2,
                   model.initial);
}

std::vector<Eigen::VectorXd> summary_values(const PathBundle& states,
                                            const InteractionSpec& spec) {
  ConditionalLawFlow flow = conditional_empirical_law(states);
  SummaryTable table(flow, spec);
  const int np = states.grid().n_points();
  std::vector<Eigen::VectorXd> vals(static_cast<std::size_t>(states.n_outer()) *
                                    np);
  for (int o = 0; o < states.n_outer(); ++o)
    for (int k = 0; k < np; ++k)
      vals[static_cast<std::size_t>(o) * np + k] = table.cached(o, k);
  return vals;
}

bool message_contains(const std::invalid_argument& e, const char* needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("extremal brackets enclose the best reply pathwise") {
  ModelSpec model = build_lq_model(coupled_params());
  NoisePlan plan = small_plan(model);

  PathBundle lo = lower_bound_process(model, plan);
  PathBundle hi = upper_bound_process(model, plan);
  CHECK(lo.plan_fingerprint() == plan.fingerprint());
  // the bracket drifts differ by the full control span, so the bundles split
  DominanceReport order = check_dominance_pathwise(lo, hi, 1e-9);
  CHECK(order.violation == 0.0);
  CHECK(pathspace_distance(lo, hi) > 0.1);

  PicardResult reply =
      best_reply(model, plan, conditional_empirical_law(lo), {});
  CHECK(reply.converged);
  CHECK(check_dominance_pathwise(lo, reply.x, 1e-9).violation == 0.0);
  CHECK(check_dominance_pathwise(reply.x, hi, 1e-9).violation == 0.0);
}

TEST_CASE("bracket preconditions are enforced") {
  LQModelParams p = coupled_params();
  ModelSpec model = build_lq_model(p);
  NoisePlan plan = small_plan(model);

  SUBCASE("unbounded box") {
    LQModelParams open = coupled_params();
    open.box = ControlBox::unbounded(1);
    ModelSpec m = build_lq_model(open);
    try {
      lower_bound_process(m, plan);
      FAIL("expected a precondition failure");
    } catch (const std::invalid_argument& e) {
      CHECK(message_contains(e, "compact control box"));
    }
  }
  SUBCASE("unbounded summary ranges") {
    ModelSpec m = build_lq_model(p);
    const double inf = std::numeric_limits<double>::infinity();
    m.interaction = InteractionSpec::scalar(
        {PhiFn::coordinate(0)}, Eigen::VectorXd::Constant(1, -inf),
        Eigen::VectorXd::Constant(1, inf));
    try {
      upper_bound_process(m, plan);
      FAIL("expected a precondition failure");
    } catch (const std::invalid_argument& e) {
      CHECK(message_contains(e, "finite declared summary ranges"));
    }
  }
  SUBCASE("plan dimension mismatch") {
    NoisePlan wide(5, TimeGrid{1.0, 10}, 2, 64, 2, 0, model.initial);
    try {
      lower_bound_process(model, wide);
      FAIL("expected a precondition failure");
    } catch (const std::invalid_argument& e) {
      CHECK(message_contains(e, "noise plan dimensions"));
    }
  }
  SUBCASE("user bracket without a bundle") {
    EquilibriumSettings s;
    s.bracket = BracketMode::UserBracket;
    try {
      iterate_best_reply(model, plan, Direction::Minimal, s);
      FAIL("expected a precondition failure");
    } catch (const std::invalid_argument& e) {
      CHECK(message_contains(e, "needs the bracket bundle"));
    }
  }
  SUBCASE("user bracket with a mismatched bundle") {
    PathBundle wrong(plan.grid(), 2, 63, 1, plan.fingerprint());
    EquilibriumSettings s;
    s.bracket = BracketMode::UserBracket;
    s.user_lower = &wrong;
    try {
      iterate_best_reply(model, plan, Direction::Minimal, s);
      FAIL("expected a precondition failure");
    } catch (const std::invalid_argument& e) {
      CHECK(message_contains(e, "ensemble shape"));
    }
  }
}

TEST_CASE("decoupled control makes the first reply a fixed point") {
  LQModelParams p = coupled_params();
  p.b2 = Eigen::MatrixXd::Zero(1, 1);
  ModelSpec model = build_lq_model(p);
  NoisePlan plan = small_plan(model);

  EquilibriumRun run = iterate_best_reply(model, plan, Direction::Minimal);
  CHECK(run.stop == StopReason::TolReached);
  CHECK(run.history.size() == 1);
  CHECK(run.history[0].distance == 0.0);
  CHECK(run.history[0].violation == 0.0);
  CHECK(!run.flagged);
  CHECK(equilibrium_residual(model, plan, run.x, {}) <= 1e-10);
}

TEST_CASE("best reply is deterministic for a fixed plan and flow") {
  ModelSpec model = build_lq_model(coupled_params());
  NoisePlan plan = small_plan(model);
  ConditionalLawFlow flow =
      conditional_empirical_law(lower_bound_process(model, plan));
  PicardResult a = best_reply(model, plan, flow, {});
  PicardResult b = best_reply(model, plan, flow, {});
  CHECK(pathspace_distance(a.x, b.x) == 0.0);
  CHECK(pathspace_distance(a.adjoint.y, b.adjoint.y) == 0.0);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("minimal iteration converges and sits below the maximal one") {
  ModelSpec model = build_lq_model(coupled_params());
  NoisePlan plan = small_plan(model);

  EquilibriumSettings s;
  s.max_outer_iters = 25;
  EquilibriumRun lo = iterate_best_reply(model, plan, Direction::Minimal, s);
  EquilibriumRun hi = iterate_best_reply(model, plan, Direction::Maximal, s);

  CHECK(lo.stop == StopReason::TolReached);
  CHECK(hi.stop == StopReason::TolReached);
  CHECK(!lo.flagged);
  CHECK(!hi.flagged);
  for (const IterationStats& st : lo.history)
    CHECK(st.violation <= 1e-3 * lo.final_scale);

  DominanceReport order =
      check_dominance_pathwise(lo.x, hi.x, 1e-3 * lo.final_scale);
  CHECK(order.pass);

  // one more reply application stays within a few stopping tolerances
  CHECK(equilibrium_residual(model, plan, lo.x, s.picard) <= 3.0 * lo.tol_used);

  SUBCASE("a user-supplied bracket reproduces the built-in one") {
    PathBundle start = lower_bound_process(model, plan);
    EquilibriumSettings us = s;
    us.bracket = BracketMode::UserBracket;
    us.user_lower = &start;
    EquilibriumRun again = iterate_best_reply(model, plan, Direction::Minimal, us);
    CHECK(pathspace_distance(again.x, lo.x) == 0.0);
    CHECK(again.history.size() == lo.history.size());
  }
}

TEST_CASE("averaged scheme mixes rounds with the declared weights") {
  ModelSpec model = build_lq_model(coupled_params());
  NoisePlan plan = small_plan(model);
  const TimeGrid& grid = plan.grid();

  FictitiousPlaySettings fs;
  fs.max_rounds = 2;
  EquilibriumRun fp = fictitious_play(model, plan, Direction::Minimal, fs);
  REQUIRE(fp.history.size() == 2);
  CHECK(fp.stop == StopReason::MaxIters);

  // replay the declared update by hand: round r best-replies to the running
  // average and the average moves to (s_r + r * avg) / (r + 1)
  PathBundle start = lower_bound_process(model, plan);
  std::vector<Eigen::VectorXd> avg = summary_values(start, model.interaction);

  PicardResult r1 = best_reply_table(
      model, plan, SummaryTable(grid, plan.n_outer(), avg), fs.picard);
  CHECK(fp.history[0].distance == pathspace_distance(r1.x, start));

  std::vector<Eigen::VectorXd> s1 = summary_values(r1.x, model.interaction);
  for (std::size_t i = 0; i < avg.size(); ++i)
    avg[i] = (s1[i] + 1 * avg[i]) / 2.0;

  PicardResult r2 =
      best_reply_table(model, plan, SummaryTable(grid, plan.n_outer(), avg),
                       fs.picard, &r1.adjoint);
  CHECK(pathspace_distance(fp.x, r2.x) == 0.0);
  CHECK(fp.history[1].distance == pathspace_distance(r2.x, r1.x));

  // starting from the lower bracket the averaged summaries move upward
  for (const IterationStats& st : fp.history)
    CHECK(st.summary_min_increment >= -fs.mono_tol);
}

TEST_CASE("averaged scheme rejects state-dependent kernel summaries") {
  LQModelParams p = coupled_params();
  ModelSpec model = build_lq_model(p);
  model.interaction =
      InteractionSpec::order1(expr::parse_expr("y1").ast, -2.0, 2.0);
  NoisePlan plan = small_plan(model);
  try {
    fictitious_play(model, plan);
    FAIL("expected a precondition failure");
  } catch (const std::invalid_argument& e) {
    CHECK(message_contains(e, "scalar summaries"));
  }
}

TEST_CASE("shifting a flow translates every cloud and tags the provenance") {
  ModelSpec model = build_lq_model(coupled_params());
  NoisePlan plan = small_plan(model);
  ConditionalLawFlow flow =
      conditional_empirical_law(lower_bound_process(model, plan));

  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, 0.5);
  ConditionalLawFlow moved = shift_flow(flow, delta);
  CHECK(moved.provenance() == flow.provenance() + "+shift");
  CHECK(moved.plan_fingerprint() == flow.plan_fingerprint());
  for (int o = 0; o < flow.n_outer(); ++o)
    for (int k = 0; k <= 10; k += 5) {
      const Cloud& src = flow.cloud(o, k);
      const Cloud& dst = moved.cloud(o, k);
      CHECK((dst.points - src.points).cwiseAbs().maxCoeff() ==
            doctest::Approx(0.5));
      CHECK((dst.points - src.points).cwiseAbs().minCoeff() ==
            doctest::Approx(0.5));
      CHECK((dst.weights - src.weights).cwiseAbs().maxCoeff() == 0.0);
    }

  Eigen::VectorXd bad = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(shift_flow(flow, bad), std::invalid_argument);
}

TEST_CASE("dominating flows produce dominating replies") {
  ModelSpec model = build_lq_model(coupled_params());
  NoisePlan plan = small_plan(model);
  ConditionalLawFlow flow =
      conditional_empirical_law(lower_bound_process(model, plan));
  ConditionalLawFlow flow_hi =
      shift_flow(flow, Eigen::VectorXd::Constant(1, 0.5));

  ComparisonReport rep = comparison_harness(model, plan, flow, flow_hi, {});
  CHECK(rep.pass);
  CHECK(rep.v_state <= rep.tolerance);
  CHECK(!rep.adjoint_checked);  // separable running cost
  CHECK(rep.picard_iters_low >= 1);
  CHECK(rep.picard_iters_high >= 1);
}
