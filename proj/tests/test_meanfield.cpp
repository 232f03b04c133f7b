#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "submfg/expr.hpp"
#include "submfg/meanfield.hpp"
#include "submfg/model.hpp"
#include "submfg/noise.hpp"
#include "submfg/path_bundle.hpp"

using namespace submfg;

namespace {

PathBundle random_bundle(TimeGrid grid, int n_outer, int n_inner, int dim,
                         std::uint64_t fp, std::uint64_t salt) {
  PathBundle b(grid, n_outer, n_inner, dim, fp);
  std::uint64_t ctr = salt;
  for (double& v : b.raw()) v = key_uniform(ctr++) * 4.0 - 2.0;
  return b;
}

Cloud cloud1d(std::vector<double> pts, std::vector<double> w = {}) {
  Cloud c;
  const int n = static_cast<int>(pts.size());
  c.points.resize(n, 1);
  for (int i = 0; i < n; ++i) c.points(i, 0) = pts[i];
  if (w.empty())
    c.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  else {
    c.weights.resize(n);
    for (int i = 0; i < n; ++i) c.weights(i) = w[i];
  }
  return c;
}

double w2_1d(const Cloud& a, const Cloud& b) {
  return wasserstein2_empirical_1d(a.points.col(0), a.weights, b.points.col(0),
                                   b.weights);
}

}  // namespace

TEST_CASE("conditional disintegration slices scenarios at each grid point") {
  TimeGrid grid{1.0, 3};
  PathBundle b = random_bundle(grid, 2, 3, 2, 555, 10);
  ConditionalLawFlow flow = conditional_empirical_law(b);

  CHECK(flow.n_outer() == 2);
  CHECK(flow.dim() == 2);
  CHECK(flow.plan_fingerprint() == b.plan_fingerprint());
  for (int o = 0; o < 2; ++o)
    for (int k = 0; k <= 3; ++k) {
      const Cloud& c = flow.cloud(o, k);
      REQUIRE(c.size() == 3);
      CHECK(c.weights.sum() == doctest::Approx(1.0));
      for (int i = 0; i < 3; ++i) {
        CHECK(c.weights(i) == doctest::Approx(1.0 / 3.0));
        CHECK((c.points.row(i).transpose() - b.state(o, i, k)).norm() == 0.0);
      }
    }
}

TEST_CASE("summaries reduce clouds through the declared functionals") {
  Cloud c;
  c.points.resize(3, 2);
  c.points << 0.5, -2.0, 1.5, 0.4, -3.0, 1.0;
  c.weights = Eigen::Vector3d(0.5, 0.3, 0.2);

  SUBCASE("scalar functionals average pointwise") {
    std::vector<PhiFn> fns = {PhiFn::clamp_coord(0, -1.0, 1.0),
                              PhiFn::coordinate(1)};
    InteractionSpec spec = InteractionSpec::scalar(
        fns, Eigen::Vector2d(-1.0, -5.0), Eigen::Vector2d(1.0, 5.0));
    MeasureSummary s = summaries(c, spec);
    double want0 = 0.5 * 0.5 + 0.3 * 1.0 + 0.2 * (-1.0);
    double want1 = 0.5 * (-2.0) + 0.3 * 0.4 + 0.2 * 1.0;
    CHECK(s.m(0) == doctest::Approx(want0));
    CHECK(s.m(1) == doctest::Approx(want1));
    CHECK(s.mean(0) == doctest::Approx(0.5 * 0.5 + 0.3 * 1.5 + 0.2 * (-3.0)));
    CHECK(s.second(1) ==
          doctest::Approx(0.5 * 4.0 + 0.3 * 0.16 + 0.2 * 1.0));
    double want_norm1 = 0.5 * (0.5 + 2.0) + 0.3 * (1.5 + 0.4) + 0.2 * (3.0 + 1.0);
    CHECK(s.norm1 == doctest::Approx(want_norm1));
  }
  SUBCASE("order-1 kernel averages against the observer state") {
    InteractionSpec spec =
        InteractionSpec::order1(expr::parse_expr("x1*y2").ast, -10.0, 10.0);
    Eigen::VectorXd at = Eigen::Vector2d(2.0, 0.0);
    MeasureSummary s = summaries(c, spec, &at);
    double mean_y2 = 0.5 * (-2.0) + 0.3 * 0.4 + 0.2 * 1.0;
    CHECK(s.m.size() == 1);
    CHECK(s.m(0) == doctest::Approx(2.0 * mean_y2));
  }
}

TEST_CASE("mixing flows pools particles with scaled weights") {
  TimeGrid grid{1.0, 2};
  PathBundle ba = random_bundle(grid, 1, 4, 1, 9, 100);
  PathBundle bb = random_bundle(grid, 1, 6, 1, 9, 200);
  ConditionalLawFlow fa = conditional_empirical_law(ba);
  ConditionalLawFlow fb = conditional_empirical_law(bb);

  ConditionalLawFlow mix =
      mix_flows({&fa, &fb}, Eigen::Vector2d(0.25, 0.75));
  const Cloud& c = mix.cloud(0, 1);
  CHECK(c.size() == 10);
  CHECK(c.weights.sum() == doctest::Approx(1.0));

  InteractionSpec spec = InteractionSpec::none();
  double mean_a = 0.0, mean_b = 0.0;
  for (int i = 0; i < 4; ++i) mean_a += ba.state(0, i, 1)(0) / 4.0;
  for (int i = 0; i < 6; ++i) mean_b += bb.state(0, i, 1)(0) / 6.0;
  double mean_mix = (c.points.col(0).array() * c.weights.array()).sum();
  CHECK(mean_mix == doctest::Approx(0.25 * mean_a + 0.75 * mean_b));
  (void)spec;
}

TEST_CASE("summary tables cache scalar reductions and defer kernels") {
  TimeGrid grid{1.0, 2};
  PathBundle b = random_bundle(grid, 2, 5, 1, 31, 77);
  ConditionalLawFlow flow = conditional_empirical_law(b);

  SUBCASE("flow-backed scalar table matches direct reduction") {
    std::vector<PhiFn> fns = {PhiFn::tanh_coord(0)};
    InteractionSpec spec = InteractionSpec::scalar(
        fns, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
    SummaryTable table(flow, spec);
    CHECK(table.n_summaries() == 1);
    CHECK(!table.order1());
    for (int o = 0; o < 2; ++o)
      for (int k = 0; k <= 2; ++k) {
        Eigen::VectorXd want = summaries(flow.cloud(o, k), spec).m;
        CHECK((table.cached(o, k) - want).norm() == 0.0);
        CHECK((table.eval(o, k, Eigen::VectorXd::Zero(1)) - want).norm() == 0.0);
      }
  }
  SUBCASE("value-backed table returns the stored entries") {
    std::vector<Eigen::VectorXd> vals(2 * grid.n_points());
    for (std::size_t i = 0; i < vals.size(); ++i)
      vals[i] = Eigen::VectorXd::Constant(1, 0.1 * static_cast<double>(i));
    SummaryTable table(grid, 2, vals);
    CHECK(table.cached(1, 2)(0) ==
          doctest::Approx(0.1 * (1 * grid.n_points() + 2)));
  }
  SUBCASE("kernel table evaluates on demand and refuses the cache") {
    InteractionSpec spec =
        InteractionSpec::order1(expr::parse_expr("x1 + y1").ast, -10.0, 10.0);
    SummaryTable table(flow, spec);
    CHECK(table.order1());
    Eigen::VectorXd at = Eigen::VectorXd::Constant(1, 0.5);
    double mean1 = flow.cloud(1, 1).points.col(0).mean();
    CHECK(table.eval(1, 1, at)(0) == doctest::Approx(0.5 + mean1));
    CHECK_THROWS(table.cached(1, 1));
  }
}

TEST_CASE("pathwise dominance detects order and witnesses the break") {
  TimeGrid grid{1.0, 3};
  PathBundle a = random_bundle(grid, 2, 4, 2, 1, 500);
  PathBundle b = a;
  for (double& v : b.raw()) v += 1.0;

  DominanceReport ok = check_dominance_pathwise(a, b, 1e-12);
  CHECK(ok.pass);
  CHECK(ok.violation == 0.0);
  CHECK(ok.max_pointwise <= 0.0);

  DominanceReport bad = check_dominance_pathwise(b, a, 1e-12);
  CHECK(!bad.pass);
  CHECK(bad.max_pointwise == doctest::Approx(1.0));
  // unit gap integrated against the path quadrature: mass 2 + T
  CHECK(bad.violation == doctest::Approx(2.0 + 1.0));
  CHECK(bad.outer >= 0);
  CHECK(bad.inner >= 0);
  CHECK(bad.step >= 0);
  CHECK(bad.comp >= 0);
}

TEST_CASE("cdf comparison classifies shifted and crossing samples") {
  Cloud a = cloud1d({0.0, 1.0});
  Cloud b = cloud1d({1.0, 2.0});
  CdfOrderReport r1 = check_dominance_1d_cdf(a, b);
  CHECK(r1.overall == StochOrder::FirstBelow);
  REQUIRE(r1.per_coordinate.size() == 1);
  CHECK(r1.per_coordinate[0] == StochOrder::FirstBelow);
  CHECK(r1.max_cdf_gap == doctest::Approx(0.5));

  CdfOrderReport r2 = check_dominance_1d_cdf(b, a);
  CHECK(r2.overall == StochOrder::SecondBelow);

  Cloud c = cloud1d({0.0, 2.0});
  Cloud d = cloud1d({1.0, 1.0});
  CdfOrderReport r3 = check_dominance_1d_cdf(c, d);
  CHECK(r3.overall == StochOrder::Incomparable);

  CdfOrderReport r4 = check_dominance_1d_cdf(a, a);
  CHECK(r4.overall == StochOrder::Equal);
  CHECK(r4.max_cdf_gap == 0.0);
}

TEST_CASE("quantile coupling computes exact transport distances") {
  CHECK(w2_1d(cloud1d({0.0}), cloud1d({3.0})) == doctest::Approx(3.0));
  CHECK(w2_1d(cloud1d({0.0, 2.0}), cloud1d({1.0, 3.0})) == doctest::Approx(1.0));
  CHECK(w2_1d(cloud1d({0.0, 2.0}), cloud1d({2.0, 0.0})) == 0.0);
  Cloud w = cloud1d({0.0, 2.0}, {0.75, 0.25});
  CHECK(w2_1d(w, w) == 0.0);
  // shifting a weighted sample moves it by exactly the shift
  Cloud ws = cloud1d({0.5, 2.5}, {0.75, 0.25});
  CHECK(w2_1d(w, ws) == doctest::Approx(0.5));
}

TEST_CASE("transport distance satisfies the triangle inequality") {
  std::uint64_t ctr = 2024;
  auto draw_cloud = [&](int n) {
    std::vector<double> pts(n);
    std::vector<double> w(n);
    double tot = 0.0;
    for (int i = 0; i < n; ++i) {
      pts[i] = key_uniform(ctr++) * 10.0 - 5.0;
      w[i] = key_uniform(ctr++) + 0.05;
      tot += w[i];
    }
    for (int i = 0; i < n; ++i) w[i] /= tot;
    return cloud1d(pts, w);
  };
  for (int trial = 0; trial < 100; ++trial) {
    Cloud a = draw_cloud(5), b = draw_cloud(7), c = draw_cloud(9);
    double ab = w2_1d(a, b), bc = w2_1d(b, c), ac = w2_1d(a, c);
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("flow and bundle transport agree step by step") {
  TimeGrid grid{1.0, 2};
  PathBundle a = random_bundle(grid, 3, 6, 1, 4, 900);
  PathBundle b = random_bundle(grid, 3, 6, 1, 4, 901);
  ConditionalLawFlow fa = conditional_empirical_law(a);
  ConditionalLawFlow fb = conditional_empirical_law(b);
  for (int k = 0; k <= 2; ++k)
    CHECK(bundle_w2_at_step(a, b, k) ==
          doctest::Approx(flow_w2_at_step(fa, fb, k)));

  // a constant shift moves every scenario cloud by the shift
  PathBundle shifted = a;
  for (double& v : shifted.raw()) v += 0.4;
  ConditionalLawFlow fs = conditional_empirical_law(shifted);
  CHECK(flow_w2_at_step(fa, fs, 1) == doctest::Approx(0.4));
}
