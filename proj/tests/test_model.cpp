#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "submfg/expr.hpp"
#include "submfg/model.hpp"

using namespace submfg;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

bool has_violation(const LqBuildReport& rep, const std::string& needle) {
  for (const auto& v : rep.violations)
    if (v.condition.find(needle) != std::string::npos) return true;
  return false;
}

const ConditionViolation* find_violation(const LqBuildReport& rep,
                                         const std::string& needle) {
  for (const auto& v : rep.violations)
    if (v.condition.find(needle) != std::string::npos) return &v;
  return nullptr;
}

Eigen::VectorXd fd_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& at, double h = 1e-5) {
  Eigen::VectorXd g(at.size());
  for (int i = 0; i < at.size(); ++i) {
    Eigen::VectorXd lo = at, hi = at;
    lo(i) -= h;
    hi(i) += h;
    g(i) = (f(hi) - f(lo)) / (2 * h);
  }
  return g;
}

// A well-formed separable family: tracking costs, diagonal drift loadings,
// clamped interaction maps, compact control box.
LQModelParams clean_separable() {
  LQModelParams p;
  p.variant = 1;
  p.d = 2;
  p.k = 2;
  p.d1 = 2;
  p.d2 = 1;
  p.horizon = 1.0;
  Eigen::MatrixXd P(2, 2), Q(2, 2), R(2, 2), P_T(2, 2), Q_T(2, 2);
  P << 0.5, -0.1, -0.1, 0.3;
  Q << 0.2, 0.0, 0.0, 0.4;
  R << 1.0, 0.0, 0.0, 2.0;
  P_T << 0.6, 0.0, 0.0, 0.2;
  Q_T << 0.1, 0.0, 0.0, 0.1;
  p.P = const_mat(P);
  p.Q = const_mat(Q);
  p.R = const_mat(R);
  p.P_T = P_T;
  p.Q_T = Q_T;
  p.b0_const = Eigen::Vector2d(0.1, -0.2);
  p.bbar1 = Eigen::Vector2d(-0.5, 0.25).asDiagonal();
  p.b2 = Eigen::Vector2d(1.0, 0.5).asDiagonal();
  p.sigma_p = Eigen::Vector2d(0.2, 0.3);
  p.sigma_q = Eigen::Vector2d(0.05, 0.0);
  p.sigma0_p = Eigen::Vector2d(0.1, 0.1);
  p.sigma0_q = Eigen::Vector2d(0.0, 0.02);
  p.phi = {PhiFn::clamp_coord(0, -1.0, 1.0), PhiFn::clamp_coord(1, -2.0, 2.0)};
  p.phi_lo = Eigen::Vector2d(-1.0, -2.0);
  p.phi_hi = Eigen::Vector2d(1.0, 2.0);
  p.phi_bounded_declared = true;
  p.box = ControlBox::cube(2, -3.0, 3.0);
  p.initial = InitialLaw::dirac(Eigen::Vector2d(0.0, 0.0));
  p.name = "sep-test";
  return p;
}

// A well-formed nonseparable family: nonnegative couplings, crowd-aversion
// running cost, bounded maps.
LQModelParams clean_nonseparable() {
  LQModelParams p;
  p.variant = 2;
  p.d = 2;
  p.k = 2;
  p.d1 = 1;
  p.d2 = 0;
  p.horizon = 1.0;
  Eigen::MatrixXd P(2, 2), Q(2, 2), R(2, 2);
  R << 1.0, -0.1, -0.1, 0.8;
  P << 0.5, 0.0, 0.0, 0.5;
  Q << -0.2, 0.0, -0.05, -0.1;
  p.P = const_mat(P);
  p.Q = const_mat(Q);
  p.R = const_mat(R);
  p.P_T = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd Q_T(2, 2);
  Q_T << -0.3, 0.0, 0.0, -0.1;
  p.Q_T = Q_T;
  p.b0_const = Eigen::Vector2d(0.05, 0.0);
  Eigen::MatrixXd bbar1(2, 2), b2(2, 2), c0(2, 2);
  bbar1 << 0.1, 0.05, 0.0, 0.2;
  b2 << 1.0, 0.0, 0.1, 0.8;
  c0 << 0.3, 0.0, 0.0, 0.3;
  p.bbar1 = bbar1;
  p.b2 = b2;
  p.b0_coupling = c0;
  p.sigma_p = Eigen::Vector2d(0.2, 0.2);
  p.sigma_q = Eigen::Vector2d(0.0, 0.0);
  p.phi = {PhiFn::tanh_coord(0), PhiFn::tanh_coord(1)};
  p.psi = {PhiFn::clamp_coord(0, -1.0, 1.0), PhiFn::clamp_coord(1, -1.0, 1.0)};
  p.phi_lo = Eigen::Vector2d(-1.0, -1.0);
  p.phi_hi = Eigen::Vector2d(1.0, 1.0);
  p.psi_lo = Eigen::Vector2d(-1.0, -1.0);
  p.psi_hi = Eigen::Vector2d(1.0, 1.0);
  p.phi_bounded_declared = true;
  p.box = ControlBox::cube(2, -2.0, 2.0);
  p.initial = InitialLaw::gaussian(Eigen::Vector2d(0.0, 0.0),
                                   Eigen::Vector2d(0.5, 0.5));
  p.name = "nonsep-test";
  return p;
}

}  // namespace

TEST_CASE("control box projection and membership") {
  ControlBox cube = ControlBox::cube(2, -1.0, 2.0);
  CHECK(cube.dim() == 2);
  CHECK(cube.is_compact());
  Eigen::VectorXd a = cube.project(Eigen::Vector2d(3.0, -5.0));
  CHECK(a(0) == doctest::Approx(2.0));
  CHECK(a(1) == doctest::Approx(-1.0));
  CHECK(cube.contains(Eigen::Vector2d(0.0, 0.0)));
  CHECK(cube.contains(Eigen::Vector2d(2.0, -1.0)));
  CHECK(!cube.contains(Eigen::Vector2d(2.1, 0.0)));
  CHECK(cube.contains(Eigen::Vector2d(2.1, 0.0), 0.2));
  CHECK(cube.clipped_lower()(0) == doctest::Approx(-1.0));
  CHECK(cube.clipped_upper()(1) == doctest::Approx(2.0));

  ControlBox open = ControlBox::unbounded(3);
  CHECK(!open.is_compact());
  Eigen::VectorXd big = Eigen::Vector3d(1e9, -1e9, 0.0);
  CHECK((open.project(big) - big).norm() == 0.0);
  CHECK(open.clipped_lower()(0) == doctest::Approx(-1e6));
  CHECK(open.clipped_upper()(2) == doctest::Approx(1e6));
  CHECK(open.clipped_lower(50.0)(1) == doctest::Approx(-50.0));

  ControlBox half(Eigen::Vector2d(-kInf, 0.0), Eigen::Vector2d(1.0, kInf));
  CHECK(!half.is_compact());
  Eigen::VectorXd c = half.project(Eigen::Vector2d(5.0, -3.0));
  CHECK(c(0) == doctest::Approx(1.0));
  CHECK(c(1) == doctest::Approx(0.0));

  CHECK_THROWS_AS(ControlBox(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("state functionals evaluate by kind") {
  Eigen::VectorXd x = Eigen::Vector2d(3.0, -0.4);
  CHECK(PhiFn::coordinate(1).eval(x) == doctest::Approx(-0.4));
  CHECK(PhiFn::clamp_coord(0, -1.0, 1.0).eval(x) == doctest::Approx(1.0));
  CHECK(PhiFn::clamp_coord(1, -1.0, 1.0).eval(x) == doctest::Approx(-0.4));
  CHECK(PhiFn::tanh_coord(0).eval(x) == doctest::Approx(std::tanh(3.0)));
  auto parsed = expr::parse_expr("x1 + 2*x2");
  CHECK(PhiFn::from_expression(parsed.ast).eval(x) == doctest::Approx(3.0 - 0.8));
}

TEST_CASE("constant matrix handle returns the same matrix at every time") {
  Eigen::MatrixXd M(2, 2);
  M << 1.0, 2.0, 3.0, 4.0;
  auto f = const_mat(M);
  CHECK((f(0.0) - M).norm() == 0.0);
  CHECK((f(0.37) - M).norm() == 0.0);
}

TEST_CASE("separable quadratic family wires drift, costs, and gradients") {
  LQModelParams p = clean_separable();
  LqBuildReport rep = check_lq_conditions(p);
  CHECK(rep.pass);
  CHECK(rep.violations.empty());
  CHECK(rep.conditions_checked.size() == 8);

  ModelSpec m = build_lq_model(p);
  CHECK(m.regime == Regime::Separable);
  CHECK(m.d == 2);
  CHECK(m.k == 2);
  CHECK(m.horizon == doctest::Approx(1.0));
  CHECK(m.n_summaries() == 2);
  CHECK((m.summary_lo() - p.phi_lo).norm() == 0.0);
  CHECK((m.summary_hi() - p.phi_hi).norm() == 0.0);
  CHECK_NOTHROW(m.check_wiring());

  const double t = 0.3;
  Eigen::VectorXd x = Eigen::Vector2d(0.7, -1.2);
  Eigen::VectorXd mm = Eigen::Vector2d(0.2, 0.5);
  Eigen::VectorXd a = Eigen::Vector2d(-0.3, 0.9);

  Eigen::VectorXd want_drift = p.b0_const + p.bbar1 * x;
  CHECK((m.drift_free(t, x, mm) - want_drift).norm() < 1e-14);
  CHECK((m.b2(t) - p.b2).norm() == 0.0);
  CHECK((m.drift_jac_x(t, x, mm) - p.bbar1).norm() == 0.0);
  CHECK((m.drift(t, x, mm, a) - (want_drift + p.b2 * a)).norm() < 1e-14);

  Eigen::RowVectorXd s0 = m.sigma_row(0, t, x(0));
  CHECK(s0.size() == 2);
  CHECK(s0(0) == doctest::Approx(0.2 + 0.05 * 0.7));
  CHECK(s0(1) == 0.0);
  Eigen::RowVectorXd s1 = m.sigma_row(1, t, x(1));
  CHECK(s1(1) == doctest::Approx(0.3));
  Eigen::RowVectorXd c1 = m.sigma0_row(1, t, x(1));
  CHECK(c1.size() == 1);
  CHECK(c1(0) == doctest::Approx(0.1 + 0.02 * x(1)));

  Eigen::VectorXd e = x - mm;
  double want_h = x.dot(p.P(t) * x) + a.dot(p.R(t) * a) + e.dot(p.Q(t) * e);
  CHECK(m.h(t, x, mm, a) == doctest::Approx(want_h));
  double want_g = x.dot(p.P_T * x) + e.dot(p.Q_T * e);
  CHECK(m.g(x, mm) == doctest::Approx(want_g));

  Eigen::VectorXd gx = fd_grad(
      [&](const Eigen::VectorXd& xx) { return m.h(t, xx, mm, a); }, x);
  CHECK((m.dx_h(t, x, mm, a) - gx).norm() < 1e-8);
  Eigen::VectorXd ga = fd_grad(
      [&](const Eigen::VectorXd& aa) { return m.h(t, x, mm, aa); }, a);
  CHECK((m.da_h(t, x, mm, a) - ga).norm() < 1e-8);
  Eigen::VectorXd gg = fd_grad(
      [&](const Eigen::VectorXd& xx) { return m.g(xx, mm); }, x);
  CHECK((m.dx_g(x, mm) - gg).norm() < 1e-8);

  CHECK(m.quad_control_diagonal);
  Eigen::VectorXd diag = m.quad_control_diag(t);
  CHECK(diag(0) == doctest::Approx(1.0));
  CHECK(diag(1) == doctest::Approx(2.0));
  CHECK(m.constants.lambda == doctest::Approx(1.0));
  CHECK(m.constants.kappa == doctest::Approx(1.0));
}

TEST_CASE("nonseparable quadratic family wires couplings through summaries") {
  LQModelParams p = clean_nonseparable();
  LqBuildReport rep = check_lq_conditions(p);
  CHECK(rep.pass);
  CHECK(rep.violations.empty());
  CHECK(rep.conditions_checked.size() == 10);

  ModelSpec m = build_lq_model(p);
  CHECK(m.regime == Regime::Nonseparable);
  CHECK(m.n_summaries() == 4);  // phi summaries first, then psi
  CHECK_NOTHROW(m.check_wiring());

  const double t = 0.6;
  Eigen::VectorXd x = Eigen::Vector2d(0.4, -0.8);
  Eigen::VectorXd mm(4);
  mm << 0.3, -0.2, 0.1, 0.4;
  Eigen::VectorXd a = Eigen::Vector2d(0.5, -0.1);
  Eigen::VectorXd sphi = mm.head(2), spsi = mm.tail(2);

  Eigen::VectorXd want_drift = p.b0_const + p.b0_coupling * sphi + p.bbar1 * x;
  CHECK((m.drift_free(t, x, mm) - want_drift).norm() < 1e-14);
  CHECK((m.drift_jac_x(t, x, mm) - p.bbar1).norm() == 0.0);

  Eigen::VectorXd ea = a - spsi;
  double want_h = sphi.dot(p.Q(t) * x) + a.dot(p.R(t) * a) + ea.dot(p.P(t) * ea);
  CHECK(m.h(t, x, mm, a) == doctest::Approx(want_h));
  CHECK(m.g(x, mm) == doctest::Approx(sphi.dot(p.Q_T * x)));

  CHECK((m.dx_h(t, x, mm, a) - p.Q(t).transpose() * sphi).norm() < 1e-14);
  Eigen::VectorXd ga = fd_grad(
      [&](const Eigen::VectorXd& aa) { return m.h(t, x, mm, aa); }, a);
  CHECK((m.da_h(t, x, mm, a) - ga).norm() < 1e-8);
  CHECK((m.dx_g(x, mm) - p.Q_T.transpose() * sphi).norm() < 1e-14);

  // R+P has a nonzero off-diagonal entry, so the closed-form diagonal
  // minimizer must not be advertised.
  CHECK(!m.quad_control_diagonal);
  // min eigenvalue of R+P = [[1.5,-0.1],[-0.1,1.3]]
  double want_lam = 1.4 - std::sqrt(0.01 + 0.01);
  CHECK(m.constants.lambda == doctest::Approx(want_lam));

  // Summary slots follow the declared order: shifting the psi block moves
  // only the control-tracking term.
  Eigen::VectorXd mm2 = mm;
  mm2.tail(2).array() += 0.25;
  Eigen::VectorXd ea2 = a - mm2.tail(2);
  double shift = ea2.dot(p.P(t) * ea2) - ea.dot(p.P(t) * ea);
  CHECK(m.h(t, x, mm2, a) - m.h(t, x, mm, a) == doctest::Approx(shift));
}

TEST_CASE("separable checker flags each broken condition") {
  SUBCASE("control dimension mismatch") {
    LQModelParams p = clean_separable();
    p.k = 3;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(!rep.pass);
    CHECK(has_violation(rep, "control dimension equals state dimension"));
  }
  SUBCASE("off-diagonal drift loading") {
    LQModelParams p = clean_separable();
    p.bbar1(0, 1) = 0.2;
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "bbar1 and b2 diagonal");
    REQUIRE(v != nullptr);
    CHECK(v->i == 0);
    CHECK(v->j == 1);
    CHECK(v->value == doctest::Approx(0.2));
    CHECK(v->note == "bbar1");
  }
  SUBCASE("off-diagonal control loading") {
    LQModelParams p = clean_separable();
    p.b2(1, 0) = -0.4;
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "bbar1 and b2 diagonal");
    REQUIRE(v != nullptr);
    CHECK(v->note == "b2");
  }
  SUBCASE("control cost loses positivity") {
    LQModelParams p = clean_separable();
    Eigen::MatrixXd R(2, 2);
    R << 1.0, 0.0, 0.0, -0.5;
    p.R = const_mat(R);
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "R diagonal positive definite");
    REQUIRE(v != nullptr);
    CHECK(v->i == 1);
    CHECK(v->j == 1);
    CHECK(v->value == doctest::Approx(-0.5));
  }
  SUBCASE("state cost not symmetric") {
    LQModelParams p = clean_separable();
    Eigen::MatrixXd P(2, 2);
    P << 0.5, 0.3, -0.1, 0.3;
    p.P = const_mat(P);
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "P, Q symmetric positive semidefinite"));
    CHECK(has_violation(rep, "symmetric"));
  }
  SUBCASE("state cost indefinite") {
    LQModelParams p = clean_separable();
    Eigen::MatrixXd P(2, 2);
    P << 0.1, 0.5, 0.5, 0.1;  // eigenvalues 0.6 and -0.4
    p.P = const_mat(P);
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "positive semidefinite");
    REQUIRE(v != nullptr);
    CHECK(v->value == doctest::Approx(-0.4));
  }
  SUBCASE("positive off-diagonal in the combined state cost") {
    LQModelParams p = clean_separable();
    Eigen::MatrixXd Q(2, 2);
    Q << 0.2, 0.15, 0.15, 0.4;
    p.Q = const_mat(Q);
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "(P+Q) off-diagonal entries nonpositive");
    REQUIRE(v != nullptr);
    CHECK(v->value == doctest::Approx(0.05));  // -0.1 + 0.15
  }
  SUBCASE("negative tracking weight") {
    LQModelParams p = clean_separable();
    Eigen::MatrixXd Q(2, 2);
    Q << -0.1, 0.0, 0.0, 0.4;
    p.Q = const_mat(Q);
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "Q entries nonnegative"));
  }
  SUBCASE("negative terminal tracking weight") {
    LQModelParams p = clean_separable();
    p.Q_T(0, 0) = -0.2;
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "Q entries nonnegative");
    REQUIRE(v != nullptr);
    CHECK(v->note == "terminal");
    CHECK(v->t == doctest::Approx(p.horizon));
  }
  SUBCASE("unbounded maps with an unbounded box") {
    LQModelParams p = clean_separable();
    p.phi = {PhiFn::coordinate(0), PhiFn::coordinate(1)};
    p.phi_lo = Eigen::Vector2d(-kInf, -kInf);
    p.phi_hi = Eigen::Vector2d(kInf, kInf);
    p.phi_bounded_declared = false;
    p.box = ControlBox::unbounded(2);
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "interaction bounded or control box compact"));
  }
  SUBCASE("decreasing interaction map") {
    LQModelParams p = clean_separable();
    p.phi[1] = PhiFn::from_expression(expr::parse_expr("0 - x2").ast);
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "interaction maps nondecreasing");
    REQUIRE(v != nullptr);
    CHECK(v->i == 1);  // which map
    CHECK(v->j == 1);  // along which coordinate
    CHECK(v->value < 0.0);
  }
}

TEST_CASE("nonseparable checker flags each broken condition") {
  SUBCASE("negative drift feedback entry") {
    LQModelParams p = clean_nonseparable();
    p.bbar1(1, 0) = -0.2;
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "bbar1 entries nonnegative");
    REQUIRE(v != nullptr);
    CHECK(v->i == 1);
    CHECK(v->j == 0);
  }
  SUBCASE("negative control loading entry") {
    LQModelParams p = clean_nonseparable();
    p.b2(0, 1) = -0.3;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "b2 entries nonnegative"));
  }
  SUBCASE("negative crowd coupling entry") {
    LQModelParams p = clean_nonseparable();
    p.b0_coupling(0, 0) = -0.1;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "b0 coupling entries nonnegative"));
  }
  SUBCASE("control cost indefinite") {
    LQModelParams p = clean_nonseparable();
    Eigen::MatrixXd R(2, 2);
    R << 0.1, 0.5, 0.5, 0.1;
    p.R = const_mat(R);
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "R, P symmetric positive semidefinite"));
  }
  SUBCASE("combined control cost singular") {
    LQModelParams p = clean_nonseparable();
    p.R = const_mat(Eigen::MatrixXd::Zero(2, 2));
    p.P = const_mat(Eigen::MatrixXd::Zero(2, 2));
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "(R+P) positive definite"));
  }
  SUBCASE("positive off-diagonal in the combined control cost") {
    LQModelParams p = clean_nonseparable();
    Eigen::MatrixXd R(2, 2);
    R << 1.0, 0.2, 0.2, 1.0;
    p.R = const_mat(R);
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "(R+P) off-diagonal entries nonpositive");
    REQUIRE(v != nullptr);
    CHECK(v->value == doctest::Approx(0.2));
  }
  SUBCASE("negative control tracking entry") {
    LQModelParams p = clean_nonseparable();
    Eigen::MatrixXd P(2, 2);
    P << 0.5, -0.2, -0.2, 0.5;
    p.P = const_mat(P);
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "P entries nonnegative"));
  }
  SUBCASE("positive crowd cost entry") {
    LQModelParams p = clean_nonseparable();
    Eigen::MatrixXd Q(2, 2);
    Q << 0.1, 0.0, -0.05, -0.1;
    p.Q = const_mat(Q);
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "Q entries nonpositive"));
  }
  SUBCASE("positive terminal crowd cost entry") {
    LQModelParams p = clean_nonseparable();
    p.Q_T(1, 1) = 0.2;
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "Q entries nonpositive");
    REQUIRE(v != nullptr);
    CHECK(v->note == "terminal");
  }
  SUBCASE("decreasing control reference map") {
    LQModelParams p = clean_nonseparable();
    p.psi[0] = PhiFn::from_expression(expr::parse_expr("0 - x1").ast);
    LqBuildReport rep = check_lq_conditions(p);
    const auto* v = find_violation(rep, "interaction maps nondecreasing");
    REQUIRE(v != nullptr);
    CHECK(v->note == "psi");
  }
}

TEST_CASE("top-level parameter screening") {
  SUBCASE("unknown variant") {
    LQModelParams p = clean_separable();
    p.variant = 3;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(!rep.pass);
    CHECK(has_violation(rep, "variant must be 1 or 2"));
  }
  SUBCASE("missing matrix handles") {
    LQModelParams p = clean_separable();
    p.P = nullptr;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "matrix handles present"));
  }
  SUBCASE("bad idiosyncratic noise dimension") {
    LQModelParams p = clean_separable();
    p.d1 = 3;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "idiosyncratic noise dimension in {1, d}"));
  }
  SUBCASE("bad common noise dimension") {
    LQModelParams p = clean_separable();
    p.d2 = 3;
    LqBuildReport rep = check_lq_conditions(p);
    CHECK(has_violation(rep, "common noise dimension in {0, 1, d}"));
  }
}

TEST_CASE("condition failures stop the build unless validation is off") {
  LQModelParams p = clean_separable();
  p.bbar1(0, 1) = 0.7;
  try {
    build_lq_model(p);
    FAIL("expected a condition error");
  } catch (const LqConditionError& err) {
    CHECK(!err.report.pass);
    REQUIRE(!err.report.violations.empty());
    CHECK(err.report.violations[0].condition == "bbar1 and b2 diagonal");
  }
  LqBuildOptions lax;
  lax.validate = false;
  ModelSpec m = build_lq_model(p, lax);
  CHECK(m.d == 2);
  CHECK_NOTHROW(m.check_wiring());
}
