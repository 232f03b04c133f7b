#include "submfg/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <memory>

namespace submfg {

namespace {

constexpr double kSignTol = 1e-12;
constexpr double kPsdTol = 1e-10;

void add_violation(LqBuildReport& rep, std::string cond, double t, int i, int j,
                   double value, std::string note = {}) {
  rep.pass = false;
  rep.violations.push_back(ConditionViolation{std::move(cond), t, i, j, value,
                                              std::move(note)});
}

void check_symmetric_psd(LqBuildReport& rep, const Eigen::MatrixXd& M, double t,
                         const std::string& label) {
  double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9) {
    add_violation(rep, label + " symmetric", t, -1, -1, asym);
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  double mineig = es.eigenvalues().minCoeff();
  if (mineig < -kPsdTol)
    add_violation(rep, label + " positive semidefinite", t, -1, -1, mineig);
}

bool phi_nondecreasing_probe(const PhiFn& f, int d, int* bad_coord, double* drop) {
  // Bump one coordinate at a time over a coarse grid and look for a decrease.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  for (int c = 0; c < d; ++c) {
    for (int g = 0; g < 17; ++g) {
      double base = -2.0 + 0.25 * g;
      x.setZero();
      x[c] = base;
      double v0 = f.eval(x);
      x[c] = base + 0.25;
      double v1 = f.eval(x);
      if (v1 < v0 - 1e-10) {
        if (bad_coord) *bad_coord = c;
        if (drop) *drop = v1 - v0;
        return false;
      }
    }
  }
  return true;
}

std::vector<double> probe_time_grid(double T, int n) {
  std::vector<double> ts(n);
  for (int i = 0; i < n; ++i) ts[i] = n == 1 ? 0.0 : T * i / (n - 1);
  return ts;
}

void check_variant1(const LQModelParams& p, const LqBuildOptions& opts,
                    LqBuildReport& rep) {
  rep.conditions_checked = {
      "control dimension equals state dimension",
      "bbar1 and b2 diagonal",
      "R diagonal positive definite",
      "P, Q symmetric positive semidefinite",
      "(P+Q) off-diagonal entries nonpositive",
      "Q entries nonnegative",
      "interaction bounded or control box compact",
      "interaction maps nondecreasing",
  };
  if (p.k != p.d)
    add_violation(rep, "control dimension equals state dimension", 0, p.k, p.d,
                  double(p.k - p.d));
  auto check_diag = [&](const Eigen::MatrixXd& M, const std::string& label) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        if (i != j && std::abs(M(i, j)) > kSignTol)
          add_violation(rep, "bbar1 and b2 diagonal", 0, i, j, M(i, j), label);
  };
  check_diag(p.bbar1, "bbar1");
  check_diag(p.b2, "b2");

  bool has_phi = !p.phi.empty();
  if (has_phi && static_cast<int>(p.phi.size()) != p.d)
    add_violation(rep, "interaction bounded or control box compact", 0,
                  static_cast<int>(p.phi.size()), p.d, 0,
                  "need one interaction map per state coordinate");

  for (double t : probe_time_grid(p.horizon, opts.probe_times)) {
    Eigen::MatrixXd P = p.P(t), Q = p.Q(t), R = p.R(t);
    for (int i = 0; i < R.rows(); ++i) {
      for (int j = 0; j < R.cols(); ++j)
        if (i != j && std::abs(R(i, j)) > kSignTol)
          add_violation(rep, "R diagonal positive definite", t, i, j, R(i, j));
      if (R(i, i) <= 0)
        add_violation(rep, "R diagonal positive definite", t, i, i, R(i, i));
    }
    check_symmetric_psd(rep, P, t, "P, Q symmetric positive semidefinite;P");
    check_symmetric_psd(rep, Q, t, "P, Q symmetric positive semidefinite;Q");
    Eigen::MatrixXd S = P + Q;
    for (int i = 0; i < p.d; ++i)
      for (int j = 0; j < p.d; ++j) {
        if (i != j && S(i, j) > kSignTol)
          add_violation(rep, "(P+Q) off-diagonal entries nonpositive", t, i, j, S(i, j));
        if (Q(i, j) < -kSignTol)
          add_violation(rep, "Q entries nonnegative", t, i, j, Q(i, j));
      }
    if (!has_phi && Q.cwiseAbs().maxCoeff() > kSignTol)
      add_violation(rep, "interaction bounded or control box compact", t, -1, -1,
                    Q.cwiseAbs().maxCoeff(),
                    "tracking cost needs interaction maps");
  }
  check_symmetric_psd(rep, p.P_T, p.horizon, "P, Q symmetric positive semidefinite;P_T");
  check_symmetric_psd(rep, p.Q_T, p.horizon, "P, Q symmetric positive semidefinite;Q_T");
  Eigen::MatrixXd ST = p.P_T + p.Q_T;
  for (int i = 0; i < p.d; ++i)
    for (int j = 0; j < p.d; ++j) {
      if (i != j && ST(i, j) > kSignTol)
        add_violation(rep, "(P+Q) off-diagonal entries nonpositive", p.horizon, i, j,
                      ST(i, j), "terminal");
      if (p.Q_T(i, j) < -kSignTol)
        add_violation(rep, "Q entries nonnegative", p.horizon, i, j, p.Q_T(i, j),
                      "terminal");
    }
  if (!has_phi && p.Q_T.cwiseAbs().maxCoeff() > kSignTol)
    add_violation(rep, "interaction bounded or control box compact", p.horizon, -1, -1,
                  p.Q_T.cwiseAbs().maxCoeff(), "tracking cost needs interaction maps");

  if (has_phi && !p.phi_bounded_declared && !p.box.is_compact())
    add_violation(rep, "interaction bounded or control box compact", 0, -1, -1, 0,
                  "declare bounded maps or use a compact control box");
  for (size_t f = 0; f < p.phi.size(); ++f) {
    int bad = -1;
    double drop = 0;
    if (!phi_nondecreasing_probe(p.phi[f], p.d, &bad, &drop))
      add_violation(rep, "interaction maps nondecreasing", 0, static_cast<int>(f), bad,
                    drop);
  }
}

void check_variant2(const LQModelParams& p, const LqBuildOptions& opts,
                    LqBuildReport& rep) {
  rep.conditions_checked = {
      "bbar1 entries nonnegative",
      "b2 entries nonnegative",
      "b0 coupling entries nonnegative",
      "R, P symmetric positive semidefinite",
      "(R+P) positive definite",
      "(R+P) off-diagonal entries nonpositive",
      "P entries nonnegative",
      "Q entries nonpositive",
      "interaction bounded or control box compact",
      "interaction maps nondecreasing",
  };
  for (int i = 0; i < p.bbar1.rows(); ++i)
    for (int j = 0; j < p.bbar1.cols(); ++j)
      if (p.bbar1(i, j) < -kSignTol)
        add_violation(rep, "bbar1 entries nonnegative", 0, i, j, p.bbar1(i, j));
  for (int i = 0; i < p.b2.rows(); ++i)
    for (int j = 0; j < p.b2.cols(); ++j)
      if (p.b2(i, j) < -kSignTol)
        add_violation(rep, "b2 entries nonnegative", 0, i, j, p.b2(i, j));
  if (p.b0_coupling.size() > 0)
    for (int i = 0; i < p.b0_coupling.rows(); ++i)
      for (int j = 0; j < p.b0_coupling.cols(); ++j)
        if (p.b0_coupling(i, j) < -kSignTol)
          add_violation(rep, "b0 coupling entries nonnegative", 0, i, j,
                        p.b0_coupling(i, j));

  if (static_cast<int>(p.phi.size()) != p.d)
    add_violation(rep, "interaction bounded or control box compact", 0,
                  static_cast<int>(p.phi.size()), p.d, 0,
                  "need one phi map per state coordinate");
  if (static_cast<int>(p.psi.size()) != p.k)
    add_violation(rep, "interaction bounded or control box compact", 0,
                  static_cast<int>(p.psi.size()), p.k, 0,
                  "need one psi map per control coordinate");

  for (double t : probe_time_grid(p.horizon, opts.probe_times)) {
    Eigen::MatrixXd P = p.P(t), Q = p.Q(t), R = p.R(t);
    check_symmetric_psd(rep, R, t, "R, P symmetric positive semidefinite;R");
    check_symmetric_psd(rep, P, t, "R, P symmetric positive semidefinite;P");
    Eigen::MatrixXd S = R + P;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.eigenvalues().minCoeff() <= kPsdTol)
      add_violation(rep, "(R+P) positive definite", t, -1, -1,
                    es.eigenvalues().minCoeff());
    for (int i = 0; i < p.k; ++i)
      for (int j = 0; j < p.k; ++j) {
        if (i != j && S(i, j) > kSignTol)
          add_violation(rep, "(R+P) off-diagonal entries nonpositive", t, i, j, S(i, j));
        if (P(i, j) < -kSignTol)
          add_violation(rep, "P entries nonnegative", t, i, j, P(i, j));
      }
    for (int i = 0; i < Q.rows(); ++i)
      for (int j = 0; j < Q.cols(); ++j)
        if (Q(i, j) > kSignTol)
          add_violation(rep, "Q entries nonpositive", t, i, j, Q(i, j));
  }
  for (int i = 0; i < p.Q_T.rows(); ++i)
    for (int j = 0; j < p.Q_T.cols(); ++j)
      if (p.Q_T(i, j) > kSignTol)
        add_violation(rep, "Q entries nonpositive", p.horizon, i, j, p.Q_T(i, j),
                      "terminal");

  if (!p.phi_bounded_declared && !p.box.is_compact())
    add_violation(rep, "interaction bounded or control box compact", 0, -1, -1, 0,
                  "declare bounded maps or use a compact control box");
  for (size_t f = 0; f < p.phi.size(); ++f) {
    int bad = -1;
    double drop = 0;
    if (!phi_nondecreasing_probe(p.phi[f], p.d, &bad, &drop))
      add_violation(rep, "interaction maps nondecreasing", 0, static_cast<int>(f), bad,
                    drop, "phi");
  }
  for (size_t f = 0; f < p.psi.size(); ++f) {
    int bad = -1;
    double drop = 0;
    if (!phi_nondecreasing_probe(p.psi[f], p.d, &bad, &drop))
      add_violation(rep, "interaction maps nondecreasing", 0, static_cast<int>(f), bad,
                    drop, "psi");
  }
}

int noise_column(int i, int noise_dim, int d) {
  return noise_dim == d ? i : 0;
}

}  // namespace

LqBuildReport check_lq_conditions(const LQModelParams& params, const LqBuildOptions& opts) {
  LqBuildReport rep;
  if (params.variant != 1 && params.variant != 2) {
    add_violation(rep, "variant must be 1 or 2", 0, -1, -1, params.variant);
    return rep;
  }
  if (!params.P || !params.Q || !params.R) {
    add_violation(rep, "matrix handles present", 0, -1, -1, 0,
                  "P, Q, R time handles are required");
    return rep;
  }
  if (params.d1 != 1 && params.d1 != params.d)
    add_violation(rep, "idiosyncratic noise dimension in {1, d}", 0, -1, -1, params.d1);
  if (params.d2 != 0 && params.d2 != 1 && params.d2 != params.d)
    add_violation(rep, "common noise dimension in {0, 1, d}", 0, -1, -1, params.d2);
  if (params.variant == 1)
    check_variant1(params, opts, rep);
  else
    check_variant2(params, opts, rep);
  return rep;
}

ModelSpec build_lq_model(const LQModelParams& params, const LqBuildOptions& opts) {
  LqBuildReport rep = check_lq_conditions(params, opts);
  if (opts.validate && !rep.pass) throw LqConditionError(std::move(rep));

  auto p = std::make_shared<const LQModelParams>(params);
  ModelSpec m;
  m.name = p->name;
  m.regime = p->variant == 1 ? Regime::Separable : Regime::Nonseparable;
  m.d = p->d;
  m.k = p->k;
  m.d1 = p->d1;
  m.d2 = p->d2;
  m.horizon = p->horizon;
  m.box = p->box.dim() > 0 ? p->box : ControlBox::unbounded(p->k);
  m.initial = p->initial.dim() > 0 ? p->initial
                                   : InitialLaw::dirac(Eigen::VectorXd::Zero(p->d));

  const int d = p->d, k = p->k;

  m.sigma_row = [p, d](int i, double t, double xi) {
    (void)t;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p->d1);
    row[noise_column(i, p->d1, d)] = p->sigma_p[i] + p->sigma_q[i] * xi;
    return row;
  };
  if (p->d2 > 0) {
    m.sigma0_row = [p, d](int i, double t, double xi) {
      (void)t;
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p->d2);
      row[noise_column(i, p->d2, d)] = p->sigma0_p[i] + p->sigma0_q[i] * xi;
      return row;
    };
  }
  m.b2 = [p](double) { return p->b2; };

  if (p->variant == 1) {
    bool has_phi = !p->phi.empty();
    if (has_phi)
      m.interaction = InteractionSpec::scalar(p->phi, p->phi_lo, p->phi_hi);
    else
      m.interaction = InteractionSpec::none();

    m.drift_free = [p](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
      return (p->b0_const + p->bbar1 * x).eval();
    };
    m.drift_jac_x = [p](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return p->bbar1;
    };
    m.h = [p, has_phi](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& mm,
                       const Eigen::VectorXd& a) {
      double v = x.dot(p->P(t) * x) + a.dot(p->R(t) * a);
      if (has_phi) {
        Eigen::VectorXd e = x - mm;
        v += e.dot(p->Q(t) * e);
      }
      return v;
    };
    m.dx_h = [p, has_phi](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& mm,
                          const Eigen::VectorXd&) {
      Eigen::VectorXd v = 2.0 * (p->P(t) * x);
      if (has_phi) v += 2.0 * (p->Q(t) * (x - mm));
      return v;
    };
    m.da_h = [p](double t, const Eigen::VectorXd&, const Eigen::VectorXd&,
                 const Eigen::VectorXd& a) {
      return (2.0 * (p->R(t) * a)).eval();
    };
    m.g = [p, has_phi](const Eigen::VectorXd& x, const Eigen::VectorXd& mm) {
      double v = x.dot(p->P_T * x);
      if (has_phi) {
        Eigen::VectorXd e = x - mm;
        v += e.dot(p->Q_T * e);
      }
      return v;
    };
    m.dx_g = [p, has_phi](const Eigen::VectorXd& x, const Eigen::VectorXd& mm) {
      Eigen::VectorXd v = 2.0 * (p->P_T * x);
      if (has_phi) v += 2.0 * (p->Q_T * (x - mm));
      return v;
    };
    m.quad_control_diagonal = true;
    m.quad_control_diag = [p](double t) { return p->R(t).diagonal().eval(); };

    double lam = std::numeric_limits<double>::infinity();
    for (double t : probe_time_grid(p->horizon, opts.probe_times))
      lam = std::min(lam, p->R(t).diagonal().minCoeff());
    m.constants.lambda = lam;
    m.constants.kappa = lam;
  } else {
    std::vector<PhiFn> fns = p->phi;
    fns.insert(fns.end(), p->psi.begin(), p->psi.end());
    Eigen::VectorXd lo(d + k), hi(d + k);
    lo << p->phi_lo, p->psi_lo;
    hi << p->phi_hi, p->psi_hi;
    m.interaction = InteractionSpec::scalar(std::move(fns), lo, hi);

    m.drift_free = [p, d](double, const Eigen::VectorXd& x, const Eigen::VectorXd& mm) {
      Eigen::VectorXd v = p->b0_const + p->bbar1 * x;
      if (p->b0_coupling.size() > 0) v += p->b0_coupling * mm.head(d);
      return v;
    };
    m.drift_jac_x = [p](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return p->bbar1;
    };
    m.h = [p, d, k](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& mm,
                    const Eigen::VectorXd& a) {
      Eigen::VectorXd sphi = mm.head(d);
      Eigen::VectorXd spsi = mm.tail(k);
      Eigen::VectorXd e = a - spsi;
      return sphi.dot(p->Q(t) * x) + a.dot(p->R(t) * a) + e.dot(p->P(t) * e);
    };
    m.dx_h = [p, d](double t, const Eigen::VectorXd&, const Eigen::VectorXd& mm,
                    const Eigen::VectorXd&) {
      return (p->Q(t).transpose() * mm.head(d)).eval();
    };
    m.da_h = [p, k](double t, const Eigen::VectorXd&, const Eigen::VectorXd& mm,
                    const Eigen::VectorXd& a) {
      Eigen::VectorXd spsi = mm.tail(k);
      return (2.0 * (p->R(t) * a) + 2.0 * (p->P(t) * (a - spsi))).eval();
    };
    m.g = [p, d](const Eigen::VectorXd& x, const Eigen::VectorXd& mm) {
      return mm.head(d).dot(p->Q_T * x);
    };
    m.dx_g = [p, d](const Eigen::VectorXd&, const Eigen::VectorXd& mm) {
      return (p->Q_T.transpose() * mm.head(d)).eval();
    };

    bool diag_ok = true;
    double lam = std::numeric_limits<double>::infinity();
    for (double t : probe_time_grid(p->horizon, opts.probe_times)) {
      Eigen::MatrixXd S = p->R(t) + p->P(t);
      for (int i = 0; i < k && diag_ok; ++i)
        for (int j = 0; j < k; ++j)
          if (i != j && std::abs(S(i, j)) > 1e-14) { diag_ok = false; break; }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      lam = std::min(lam, es.eigenvalues().minCoeff());
    }
    m.quad_control_diagonal = diag_ok;
    if (diag_ok)
      m.quad_control_diag = [p](double t) {
        return (p->R(t) + p->P(t)).diagonal().eval();
      };
    m.constants.lambda = lam;
    m.constants.kappa = lam;
  }

  // Coarse declared growth bound: largest coefficient magnitude seen on the
  // probe time grid.
  double K = 1.0;
  for (double t : probe_time_grid(p->horizon, opts.probe_times)) {
    K = std::max(K, p->P(t).cwiseAbs().maxCoeff());
    K = std::max(K, p->Q(t).cwiseAbs().maxCoeff());
    K = std::max(K, p->R(t).cwiseAbs().maxCoeff());
  }
  K = std::max(K, p->P_T.cwiseAbs().maxCoeff());
  K = std::max(K, p->Q_T.cwiseAbs().maxCoeff());
  if (p->bbar1.size() > 0) K = std::max(K, p->bbar1.cwiseAbs().maxCoeff());
  if (p->b2.size() > 0) K = std::max(K, p->b2.cwiseAbs().maxCoeff());
  if (p->b0_const.size() > 0) K = std::max(K, p->b0_const.cwiseAbs().maxCoeff());
  for (const auto* v : {&p->sigma_p, &p->sigma_q, &p->sigma0_p, &p->sigma0_q})
    if (v->size() > 0) K = std::max(K, v->cwiseAbs().maxCoeff());
  m.constants.K = K;

  m.check_wiring();
  return m;
}

}  // namespace submfg
