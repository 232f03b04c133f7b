#include "submfg/riccati.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace submfg {

namespace {

struct PrState {
  Eigen::MatrixXd P;
  Eigen::VectorXd r;
};

Eigen::MatrixXd control_gain(const LqControlData& data, double t) {
  Eigen::MatrixXd R = data.R(t);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::invalid_argument("control cost matrix not positive definite");
  // R^{-1} b2'
  return ldlt.solve(data.b2(t).transpose());
}

PrState derivative(const LqControlData& data, double t, const PrState& s) {
  Eigen::MatrixXd A = data.bbar1(t);
  Eigen::MatrixXd B = data.b2(t);
  Eigen::MatrixXd Rinv_Bt = control_gain(data, t);
  Eigen::MatrixXd PBRB = s.P * B * Rinv_Bt;  // P b2 R^{-1} b2'
  PrState d;
  d.P = -(s.P * A + A.transpose() * s.P - PBRB * s.P + data.S(t));
  d.r = -(A.transpose() * s.r - PBRB * s.r + 2.0 * (s.P * data.b0(t)) + data.L(t));
  return d;
}

}  // namespace

RiccatiSolution riccati_oracle(const LqControlData& data, const TimeGrid& grid,
                               int substeps) {
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  const int N = grid.n_steps;

  RiccatiSolution sol;
  sol.grid = grid;
  sol.P.resize(N + 1);
  sol.r.resize(N + 1);
  sol.K1.resize(N + 1);
  sol.k0.resize(N + 1);

  PrState s{data.S_T, data.L_T};
  s.P = 0.5 * (s.P + s.P.transpose()).eval();
  sol.P[N] = s.P;
  sol.r[N] = s.r;

  const double h = -grid.dt() / substeps;  // integrating toward t = 0
  for (int k = N - 1; k >= 0; --k) {
    double t = grid.time(k + 1);
    for (int sub = 0; sub < substeps; ++sub) {
      PrState k1 = derivative(data, t, s);
      PrState s2{s.P + 0.5 * h * k1.P, s.r + 0.5 * h * k1.r};
      PrState k2 = derivative(data, t + 0.5 * h, s2);
      PrState s3{s.P + 0.5 * h * k2.P, s.r + 0.5 * h * k2.r};
      PrState k3 = derivative(data, t + 0.5 * h, s3);
      PrState s4{s.P + h * k3.P, s.r + h * k3.r};
      PrState k4 = derivative(data, t + h, s4);
      s.P += (h / 6.0) * (k1.P + 2.0 * k2.P + 2.0 * k3.P + k4.P);
      s.r += (h / 6.0) * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
      s.P = 0.5 * (s.P + s.P.transpose()).eval();
      t += h;
    }
    sol.P[k] = s.P;
    sol.r[k] = s.r;
  }

  for (int k = 0; k <= N; ++k) {
    double t = grid.time(k);
    Eigen::MatrixXd Rinv_Bt = control_gain(data, t);
    sol.K1[k] = -Rinv_Bt * sol.P[k];
    sol.k0[k] = -0.5 * (Rinv_Bt * sol.r[k]);
  }
  return sol;
}

LqControlData lq_control_data_variant1(const LQModelParams& params,
                                       std::function<Eigen::VectorXd(double)> summary) {
  if (params.variant != 1)
    throw std::invalid_argument("reduced control data defined for the separable family");
  const int d = params.d;
  LqControlData data;
  data.bbar1 = [bm = params.bbar1](double) { return bm; };
  data.b2 = [bm = params.b2](double) { return bm; };
  data.R = params.R;
  data.S = [P = params.P, Q = params.Q](double t) {
    return (P(t) + Q(t)).eval();
  };
  data.b0 = [b0 = params.b0_const](double) { return b0; };
  if (summary) {
    data.L = [Q = params.Q, summary](double t) {
      return (-2.0 * (Q(t) * summary(t))).eval();
    };
    data.L_T = -2.0 * (params.Q_T * summary(params.horizon));
  } else {
    data.L = [d](double) { return Eigen::VectorXd::Zero(d); };
    data.L_T = Eigen::VectorXd::Zero(d);
  }
  data.S_T = params.P_T + params.Q_T;
  return data;
}

double feedback_interior_slack(const RiccatiSolution& sol, const ControlBox& box,
                               const PathBundle& states) {
  double slack = std::numeric_limits<double>::infinity();
  const int np = states.grid().n_points();
  for (int o = 0; o < states.n_outer(); ++o)
    for (int i = 0; i < states.n_inner(); ++i)
      for (int k = 0; k < np; ++k) {
        Eigen::VectorXd a = sol.feedback(k, states.state(o, i, k));
        for (int c = 0; c < a.size(); ++c) {
          slack = std::min(slack, a(c) - box.lower(c));
          slack = std::min(slack, box.upper(c) - a(c));
        }
      }
  return slack;
}

}  // namespace submfg
