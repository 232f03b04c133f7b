#include "submfg/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "submfg/noise.hpp"

namespace submfg {

double hamiltonian_eval(const ModelSpec& model, double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& m, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& a) {
  Eigen::VectorXd b = model.drift_free(t, x, m) + model.b2(t) * a;
  return b.dot(y) + model.h(t, x, m, a);
}

Eigen::VectorXd hamiltonian_grad_a(const ModelSpec& model, double t,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd& a) {
  return model.b2(t).transpose() * y + model.da_h(t, x, m, a);
}

namespace {

// Objective restricted to the control argument.
double control_objective(const ModelSpec& model, double t, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& m, const Eigen::VectorXd& b2ty,
                         const Eigen::VectorXd& a) {
  return b2ty.dot(a) + model.h(t, x, m, a);
}

}  // namespace

MinimizeResult minimize_hamiltonian(const ModelSpec& model, double t,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                                    const Eigen::VectorXd& y,
                                    const MinimizeOptions& opts) {
  const int k = model.k;
  const Eigen::VectorXd b2ty = model.b2(t).transpose() * y;

  if (model.quad_control_diagonal && model.quad_control_diag) {
    Eigen::VectorXd c = model.quad_control_diag(t);
    if (c.size() == k && c.minCoeff() > 0.0) {
      Eigen::VectorXd lin = model.da_h(t, x, m, Eigen::VectorXd::Zero(k));
      // stationarity 2 c_i a_i + lin_i + (b2' y)_i = 0, then box projection;
      // exact because the objective separates across coordinates.
      Eigen::VectorXd a = (-(lin + b2ty).array() / (2.0 * c.array())).matrix();
      a = model.box.project(a);
      MinimizeResult res;
      res.argmin = a;
      res.value = hamiltonian_eval(model, t, x, m, y, a);
      res.closed_form = true;
      Eigen::VectorXd g = hamiltonian_grad_a(model, t, x, m, y, a);
      Eigen::VectorXd mapped = a - model.box.project(a - g);
      res.grad_norm = mapped.norm();
      return res;
    }
  }

  // Projected gradient with backtracking on the proximal decrease condition.
  Eigen::VectorXd a = model.box.project(Eigen::VectorXd::Zero(k));
  double fa = control_objective(model, t, x, m, b2ty, a);
  double eta = 1.0;
  std::vector<double> history;
  history.reserve(opts.max_iters + 1);
  history.push_back(fa);

  for (int it = 1; it <= opts.max_iters; ++it) {
    Eigen::VectorXd g = b2ty + model.da_h(t, x, m, a);
    if (!g.allFinite())
      throw ConvergenceError("hamiltonian minimize: gradient not finite", history);

    Eigen::VectorXd cand;
    double fc = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      cand = model.box.project(a - eta * g);
      Eigen::VectorXd d = cand - a;
      fc = control_objective(model, t, x, m, b2ty, cand);
      if (fc <= fa + g.dot(d) + d.squaredNorm() / (2.0 * eta) + 1e-14) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted)
      throw ConvergenceError("hamiltonian minimize: line search failed", history);

    Eigen::VectorXd mapped = (a - cand) / eta;
    a = cand;
    fa = fc;
    history.push_back(fa);
    double gnorm = mapped.norm();
    if (gnorm <= opts.grad_tol) {
      MinimizeResult res;
      res.argmin = a;
      res.value = hamiltonian_eval(model, t, x, m, y, a);
      res.iterations = it;
      res.grad_norm = gnorm;
      return res;
    }
    eta = std::min(eta * 1.3, 1e6);
  }
  throw ConvergenceError("hamiltonian minimize: no convergence in " +
                             std::to_string(opts.max_iters) + " iterations",
                         history);
}

Eigen::VectorXd grid_search_hamiltonian(const ModelSpec& model, double t,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& m,
                                        const Eigen::VectorXd& y, double step,
                                        double big) {
  const int k = model.k;
  const Eigen::VectorXd b2ty = model.b2(t).transpose() * y;
  Eigen::VectorXd a = model.box.project(Eigen::VectorXd::Zero(k));

  auto slice_min = [&](int comp, double lo, double hi) {
    // Bracketing grid: scan, recenter on the best cell, shrink, finish at
    // resolution `step`.  Convex slices keep the true minimum inside the
    // +-2 cell margin retained at each shrink.
    const int coarse = 257;
    Eigen::VectorXd trial = a;
    while (hi - lo > 2000.0 * step) {
      double cell = (hi - lo) / (coarse - 1);
      double best_v = std::numeric_limits<double>::infinity();
      double best_p = lo;
      for (int i = 0; i < coarse; ++i) {
        double p = lo + cell * i;
        trial(comp) = p;
        double v = control_objective(model, t, x, m, b2ty, trial);
        if (v < best_v) {
          best_v = v;
          best_p = p;
        }
      }
      lo = std::max(lo, best_p - 2.0 * cell);
      hi = std::min(hi, best_p + 2.0 * cell);
    }
    int n = static_cast<int>(std::ceil((hi - lo) / step)) + 1;
    double best_v = std::numeric_limits<double>::infinity();
    double best_p = lo;
    for (int i = 0; i < n; ++i) {
      double p = std::min(lo + step * i, hi);
      trial(comp) = p;
      double v = control_objective(model, t, x, m, b2ty, trial);
      if (v < best_v) {
        best_v = v;
        best_p = p;
      }
    }
    return best_p;
  };

  for (int pass = 0; pass < 3; ++pass) {
    for (int comp = 0; comp < k; ++comp) {
      double lo = std::max(model.box.lower(comp), -big);
      double hi = std::min(model.box.upper(comp), big);
      if (hi <= lo) {
        a(comp) = lo;
        continue;
      }
      a(comp) = slice_min(comp, lo, hi);
    }
  }
  return a;
}

MonotonicityProbeReport feedback_monotonicity_probe(
    const ModelSpec& model, const MonotonicityProbeOptions& opts) {
  MonotonicityProbeReport rep;
  const int d = model.d;
  const Eigen::VectorXd s_lo = model.summary_lo();
  const Eigen::VectorXd s_hi = model.summary_hi();
  const int dm = static_cast<int>(s_lo.size());

  std::uint64_t stream = hash_chain(mix64(opts.seed), 0x70726f6265ULL);
  auto draw = [&](std::uint64_t probe, std::uint64_t slot) {
    return key_uniform(hash_chain(hash_chain(stream, probe), slot));
  };

  for (int p = 0; p < opts.n_probes; ++p) {
    const auto pu = static_cast<std::uint64_t>(p);
    double t = model.horizon * draw(pu, 0);
    Eigen::VectorXd x_lo(d), x_hi(d), y_lo(d), y_hi(d);
    for (int i = 0; i < d; ++i) {
      double u1 = opts.x_halfwidth * (2.0 * draw(pu, 10 + 4 * i) - 1.0);
      double u2 = opts.x_halfwidth * (2.0 * draw(pu, 11 + 4 * i) - 1.0);
      x_lo(i) = std::min(u1, u2);
      x_hi(i) = std::max(u1, u2);
      double v1 = opts.y_halfwidth * (2.0 * draw(pu, 12 + 4 * i) - 1.0);
      double v2 = opts.y_halfwidth * (2.0 * draw(pu, 13 + 4 * i) - 1.0);
      y_lo(i) = std::min(v1, v2);
      y_hi(i) = std::max(v1, v2);
    }
    Eigen::VectorXd m_lo(dm), m_hi(dm);
    for (int j = 0; j < dm; ++j) {
      double w1 = s_lo(j) + (s_hi(j) - s_lo(j)) * draw(pu, 1000 + 2 * j);
      double w2 = s_lo(j) + (s_hi(j) - s_lo(j)) * draw(pu, 1001 + 2 * j);
      m_lo(j) = std::min(w1, w2);
      m_hi(j) = std::max(w1, w2);
    }

    // the minimizer map should rise when (x, m) rise and y falls
    Eigen::VectorXd a_low = minimize_hamiltonian(model, t, x_lo, m_lo, y_hi).argmin;
    Eigen::VectorXd a_high = minimize_hamiltonian(model, t, x_hi, m_hi, y_lo).argmin;
    ++rep.n_checked;
    double gap = (a_low - a_high).maxCoeff();
    if (rep.n_checked == 1 || gap > rep.worst_gap) {
      rep.worst_gap = gap;
      rep.t = t;
      rep.x_lo = x_lo;
      rep.x_hi = x_hi;
      rep.m_lo = m_lo;
      rep.m_hi = m_hi;
      rep.y_lo = y_lo;
      rep.y_hi = y_hi;
      rep.a_lo = a_low;
      rep.a_hi = a_high;
    }
    if (gap > opts.tol) ++rep.n_violations;
  }
  return rep;
}

}  // namespace submfg
