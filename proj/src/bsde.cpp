#include "submfg/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "submfg/errors.hpp"
#include "submfg/hamiltonian.hpp"
#include "submfg/parallel.hpp"

namespace submfg {

namespace {

void compositions(int total, int dim, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
  if (dim == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int e = total; e >= 0; --e) {
    cur.push_back(e);
    compositions(total - e, dim - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

BasisLayout build_basis(int dim_x, int dim_m, int degree) {
  if (dim_x < 1) throw std::invalid_argument("basis needs dim_x >= 1");
  if (dim_m < 0 || degree < 0) throw std::invalid_argument("bad basis shape");
  BasisLayout layout;
  layout.dim_x = dim_x;
  layout.dim_m = dim_m;
  std::vector<int> cur;
  for (int q = 0; q <= degree; ++q)
    compositions(q, dim_x + dim_m, cur, layout.exponents);
  layout.n_features = static_cast<int>(layout.exponents.size());
  return layout;
}

void eval_features(const BasisLayout& layout, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& m, double* out) {
  const int dx = layout.dim_x;
  for (int f = 0; f < layout.n_features; ++f) {
    const auto& e = layout.exponents[f];
    double v = 1.0;
    for (int i = 0; i < dx; ++i)
      for (int r = 0; r < e[i]; ++r) v *= x(i);
    for (int j = 0; j < layout.dim_m; ++j)
      for (int r = 0; r < e[dx + j]; ++r) v *= m(j);
    out[f] = v;
  }
}

Eigen::VectorXd BsdeSolution::eval_y(int step, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& m) const {
  if (step < 0 || step >= static_cast<int>(coeffs.size()))
    throw std::out_of_range("decoupling field queried outside fitted steps");
  const Eigen::VectorXd& mu = shift[step];
  const Eigen::VectorXd& sd = scale[step];
  Eigen::VectorXd zx(layout.dim_x), zm(layout.dim_m);
  for (int i = 0; i < layout.dim_x; ++i) zx(i) = (x(i) - mu(i)) / sd(i);
  for (int j = 0; j < layout.dim_m; ++j)
    zm(j) = (m(j) - mu(layout.dim_x + j)) / sd(layout.dim_x + j);
  Eigen::VectorXd f(layout.n_features);
  eval_features(layout, zx, zm, f.data());
  return coeffs[step].transpose() * f;
}

Eigen::MatrixXd standardization_change(const BasisLayout& layout,
                                       const Eigen::VectorXd& shift_from,
                                       const Eigen::VectorXd& scale_from,
                                       const Eigen::VectorXd& shift_to,
                                       const Eigen::VectorXd& scale_to) {
  const int nv = layout.dim_x + layout.dim_m;
  const int nf = layout.n_features;
  if (shift_from.size() != nv || scale_from.size() != nv ||
      shift_to.size() != nv || scale_to.size() != nv)
    throw std::invalid_argument("standardization size does not match the basis");

  std::map<std::vector<int>, int> index;
  for (int f = 0; f < nf; ++f) index[layout.exponents[f]] = f;

  // u_j = A_j v_j + B_j where u is the source variable and v the target one
  Eigen::VectorXd A(nv), B(nv);
  for (int j = 0; j < nv; ++j) {
    A(j) = scale_to(j) / scale_from(j);
    B(j) = (shift_to(j) - shift_from(j)) / scale_from(j);
  }

  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nf, nf);
  std::map<std::vector<int>, double> terms, next;
  for (int f = 0; f < nf; ++f) {
    const auto& e = layout.exponents[f];
    terms.clear();
    terms[std::vector<int>(nv, 0)] = 1.0;
    for (int j = 0; j < nv; ++j) {
      for (int r = 0; r < e[j]; ++r) {  // multiply by (A_j v_j + B_j)
        next.clear();
        for (const auto& [expo, c] : terms) {
          std::vector<int> up = expo;
          ++up[j];
          next[up] += c * A(j);
          next[expo] += c * B(j);
        }
        terms.swap(next);
      }
    }
    for (const auto& [expo, c] : terms) C(index.at(expo), f) += c;
  }
  return C;
}

namespace {

Eigen::VectorXd driver_eval(const ModelSpec& model, double t, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& m, const Eigen::VectorXd& y) {
  Eigen::VectorXd a = minimize_hamiltonian(model, t, x, m, y).argmin;
  return model.drift_jac_x(t, x, m).transpose() * y + model.dx_h(t, x, m, a);
}

}  // namespace

BsdeSolution solve_bsde_backward(const ModelSpec& model, const NoisePlan& plan,
                                 const PathBundle& x, const SummaryTable& flow,
                                 const RegressionBasis& basis,
                                 const BsdeOptions& opts) {
  if (x.n_outer() != plan.n_outer() || x.n_inner() != plan.n_inner() ||
      !(x.grid() == plan.grid()))
    throw std::invalid_argument("bundle shape does not match the noise plan");
  if (x.plan_fingerprint() != plan.fingerprint())
    throw std::invalid_argument("bundle was simulated under a different noise plan");
  if (x.dim() != model.d)
    throw std::invalid_argument("bundle dimension does not match the model");

  const TimeGrid grid = x.grid();
  const int N = grid.n_steps;
  const int d = model.d;
  const int n_outer = x.n_outer();
  const int n_inner = x.n_inner();
  const int n_paths = x.n_paths();
  const double dt = grid.dt();
  const int dim_m = flow.n_summaries();

  BsdeSolution sol;
  sol.layout = build_basis(d, dim_m, basis.degree);
  const int nf = sol.layout.n_features;
  const int nv = d + dim_m;
  sol.y = PathBundle(grid, n_outer, n_inner, d, x.plan_fingerprint());
  sol.coeffs.assign(N, Eigen::MatrixXd());
  sol.shift.assign(N, Eigen::VectorXd::Zero(nv));
  sol.scale.assign(N, Eigen::VectorXd::Ones(nv));
  if (opts.estimate_z) {
    sol.z = PathBundle(grid, n_outer, n_inner, d * plan.dim_w(), x.plan_fingerprint());
    if (plan.dim_b() > 0)
      sol.z0 = PathBundle(grid, n_outer, n_inner, d * plan.dim_b(), x.plan_fingerprint());
  }

  // terminal condition, exact
  parallel_for(n_outer, opts.threads, [&](int o) {
    for (int i = 0; i < n_inner; ++i) {
      Eigen::VectorXd xN = x.state(o, i, N);
      Eigen::VectorXd mN = flow.eval(o, N, xN);
      sol.y.state(o, i, N) = model.dx_g(xN, mN);
    }
  });
  if (!sol.y.all_finite())
    throw NumericalError("terminal cost gradient produced non-finite values");

  // Row-major so each path's feature row is contiguous for eval_features.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> F(
      n_paths, nf);
  Eigen::MatrixXd X(n_paths, d);
  Eigen::MatrixXd M(n_paths, std::max(dim_m, 1));
  Eigen::MatrixXd Yn(n_paths, d);
  Eigen::MatrixXd T(n_paths, d);
  Eigen::MatrixXd Yfit(n_paths, d);

  for (int k = N - 1; k >= 0; --k) {
    const double t = grid.time(k);

    parallel_for(n_outer, opts.threads, [&](int o) {
      for (int i = 0; i < n_inner; ++i) {
        const int p = o * n_inner + i;
        Eigen::VectorXd xk = x.state(o, i, k);
        Eigen::VectorXd mk = flow.eval(o, k, xk);
        X.row(p) = xk.transpose();
        if (dim_m > 0) M.row(p) = mk.transpose();
        Yn.row(p) = sol.y.state(o, i, k + 1).transpose();
      }
    });

    Eigen::VectorXd& mu = sol.shift[k];
    Eigen::VectorXd& sd = sol.scale[k];
    std::vector<bool> degenerate(nv, false);
    for (int j = 0; j < nv; ++j) {
      const auto col = j < d ? X.col(j) : M.col(j - d);
      mu(j) = col.mean();
      double var = (col.array() - mu(j)).square().sum() / n_paths;
      double s = std::sqrt(std::max(var, 0.0));
      if (s < 1e-12 * std::max(1.0, std::abs(mu(j)))) {
        degenerate[j] = true;
        sd(j) = 1.0;
      } else {
        sd(j) = s;
      }
    }

    parallel_for(n_outer, opts.threads, [&](int o) {
      Eigen::VectorXd zx(d), zm(dim_m);
      for (int i = 0; i < n_inner; ++i) {
        const int p = o * n_inner + i;
        for (int j = 0; j < d; ++j) zx(j) = (X(p, j) - mu(j)) / sd(j);
        for (int j = 0; j < dim_m; ++j)
          zm(j) = (M(p, j) - mu(d + j)) / sd(d + j);
        eval_features(sol.layout, zx, zm, F.row(p).data());
      }
    });

    Eigen::MatrixXd G = F.transpose() * F;
    {
      // Conditioning check over the features that can carry information:
      // monomials touching a zero-spread coordinate are identically zero in
      // this sample, which is deliberate, not a conditioning problem.
      std::vector<int> active;
      for (int f = 0; f < nf; ++f) {
        bool ok = true;
        for (int j = 0; j < nv; ++j)
          if (degenerate[j] && sol.layout.exponents[f][j] > 0) ok = false;
        if (ok) active.push_back(f);
      }
      Eigen::MatrixXd Ga(active.size(), active.size());
      for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = 0; b < active.size(); ++b)
          Ga(a, b) = G(active[a], active[b]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ga);
      double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
      if (es.eigenvalues().minCoeff() < 1e-10 * std::max(lmax, 1e-300))
        ++sol.ridge_fallbacks;
    }
    double lam = basis.ridge * std::max(1.0, G.trace() / nf);
    Eigen::LDLT<Eigen::MatrixXd> gram(
        G + lam * Eigen::MatrixXd::Identity(nf, nf));

    // predictor: driver frozen at the next-step adjoint
    parallel_for(n_outer, opts.threads, [&](int o) {
      for (int i = 0; i < n_inner; ++i) {
        const int p = o * n_inner + i;
        Eigen::VectorXd xk = x.state(o, i, k);
        Eigen::VectorXd mk = dim_m > 0 ? M.row(p).transpose().eval()
                                       : Eigen::VectorXd(0);
        Eigen::VectorXd yc = Yn.row(p).transpose();
        T.row(p) = (yc + dt * driver_eval(model, t, xk, mk, yc)).transpose();
      }
    });
    Eigen::MatrixXd W1 = gram.solve(F.transpose() * T);
    Yfit = F * W1;

    // corrector: driver re-evaluated at the fitted current-step adjoint
    parallel_for(n_outer, opts.threads, [&](int o) {
      for (int i = 0; i < n_inner; ++i) {
        const int p = o * n_inner + i;
        Eigen::VectorXd xk = x.state(o, i, k);
        Eigen::VectorXd mk = dim_m > 0 ? M.row(p).transpose().eval()
                                       : Eigen::VectorXd(0);
        Eigen::VectorXd yc = Yfit.row(p).transpose();
        T.row(p) = (Yn.row(p).transpose() + dt * driver_eval(model, t, xk, mk, yc))
                       .transpose();
      }
    });
    Eigen::MatrixXd W2 = gram.solve(F.transpose() * T);
    sol.coeffs[k] = W2;
    Yfit = F * W2;
    if (!Yfit.allFinite())
      throw NumericalError("adjoint regression produced non-finite values at step " +
                           std::to_string(k));
    for (int o = 0; o < n_outer; ++o)
      for (int i = 0; i < n_inner; ++i)
        sol.y.state(o, i, k) = Yfit.row(o * n_inner + i).transpose();

    if (opts.estimate_z) {
      const int dw = plan.dim_w();
      Eigen::MatrixXd Tz(n_paths, d * dw);
      parallel_for(n_outer, opts.threads, [&](int o) {
        for (int i = 0; i < n_inner; ++i) {
          const int p = o * n_inner + i;
          Eigen::VectorXd dWk = plan.dW(o, i, k) / dt;
          for (int ci = 0; ci < d; ++ci)
            for (int j = 0; j < dw; ++j) Tz(p, ci * dw + j) = Yn(p, ci) * dWk(j);
        }
      });
      Eigen::MatrixXd Zfit = F * gram.solve(F.transpose() * Tz);
      for (int o = 0; o < n_outer; ++o)
        for (int i = 0; i < n_inner; ++i)
          sol.z->state(o, i, k) = Zfit.row(o * n_inner + i).transpose();

      if (sol.z0) {
        const int db = plan.dim_b();
        Eigen::MatrixXd Tz0(n_paths, d * db);
        parallel_for(n_outer, opts.threads, [&](int o) {
          Eigen::VectorXd dBk = plan.dB(o, k) / dt;
          for (int i = 0; i < n_inner; ++i) {
            const int p = o * n_inner + i;
            for (int ci = 0; ci < d; ++ci)
              for (int j = 0; j < db; ++j) Tz0(p, ci * db + j) = Yn(p, ci) * dBk(j);
          }
        });
        Eigen::MatrixXd Z0fit = F * gram.solve(F.transpose() * Tz0);
        for (int o = 0; o < n_outer; ++o)
          for (int i = 0; i < n_inner; ++i)
            sol.z0->state(o, i, k) = Z0fit.row(o * n_inner + i).transpose();
      }
    }
  }

  if (sol.ridge_fallbacks > 0)
    sol.warnings.push_back(
        "regression Gram matrix rank-deficient at " +
        std::to_string(sol.ridge_fallbacks) + " of " + std::to_string(N) +
        " steps; ridge regularization kept the solves stable");
  return sol;
}

}  // namespace submfg
