#include "submfg/checks.hpp"

#include <algorithm>
#include <cmath>

#include "submfg/noise.hpp"

namespace submfg {

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v;
  if (!(hi > lo) || n <= 1) {
    v.push_back(lo);
    return v;
  }
  v.reserve(n);
  for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
  return v;
}

// Deterministic probe draws: every value is a pure function of
// (seed, check id, base index, slot).
struct ProbeRng {
  std::uint64_t stream;
  ProbeRng(std::uint64_t seed, std::uint64_t check_id)
      : stream(hash_chain(mix64(seed), check_id)) {}
  double uni(std::uint64_t base, std::uint64_t slot) const {
    return key_uniform(hash_chain(hash_chain(stream, base), slot));
  }
  Eigen::VectorXd in_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         std::uint64_t base, std::uint64_t slot0) const {
    Eigen::VectorXd v(lo.size());
    for (int c = 0; c < lo.size(); ++c)
      v(c) = lo(c) + (hi(c) - lo(c)) * uni(base, slot0 + c);
    return v;
  }
};

void add_witness(CheckResult& res, int cap, ProbeWitness w) {
  res.pass = false;
  if (static_cast<int>(res.witnesses.size()) < cap) res.witnesses.push_back(std::move(w));
}

void add_witness(DiffReport& rep, int cap, ProbeWitness w) {
  rep.pass = false;
  if (static_cast<int>(rep.violations.size()) < cap) rep.violations.push_back(std::move(w));
}

Eigen::VectorXd clip_window(const Eigen::VectorXd& lo, double cap, bool is_lower) {
  Eigen::VectorXd v = lo;
  for (int c = 0; c < v.size(); ++c) {
    if (is_lower) v(c) = std::max(v(c), -cap);
    else v(c) = std::min(v(c), cap);
  }
  return v;
}

struct ProbeWindows {
  Eigen::VectorXd x_lo, x_hi, m_lo, m_hi, a_lo, a_hi;
  std::vector<double> times;
};

ProbeWindows make_windows(const ModelSpec& model, const ProbeConfig& cfg) {
  ProbeWindows w;
  w.x_lo = Eigen::VectorXd::Constant(model.d, -cfg.x_halfwidth);
  w.x_hi = Eigen::VectorXd::Constant(model.d, cfg.x_halfwidth);
  Eigen::VectorXd s_lo = model.summary_lo();
  Eigen::VectorXd s_hi = model.summary_hi();
  w.m_lo = clip_window(s_lo, cfg.window_cap, true);
  w.m_hi = clip_window(s_hi, cfg.window_cap, false);
  for (int c = 0; c < w.m_lo.size(); ++c)
    if (!(w.m_lo(c) < w.m_hi(c))) {
      w.m_lo(c) = -cfg.window_cap;
      w.m_hi(c) = cfg.window_cap;
    }
  w.a_lo = clip_window(model.box.lower, cfg.window_cap, true);
  w.a_hi = clip_window(model.box.upper, cfg.window_cap, false);
  for (int c = 0; c < w.a_lo.size(); ++c)
    if (!(w.a_lo(c) < w.a_hi(c))) w.a_hi(c) = w.a_lo(c);
  w.times = linspace(0.0, model.horizon, cfg.n_time);
  return w;
}

}  // namespace

DiffReport check_decreasing_differences(const BivariateFn& f,
                                        const Eigen::VectorXd& x_lo,
                                        const Eigen::VectorXd& x_hi,
                                        const Eigen::VectorXd& y_lo,
                                        const Eigen::VectorXd& y_hi,
                                        const ProbeConfig& cfg) {
  DiffReport rep;
  ProbeRng rng(cfg.seed, 0x6463643264ULL);
  const double s = cfg.step;
  for (int b = 0; b < cfg.n_base; ++b) {
    Eigen::VectorXd bx = rng.in_box(x_lo, x_hi, b, 0);
    Eigen::VectorXd by = rng.in_box(y_lo, y_hi, b, 1000);
    for (int i = 0; i < x_lo.size(); ++i) {
      if (x_hi(i) - x_lo(i) < s) continue;
      for (int j = 0; j < y_lo.size(); ++j) {
        if (y_hi(j) - y_lo(j) < s) continue;
        for (double xi : linspace(x_lo(i), x_hi(i) - s, cfg.points_per_axis))
          for (double yj : linspace(y_lo(j), y_hi(j) - s, cfg.points_per_axis)) {
            Eigen::VectorXd px = bx, py = by;
            px(i) = xi;
            py(j) = yj;
            double f00 = f(px, py);
            Eigen::VectorXd pxs = px, pys = py;
            pxs(i) += s;
            pys(j) += s;
            double f10 = f(pxs, py);
            double f01 = f(px, pys);
            double f11 = f(pxs, pys);
            ++rep.n_evaluated;
            double dd = f11 - f10 - f01 + f00;
            if (!std::isfinite(dd)) {
              ProbeWitness w;
              w.check = "decreasing-differences";
              w.i = i;
              w.j = j;
              w.x = px;
              w.m = py;
              w.value = dd;
              w.note = "non-finite evaluation";
              add_witness(rep, cfg.max_witnesses, std::move(w));
              continue;
            }
            rep.worst = std::max(rep.worst, dd);
            if (dd > cfg.tol * (1.0 + std::abs(f00))) {
              ProbeWitness w;
              w.check = "decreasing-differences";
              w.i = i;
              w.j = j;
              w.x = px;
              w.m = py;
              w.value = dd;
              add_witness(rep, cfg.max_witnesses, std::move(w));
            }
          }
      }
    }
  }
  return rep;
}

DiffReport check_submodularity_x(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, const ProbeConfig& cfg) {
  DiffReport rep;
  const int d = static_cast<int>(lo.size());
  if (d <= 1) {
    rep.note = "vacuously satisfied for one-dimensional argument";
    return rep;
  }
  ProbeRng rng(cfg.seed, 0x7375626d6fULL);
  const double s = cfg.step;
  for (int b = 0; b < cfg.n_base; ++b) {
    Eigen::VectorXd base = rng.in_box(lo, hi, b, 0);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        if (hi(i) - lo(i) < s || hi(j) - lo(j) < s) continue;
        for (double xi : linspace(lo(i), hi(i) - s, cfg.points_per_axis))
          for (double xj : linspace(lo(j), hi(j) - s, cfg.points_per_axis)) {
            Eigen::VectorXd p = base;
            p(i) = xi;
            p(j) = xj;
            Eigen::VectorXd pi = p, pj = p, pij = p;
            pi(i) += s;
            pj(j) += s;
            pij(i) += s;
            pij(j) += s;
            double f00 = f(p), f10 = f(pi), f01 = f(pj), f11 = f(pij);
            ++rep.n_evaluated;
            double dd = f11 - f10 - f01 + f00;
            if (!std::isfinite(dd)) {
              ProbeWitness w;
              w.check = "submodularity";
              w.i = i;
              w.j = j;
              w.x = p;
              w.value = dd;
              w.note = "non-finite evaluation";
              add_witness(rep, cfg.max_witnesses, std::move(w));
              continue;
            }
            rep.worst = std::max(rep.worst, dd);
            if (dd > cfg.tol * (1.0 + std::abs(f00))) {
              ProbeWitness w;
              w.check = "submodularity";
              w.i = i;
              w.j = j;
              w.x = p;
              w.value = dd;
              add_witness(rep, cfg.max_witnesses, std::move(w));
            }
          }
      }
  }
  return rep;
}

DiffReport check_monotone_map(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const ProbeConfig& cfg) {
  DiffReport rep;
  ProbeRng rng(cfg.seed, 0x6d6f6e6f74ULL);
  const double s = cfg.step;
  for (int b = 0; b < cfg.n_base; ++b) {
    Eigen::VectorXd base = rng.in_box(lo, hi, b, 0);
    for (int c = 0; c < lo.size(); ++c) {
      if (hi(c) - lo(c) < s) continue;
      for (double v : linspace(lo(c), hi(c) - s, cfg.points_per_axis)) {
        Eigen::VectorXd p = base, q = base;
        p(c) = v;
        q(c) = v + s;
        Eigen::VectorXd flo = f(p), fhi = f(q);
        ++rep.n_evaluated;
        for (int out = 0; out < flo.size(); ++out) {
          double drop = flo(out) - fhi(out);
          if (!std::isfinite(drop)) {
            ProbeWitness w;
            w.check = "monotone-map";
            w.i = c;
            w.j = out;
            w.x = p;
            w.x2 = q;
            w.value = drop;
            w.note = "non-finite evaluation";
            add_witness(rep, cfg.max_witnesses, std::move(w));
            continue;
          }
          rep.worst = std::max(rep.worst, drop);
          if (drop > cfg.tol * (1.0 + std::abs(flo(out)))) {
            ProbeWitness w;
            w.check = "monotone-map";
            w.i = c;
            w.j = out;
            w.x = p;
            w.x2 = q;
            w.value = drop;
            add_witness(rep, cfg.max_witnesses, std::move(w));
          }
        }
      }
    }
  }
  return rep;
}

namespace {

// Merges a sub-report into a named check, tagging witnesses with context.
void fold_report(CheckResult& res, const ProbeConfig& cfg, const DiffReport& sub,
                 double t, const Eigen::VectorXd* m, const Eigen::VectorXd* a) {
  res.n_evaluated += sub.n_evaluated;
  res.worst = std::max(res.worst, sub.worst);
  if (!sub.note.empty() && res.note.empty()) res.note = sub.note;
  if (!sub.pass) {
    res.pass = false;
    for (const auto& v : sub.violations) {
      if (static_cast<int>(res.witnesses.size()) >= cfg.max_witnesses) break;
      ProbeWitness w = v;
      w.check = res.name;
      w.t = t;
      if (m != nullptr && w.m.size() == 0) w.m = *m;
      if (a != nullptr && w.a.size() == 0) w.a = *a;
      res.witnesses.push_back(std::move(w));
    }
  }
}

void separable_suite(const ModelSpec& model, const ProbeConfig& cfg,
                     const ProbeWindows& win, AssumptionReport& rep) {
  const int d = model.d;
  const int dm = static_cast<int>(win.m_lo.size());
  ProbeRng rng(cfg.seed, 0x736570ULL);

  {
    CheckResult res;
    res.name = "control dimension equals state dimension";
    res.n_evaluated = 1;
    if (model.k != d) {
      ProbeWitness w;
      w.check = res.name;
      w.note = "k = " + std::to_string(model.k) + ", d = " + std::to_string(d);
      add_witness(res, cfg.max_witnesses, std::move(w));
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "drift free of the interaction";
    if (dm == 0) {
      res.note = "no interaction summaries";
    } else {
      for (double t : win.times)
        for (int b = 0; b < cfg.n_base; ++b) {
          Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 0);
          Eigen::VectorXd m1 = rng.in_box(win.m_lo, win.m_hi, b, 100);
          Eigen::VectorXd m2 = rng.in_box(win.m_lo, win.m_hi, b, 200);
          Eigen::VectorXd v1 = model.drift_free(t, x, m1);
          Eigen::VectorXd v2 = model.drift_free(t, x, m2);
          ++res.n_evaluated;
          double dev = (v1 - v2).cwiseAbs().maxCoeff();
          res.worst = std::max(res.worst, dev);
          if (!(dev <= cfg.tol * (1.0 + v1.cwiseAbs().maxCoeff()))) {
            ProbeWitness w;
            w.check = res.name;
            w.t = t;
            w.x = x;
            w.m = m1;
            w.m2 = m2;
            w.value = dev;
            add_witness(res, cfg.max_witnesses, std::move(w));
          }
        }
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "drift couples coordinates diagonally";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 300);
        Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 400);
        Eigen::MatrixXd J = model.drift_jac_x(t, x, m);
        ++res.n_evaluated;
        double scale = 1.0 + J.cwiseAbs().maxCoeff();
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            double v = std::abs(J(i, j));
            res.worst = std::max(res.worst, v);
            if (v > cfg.tol * scale) {
              ProbeWitness w;
              w.check = res.name;
              w.t = t;
              w.x = x;
              w.m = m;
              w.i = i;
              w.j = j;
              w.value = v;
              add_witness(res, cfg.max_witnesses, std::move(w));
            }
          }
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "control matrix diagonal";
    for (double t : win.times) {
      Eigen::MatrixXd B = model.b2(t);
      ++res.n_evaluated;
      double scale = 1.0 + B.cwiseAbs().maxCoeff();
      for (int i = 0; i < B.rows(); ++i)
        for (int j = 0; j < B.cols(); ++j) {
          if (i == j) continue;
          double v = std::abs(B(i, j));
          res.worst = std::max(res.worst, v);
          if (v > cfg.tol * scale) {
            ProbeWitness w;
            w.check = res.name;
            w.t = t;
            w.i = i;
            w.j = j;
            w.value = v;
            add_witness(res, cfg.max_witnesses, std::move(w));
          }
        }
    }
    rep.checks.push_back(std::move(res));
  }

  ProbeConfig sub_cfg = cfg;
  sub_cfg.n_base = 1;  // the suite supplies its own frozen-coordinate draws

  {
    CheckResult res;
    res.name = "running cost submodular in the state";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 500);
        Eigen::VectorXd a = rng.in_box(win.a_lo, win.a_hi, b, 600);
        auto f = [&](const Eigen::VectorXd& x) { return model.h(t, x, m, a); };
        fold_report(res, cfg, check_submodularity_x(f, win.x_lo, win.x_hi, sub_cfg), t,
                    &m, &a);
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "running cost decreasing differences in state and interaction";
    if (dm == 0) {
      res.note = "no interaction summaries";
    } else {
      for (double t : win.times)
        for (int b = 0; b < cfg.n_base; ++b) {
          Eigen::VectorXd a = rng.in_box(win.a_lo, win.a_hi, b, 700);
          BivariateFn f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& m) {
            return model.h(t, x, m, a);
          };
          fold_report(res, cfg,
                      check_decreasing_differences(f, win.x_lo, win.x_hi, win.m_lo,
                                                   win.m_hi, sub_cfg),
                      t, nullptr, &a);
        }
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "terminal cost submodular in the state";
    for (int b = 0; b < cfg.n_base; ++b) {
      Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 800);
      auto f = [&](const Eigen::VectorXd& x) { return model.g(x, m); };
      fold_report(res, cfg, check_submodularity_x(f, win.x_lo, win.x_hi, sub_cfg),
                  model.horizon, &m, nullptr);
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "terminal cost decreasing differences in state and interaction";
    if (dm == 0) {
      res.note = "no interaction summaries";
    } else {
      BivariateFn f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& m) {
        return model.g(x, m);
      };
      fold_report(res, cfg,
                  check_decreasing_differences(f, win.x_lo, win.x_hi, win.m_lo,
                                               win.m_hi, sub_cfg),
                  model.horizon, nullptr, nullptr);
    }
    rep.checks.push_back(std::move(res));
  }
}

void nonseparable_suite(const ModelSpec& model, const ProbeConfig& cfg,
                        const ProbeWindows& win, AssumptionReport& rep) {
  const int d = model.d;
  const int dm = static_cast<int>(win.m_lo.size());
  ProbeRng rng(cfg.seed, 0x6e6f6e736570ULL);
  const double s = cfg.step;

  {
    CheckResult res;
    res.name = "drift affine in the state";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 0);
        Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 100);
        Eigen::VectorXd f0 = model.drift_free(t, x, m);
        double scale = 1.0 + f0.cwiseAbs().maxCoeff();
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) {
            Eigen::VectorXd pi = x, pj = x, pij = x;
            pi(i) += s;
            pj(j) += s;
            pij(i) += s;
            pij(j) += s;
            Eigen::VectorXd dd = model.drift_free(t, pij, m) - model.drift_free(t, pi, m) -
                                 model.drift_free(t, pj, m) + f0;
            ++res.n_evaluated;
            double v = dd.cwiseAbs().maxCoeff();
            res.worst = std::max(res.worst, v);
            if (v > cfg.tol * scale) {
              ProbeWitness w;
              w.check = res.name;
              w.t = t;
              w.x = x;
              w.m = m;
              w.i = i;
              w.j = j;
              w.value = v;
              add_witness(res, cfg.max_witnesses, std::move(w));
            }
          }
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "state matrix entries nonnegative";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 200);
        Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 300);
        Eigen::MatrixXd J = model.drift_jac_x(t, x, m);
        ++res.n_evaluated;
        double scale = 1.0 + J.cwiseAbs().maxCoeff();
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            double neg = -J(i, j);
            res.worst = std::max(res.worst, neg);
            if (neg > cfg.tol * scale) {
              ProbeWitness w;
              w.check = res.name;
              w.t = t;
              w.x = x;
              w.m = m;
              w.i = i;
              w.j = j;
              w.value = J(i, j);
              add_witness(res, cfg.max_witnesses, std::move(w));
            }
          }
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "control matrix entries nonnegative";
    for (double t : win.times) {
      Eigen::MatrixXd B = model.b2(t);
      ++res.n_evaluated;
      double scale = 1.0 + B.cwiseAbs().maxCoeff();
      for (int i = 0; i < B.rows(); ++i)
        for (int j = 0; j < B.cols(); ++j) {
          double neg = -B(i, j);
          res.worst = std::max(res.worst, neg);
          if (neg > cfg.tol * scale) {
            ProbeWitness w;
            w.check = res.name;
            w.t = t;
            w.i = i;
            w.j = j;
            w.value = B(i, j);
            add_witness(res, cfg.max_witnesses, std::move(w));
          }
        }
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "drift offset nondecreasing in the interaction";
    if (dm == 0) {
      res.note = "no interaction summaries";
    } else {
      for (double t : win.times)
        for (int b = 0; b < cfg.n_base; ++b) {
          Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 400);
          Eigen::VectorXd m1 = rng.in_box(win.m_lo, win.m_hi, b, 500);
          Eigen::VectorXd m2 = rng.in_box(win.m_lo, win.m_hi, b, 600);
          Eigen::VectorXd lo = m1.cwiseMin(m2), hi = m1.cwiseMax(m2);
          Eigen::VectorXd vlo = model.drift_free(t, x, lo);
          Eigen::VectorXd vhi = model.drift_free(t, x, hi);
          ++res.n_evaluated;
          double scale = 1.0 + vlo.cwiseAbs().maxCoeff();
          double drop = (vlo - vhi).maxCoeff();
          res.worst = std::max(res.worst, drop);
          if (drop > cfg.tol * scale) {
            ProbeWitness w;
            w.check = res.name;
            w.t = t;
            w.x = x;
            w.m = lo;
            w.m2 = hi;
            w.value = drop;
            add_witness(res, cfg.max_witnesses, std::move(w));
          }
        }
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "cost gradients within the growth bound";
    const double K = model.constants.K;
    if (K <= 0.0) {
      res.note = "no growth constant declared";
    } else {
      for (double t : win.times)
        for (int b = 0; b < cfg.n_base; ++b) {
          Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 700);
          Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 800);
          Eigen::VectorXd a = rng.in_box(win.a_lo, win.a_hi, b, 900);
          double bound = K * (1.0 + m.lpNorm<1>());
          double vh = model.dx_h(t, x, m, a).cwiseAbs().maxCoeff();
          double vg = model.dx_g(x, m).cwiseAbs().maxCoeff();
          ++res.n_evaluated;
          double over = std::max(vh, vg) - bound;
          res.worst = std::max(res.worst, over);
          if (over > cfg.tol * (1.0 + bound)) {
            ProbeWitness w;
            w.check = res.name;
            w.t = t;
            w.x = x;
            w.m = m;
            w.a = a;
            w.value = std::max(vh, vg);
            w.note = "bound " + std::to_string(bound);
            add_witness(res, cfg.max_witnesses, std::move(w));
          }
        }
    }
    rep.checks.push_back(std::move(res));
  }

  ProbeConfig sub_cfg = cfg;
  sub_cfg.n_base = 1;

  {
    CheckResult res;
    res.name = "running cost submodular in the control";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 1000);
        Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 1100);
        auto f = [&](const Eigen::VectorXd& a) { return model.h(t, x, m, a); };
        fold_report(res, cfg, check_submodularity_x(f, win.a_lo, win.a_hi, sub_cfg), t,
                    &m, nullptr);
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "running cost decreasing differences in control and state";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 1200);
        BivariateFn f = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& x) {
          return model.h(t, x, m, a);
        };
        fold_report(res, cfg,
                    check_decreasing_differences(f, win.a_lo, win.a_hi, win.x_lo,
                                                 win.x_hi, sub_cfg),
                    t, &m, nullptr);
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "running cost decreasing differences in control and interaction";
    if (dm == 0) {
      res.note = "no interaction summaries";
    } else {
      for (double t : win.times)
        for (int b = 0; b < cfg.n_base; ++b) {
          Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 1300);
          BivariateFn f = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& m) {
            return model.h(t, x, m, a);
          };
          fold_report(res, cfg,
                      check_decreasing_differences(f, win.a_lo, win.a_hi, win.m_lo,
                                                   win.m_hi, sub_cfg),
                      t, nullptr, nullptr);
        }
    }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "running cost state gradient nonincreasing";
    for (double t : win.times)
      for (int b = 0; b < cfg.n_base; ++b) {
        Eigen::VectorXd x1 = rng.in_box(win.x_lo, win.x_hi, b, 1400);
        Eigen::VectorXd x2 = rng.in_box(win.x_lo, win.x_hi, b, 1500);
        Eigen::VectorXd m1 = rng.in_box(win.m_lo, win.m_hi, b, 1600);
        Eigen::VectorXd m2 = rng.in_box(win.m_lo, win.m_hi, b, 1700);
        Eigen::VectorXd a1 = rng.in_box(win.a_lo, win.a_hi, b, 1800);
        Eigen::VectorXd a2 = rng.in_box(win.a_lo, win.a_hi, b, 1900);
        Eigen::VectorXd xlo = x1.cwiseMin(x2), xhi = x1.cwiseMax(x2);
        Eigen::VectorXd mlo = m1.cwiseMin(m2), mhi = m1.cwiseMax(m2);
        Eigen::VectorXd alo = a1.cwiseMin(a2), ahi = a1.cwiseMax(a2);
        Eigen::VectorXd glo = model.dx_h(t, xlo, mlo, alo);
        Eigen::VectorXd ghi = model.dx_h(t, xhi, mhi, ahi);
        ++res.n_evaluated;
        double rise = (ghi - glo).maxCoeff();
        res.worst = std::max(res.worst, rise);
        if (rise > cfg.tol * (1.0 + glo.cwiseAbs().maxCoeff())) {
          ProbeWitness w;
          w.check = res.name;
          w.t = t;
          w.x = xlo;
          w.x2 = xhi;
          w.m = mlo;
          w.m2 = mhi;
          w.a = alo;
          w.a2 = ahi;
          w.value = rise;
          add_witness(res, cfg.max_witnesses, std::move(w));
        }
      }
    rep.checks.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "terminal cost state gradient nonincreasing";
    for (int b = 0; b < cfg.n_base * cfg.n_time; ++b) {
      Eigen::VectorXd x1 = rng.in_box(win.x_lo, win.x_hi, b, 2000);
      Eigen::VectorXd x2 = rng.in_box(win.x_lo, win.x_hi, b, 2100);
      Eigen::VectorXd m1 = rng.in_box(win.m_lo, win.m_hi, b, 2200);
      Eigen::VectorXd m2 = rng.in_box(win.m_lo, win.m_hi, b, 2300);
      Eigen::VectorXd xlo = x1.cwiseMin(x2), xhi = x1.cwiseMax(x2);
      Eigen::VectorXd mlo = m1.cwiseMin(m2), mhi = m1.cwiseMax(m2);
      Eigen::VectorXd glo = model.dx_g(xlo, mlo);
      Eigen::VectorXd ghi = model.dx_g(xhi, mhi);
      ++res.n_evaluated;
      double rise = (ghi - glo).maxCoeff();
      res.worst = std::max(res.worst, rise);
      if (rise > cfg.tol * (1.0 + glo.cwiseAbs().maxCoeff())) {
        ProbeWitness w;
        w.check = res.name;
        w.t = model.horizon;
        w.x = xlo;
        w.x2 = xhi;
        w.m = mlo;
        w.m2 = mhi;
        w.value = rise;
        add_witness(res, cfg.max_witnesses, std::move(w));
      }
    }
    rep.checks.push_back(std::move(res));
  }
}

}  // namespace

AssumptionReport check_assumption_suite(const ModelSpec& model,
                                        const ProbeConfig& cfg) {
  AssumptionReport rep;
  rep.regime = model.regime;
  ProbeWindows win = make_windows(model, cfg);
  if (model.regime == Regime::Separable)
    separable_suite(model, cfg, win, rep);
  else
    nonseparable_suite(model, cfg, win, rep);
  for (const auto& c : rep.checks)
    if (!c.pass) rep.pass = false;
  return rep;
}

RegularityReport validate_regularity(const ModelSpec& model, const ProbeConfig& cfg) {
  RegularityReport rep;
  rep.declared_lambda = model.constants.lambda;
  ProbeWindows win = make_windows(model, cfg);
  ProbeRng rng(cfg.seed, 0x726567756cULL);

  bool lambda_seen = false;
  for (double t : win.times)
    for (int b = 0; b < cfg.n_base; ++b) {
      Eigen::VectorXd x = rng.in_box(win.x_lo, win.x_hi, b, 0);
      Eigen::VectorXd m = rng.in_box(win.m_lo, win.m_hi, b, 100);
      for (int p = 0; p < cfg.n_base; ++p) {
        Eigen::VectorXd a1 = rng.in_box(win.a_lo, win.a_hi, b * 131 + p, 200);
        Eigen::VectorXd a2 = rng.in_box(win.a_lo, win.a_hi, b * 131 + p, 300);
        double nn = (a2 - a1).squaredNorm();
        if (nn < 1e-12) continue;
        double gap = model.h(t, x, m, a2) - model.h(t, x, m, a1) -
                     model.da_h(t, x, m, a1).dot(a2 - a1);
        double q = gap / nn;
        if (!std::isfinite(q)) {
          rep.pass = false;
          rep.notes.push_back("non-finite convexity probe");
          continue;
        }
        if (!lambda_seen || q < rep.empirical_lambda) rep.empirical_lambda = q;
        lambda_seen = true;
      }

      // state difference quotients
      Eigen::VectorXd x2 = rng.in_box(win.x_lo, win.x_hi, b, 400);
      double dx = (x2 - x).norm();
      if (dx > 1e-12) {
        rep.lip_drift = std::max(
            rep.lip_drift,
            (model.drift_free(t, x2, m) - model.drift_free(t, x, m)).norm() / dx);
      }
      for (int c = 0; c < model.d; ++c) {
        double u1 = x(c), u2 = x2(c);
        if (std::abs(u2 - u1) < 1e-12) continue;
        double q = (model.sigma_row(c, t, u2) - model.sigma_row(c, t, u1)).norm() /
                   std::abs(u2 - u1);
        rep.lip_sigma = std::max(rep.lip_sigma, q);
        if (model.d2 > 0) {
          q = (model.sigma0_row(c, t, u2) - model.sigma0_row(c, t, u1)).norm() /
              std::abs(u2 - u1);
          rep.lip_sigma = std::max(rep.lip_sigma, q);
        }
      }

      Eigen::VectorXd m2 = rng.in_box(win.m_lo, win.m_hi, b, 500);
      Eigen::VectorXd a = rng.in_box(win.a_lo, win.a_hi, b, 600);
      Eigen::VectorXd a2 = rng.in_box(win.a_lo, win.a_hi, b, 700);
      double joint = (x2 - x).norm() + (m2 - m).norm() + (a2 - a).norm();
      if (joint > 1e-12) {
        rep.lip_dx_h = std::max(rep.lip_dx_h,
                                (model.dx_h(t, x2, m2, a2) - model.dx_h(t, x, m, a)).norm() /
                                    joint);
        rep.lip_da_h = std::max(rep.lip_da_h,
                                (model.da_h(t, x2, m2, a2) - model.da_h(t, x, m, a)).norm() /
                                    joint);
      }
      double joint_g = (x2 - x).norm() + (m2 - m).norm();
      if (joint_g > 1e-12)
        rep.lip_dx_g = std::max(
            rep.lip_dx_g, (model.dx_g(x2, m2) - model.dx_g(x, m)).norm() / joint_g);

      const double K = model.constants.K;
      if (K > 0.0) {
        double denom = K * (1.0 + x.norm() + m.lpNorm<1>() + a.norm());
        rep.growth_dx_h = std::max(
            rep.growth_dx_h, model.dx_h(t, x, m, a).cwiseAbs().maxCoeff() / denom);
        rep.growth_dx_g =
            std::max(rep.growth_dx_g, model.dx_g(x, m).cwiseAbs().maxCoeff() / denom);
      }
    }

  if (!lambda_seen) {
    rep.notes.push_back("control window too small for convexity probes");
  } else if (rep.empirical_lambda < -cfg.tol) {
    rep.pass = false;
    rep.notes.push_back("running cost not convex in the control on probes");
  }
  if (!std::isfinite(rep.lip_drift + rep.lip_sigma + rep.lip_dx_h + rep.lip_da_h +
                     rep.lip_dx_g)) {
    rep.pass = false;
    rep.notes.push_back("non-finite difference quotient");
  }
  return rep;
}

}  // namespace submfg
