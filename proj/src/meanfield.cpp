#include "submfg/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace submfg {

ConditionalLawFlow::ConditionalLawFlow(TimeGrid grid, int n_outer, int dim,
                                       std::uint64_t fingerprint, std::string provenance)
    : grid_(grid), n_outer_(n_outer), dim_(dim), fingerprint_(fingerprint),
      provenance_(std::move(provenance)) {
  if (n_outer < 1 || dim < 1)
    throw std::invalid_argument("ConditionalLawFlow: bad shape");
  clouds_.resize(static_cast<std::size_t>(n_outer) * grid_.n_points());
}

ConditionalLawFlow conditional_empirical_law(const PathBundle& b) {
  ConditionalLawFlow flow(b.grid(), b.n_outer(), b.dim(), b.plan_fingerprint(),
                          "conditional-empirical");
  int np = b.grid().n_points();
  double w = 1.0 / b.n_inner();
  for (int o = 0; o < b.n_outer(); ++o)
    for (int k = 0; k < np; ++k) {
      Cloud& c = flow.cloud(o, k);
      c.points.resize(b.n_inner(), b.dim());
      c.weights = Eigen::VectorXd::Constant(b.n_inner(), w);
      for (int i = 0; i < b.n_inner(); ++i) c.points.row(i) = b.state(o, i, k);
    }
  return flow;
}

MeasureSummary summaries(const Cloud& c, const InteractionSpec& spec,
                         const Eigen::VectorXd* at_x) {
  if (c.size() == 0) throw std::invalid_argument("summaries: empty cloud");
  MeasureSummary s;
  int d = c.dim();
  s.mean = Eigen::VectorXd::Zero(d);
  s.second = Eigen::VectorXd::Zero(d);
  s.norm1 = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    Eigen::VectorXd p = c.points.row(i).transpose();
    double w = c.weights[i];
    s.mean += w * p;
    s.second += w * p.cwiseProduct(p);
    s.norm1 += w * p.cwiseAbs().sum();
  }
  switch (spec.kind) {
    case InteractionSpec::Kind::None:
      s.m.resize(0);
      break;
    case InteractionSpec::Kind::ScalarFunctionals: {
      int J = spec.n_summaries();
      s.m = Eigen::VectorXd::Zero(J);
      for (int i = 0; i < c.size(); ++i) {
        Eigen::VectorXd p = c.points.row(i).transpose();
        double w = c.weights[i];
        for (int j = 0; j < J; ++j) s.m[j] += w * spec.functions[j].eval(p);
      }
      break;
    }
    case InteractionSpec::Kind::Order1Kernel: {
      if (!at_x)
        throw std::invalid_argument(
            "summaries: order-1 kernel needs the evaluation state");
      s.m = Eigen::VectorXd::Zero(1);
      expr::EvalCtx ctx;
      ctx.x = at_x->data();
      ctx.dim_x = static_cast<int>(at_x->size());
      for (int i = 0; i < c.size(); ++i) {
        Eigen::VectorXd p = c.points.row(i).transpose();
        ctx.y = p.data();
        ctx.dim_y = d;
        s.m[0] += c.weights[i] * expr::eval_expr(spec.kernel, ctx);
      }
      break;
    }
  }
  return s;
}

ConditionalLawFlow mix_flows(const std::vector<const ConditionalLawFlow*>& flows,
                             const Eigen::VectorXd& weights) {
  if (flows.empty() || static_cast<int>(flows.size()) != weights.size())
    throw std::invalid_argument("mix_flows: need one weight per flow");
  if ((weights.array() < 0).any())
    throw std::invalid_argument("mix_flows: weights must be nonnegative");
  double total = weights.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("mix_flows: weights must sum to 1");
  const ConditionalLawFlow& f0 = *flows[0];
  for (const auto* f : flows) {
    if (!(f->grid() == f0.grid()) || f->n_outer() != f0.n_outer() ||
        f->dim() != f0.dim())
      throw std::invalid_argument("mix_flows: flow shapes differ");
    if (f->plan_fingerprint() != f0.plan_fingerprint())
      throw std::invalid_argument("mix_flows: flows come from different noise plans");
  }
  ConditionalLawFlow out(f0.grid(), f0.n_outer(), f0.dim(), f0.plan_fingerprint(),
                         "mixture(" + std::to_string(flows.size()) + ")");
  int np = f0.grid().n_points();
  for (int o = 0; o < f0.n_outer(); ++o)
    for (int k = 0; k < np; ++k) {
      int n_total = 0;
      for (const auto* f : flows) n_total += f->cloud(o, k).size();
      Cloud& c = out.cloud(o, k);
      c.points.resize(n_total, f0.dim());
      c.weights.resize(n_total);
      int at = 0;
      for (int fi = 0; fi < static_cast<int>(flows.size()); ++fi) {
        const Cloud& src = flows[fi]->cloud(o, k);
        for (int i = 0; i < src.size(); ++i) {
          c.points.row(at) = src.points.row(i);
          c.weights[at] = weights[fi] * src.weights[i];
          ++at;
        }
      }
    }
  return out;
}

SummaryTable::SummaryTable(const ConditionalLawFlow& flow, const InteractionSpec& spec)
    : grid_(flow.grid()), n_outer_(flow.n_outer()), n_summaries_(spec.n_summaries()) {
  if (spec.kind == InteractionSpec::Kind::Order1Kernel) {
    order1_ = true;
    flow_ = &flow;
    spec_ = &spec;
    return;
  }
  int np = grid_.n_points();
  values_.resize(static_cast<std::size_t>(n_outer_) * np);
  for (int o = 0; o < n_outer_; ++o)
    for (int k = 0; k < np; ++k)
      values_[o * np + k] = summaries(flow.cloud(o, k), spec).m;
}

SummaryTable::SummaryTable(TimeGrid grid, int n_outer, std::vector<Eigen::VectorXd> values)
    : grid_(grid), n_outer_(n_outer), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(n_outer) * grid.n_points())
    throw std::invalid_argument("SummaryTable: value count does not match shape");
  n_summaries_ = values_.empty() ? 0 : static_cast<int>(values_[0].size());
}

Eigen::VectorXd SummaryTable::eval(int outer, int step, const Eigen::VectorXd& x) const {
  if (!order1_) return values_[outer * grid_.n_points() + step];
  return summaries(flow_->cloud(outer, step), *spec_, &x).m;
}

const Eigen::VectorXd& SummaryTable::cached(int outer, int step) const {
  if (order1_)
    throw std::logic_error("SummaryTable: order-1 kernels have no cached summaries");
  return values_[outer * grid_.n_points() + step];
}

DominanceReport check_dominance_pathwise(const PathBundle& a, const PathBundle& b,
                                         double tolerance) {
  if (!a.same_shape(b))
    throw std::invalid_argument("check_dominance_pathwise: shapes differ");
  if (a.plan_fingerprint() != b.plan_fingerprint())
    throw std::invalid_argument(
        "check_dominance_pathwise: bundles come from different noise plans");
  DominanceReport rep;
  rep.tolerance = tolerance;
  int np = a.grid().n_points();
  double acc = 0.0;
  for (int o = 0; o < a.n_outer(); ++o)
    for (int i = 0; i < a.n_inner(); ++i)
      for (int k = 0; k < np; ++k) {
        double pos_mean = 0.0;
        for (int c = 0; c < a.dim(); ++c) {
          double gap = a.at(o, i, k, c) - b.at(o, i, k, c);
          if (gap > 0) {
            pos_mean += gap;
            if (gap > rep.max_pointwise) {
              rep.max_pointwise = gap;
              rep.outer = o;
              rep.inner = i;
              rep.step = k;
              rep.comp = c;
            }
          }
        }
        acc += a.grid().quad_weight(k) * pos_mean / a.dim();
      }
  rep.violation = acc / a.n_paths();
  rep.pass = rep.violation <= tolerance;
  return rep;
}

namespace {

struct WeightedPoint {
  double v, w;
};

std::vector<WeightedPoint> sorted_coordinate(const Cloud& c, int coord) {
  std::vector<WeightedPoint> pts(c.size());
  for (int i = 0; i < c.size(); ++i)
    pts[i] = {c.points(i, coord), c.weights[i]};
  std::sort(pts.begin(), pts.end(),
            [](const WeightedPoint& a, const WeightedPoint& b) { return a.v < b.v; });
  return pts;
}

}  // namespace

CdfOrderReport check_dominance_1d_cdf(const Cloud& a, const Cloud& b, double tol) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("check_dominance_1d_cdf: dimension mismatch");
  CdfOrderReport rep;
  rep.per_coordinate.resize(a.dim());
  bool all_a_below = true, all_b_below = true;
  for (int c = 0; c < a.dim(); ++c) {
    auto pa = sorted_coordinate(a, c);
    auto pb = sorted_coordinate(b, c);
    // Evaluate both CDFs at every support point of either cloud.
    std::vector<double> support;
    support.reserve(pa.size() + pb.size());
    for (const auto& p : pa) support.push_back(p.v);
    for (const auto& p : pb) support.push_back(p.v);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    bool a_below = true, b_below = true;  // a_below: F_a >= F_b everywhere
    double gap = 0.0;
    std::size_t ia = 0, ib = 0;
    double Fa = 0.0, Fb = 0.0;
    for (double s : support) {
      while (ia < pa.size() && pa[ia].v <= s) Fa += pa[ia++].w;
      while (ib < pb.size() && pb[ib].v <= s) Fb += pb[ib++].w;
      gap = std::max(gap, std::abs(Fa - Fb));
      if (Fa < Fb - tol) a_below = false;
      if (Fb < Fa - tol) b_below = false;
    }
    rep.max_cdf_gap = std::max(rep.max_cdf_gap, gap);
    StochOrder v;
    if (gap <= tol) v = StochOrder::Equal;
    else if (a_below) v = StochOrder::FirstBelow;
    else if (b_below) v = StochOrder::SecondBelow;
    else v = StochOrder::Incomparable;
    rep.per_coordinate[c] = v;
    if (!a_below) all_a_below = false;
    if (!b_below) all_b_below = false;
  }
  if (rep.max_cdf_gap <= tol) rep.overall = StochOrder::Equal;
  else if (all_a_below) rep.overall = StochOrder::FirstBelow;
  else if (all_b_below) rep.overall = StochOrder::SecondBelow;
  else rep.overall = StochOrder::Incomparable;
  return rep;
}

double wasserstein2_empirical_1d(const Eigen::VectorXd& values_a,
                                 const Eigen::VectorXd& weights_a,
                                 const Eigen::VectorXd& values_b,
                                 const Eigen::VectorXd& weights_b) {
  if (values_a.size() != weights_a.size() || values_b.size() != weights_b.size())
    throw std::invalid_argument("wasserstein2_empirical_1d: value/weight mismatch");
  if (values_a.size() == 0 || values_b.size() == 0)
    throw std::invalid_argument("wasserstein2_empirical_1d: empty sample");
  auto build = [](const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
    std::vector<WeightedPoint> pts(v.size());
    double total = w.sum();
    for (int i = 0; i < v.size(); ++i) pts[i] = {v[i], w[i] / total};
    std::sort(pts.begin(), pts.end(),
              [](const WeightedPoint& a, const WeightedPoint& b) { return a.v < b.v; });
    return pts;
  };
  auto pa = build(values_a, weights_a);
  auto pb = build(values_b, weights_b);
  // Walk the shared quantile axis; each segment couples one a-atom piece with
  // one b-atom piece.
  std::size_t ia = 0, ib = 0;
  double ra = pa[0].w, rb = pb[0].w;
  double acc = 0.0;
  while (ia < pa.size() && ib < pb.size()) {
    double seg = std::min(ra, rb);
    double diff = pa[ia].v - pb[ib].v;
    acc += seg * diff * diff;
    ra -= seg;
    rb -= seg;
    if (ra <= 1e-15) {
      ++ia;
      if (ia < pa.size()) ra = pa[ia].w;
    }
    if (rb <= 1e-15) {
      ++ib;
      if (ib < pb.size()) rb = pb[ib].w;
    }
  }
  return std::sqrt(acc);
}

double flow_w2_at_step(const ConditionalLawFlow& a, const ConditionalLawFlow& b,
                       int step) {
  if (a.n_outer() != b.n_outer() || a.dim() != b.dim())
    throw std::invalid_argument("flow_w2_at_step: shape mismatch");
  double acc = 0.0;
  for (int o = 0; o < a.n_outer(); ++o) {
    const Cloud& ca = a.cloud(o, step);
    const Cloud& cb = b.cloud(o, step);
    double per_coord = 0.0;
    for (int c = 0; c < a.dim(); ++c)
      per_coord += wasserstein2_empirical_1d(ca.points.col(c), ca.weights,
                                             cb.points.col(c), cb.weights);
    acc += per_coord / a.dim();
  }
  return acc / a.n_outer();
}

double bundle_w2_at_step(const PathBundle& a, const PathBundle& b, int step) {
  if (a.n_outer() != b.n_outer() || a.dim() != b.dim())
    throw std::invalid_argument("bundle_w2_at_step: shape mismatch");
  Eigen::VectorXd wa = Eigen::VectorXd::Constant(a.n_inner(), 1.0 / a.n_inner());
  Eigen::VectorXd wb = Eigen::VectorXd::Constant(b.n_inner(), 1.0 / b.n_inner());
  double acc = 0.0;
  for (int o = 0; o < a.n_outer(); ++o) {
    double per_coord = 0.0;
    for (int c = 0; c < a.dim(); ++c) {
      Eigen::VectorXd va(a.n_inner()), vb(b.n_inner());
      for (int i = 0; i < a.n_inner(); ++i) va[i] = a.at(o, i, step, c);
      for (int i = 0; i < b.n_inner(); ++i) vb[i] = b.at(o, i, step, c);
      per_coord += wasserstein2_empirical_1d(va, wa, vb, wb);
    }
    acc += per_coord / a.dim();
  }
  return acc / a.n_outer();
}

}  // namespace submfg
