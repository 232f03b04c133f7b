#include "submfg/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace submfg {

ControlBox::ControlBox(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size())
    throw std::invalid_argument("ControlBox: bound size mismatch");
  for (int i = 0; i < lower.size(); ++i)
    if (lower[i] > upper[i])
      throw std::invalid_argument("ControlBox: lower bound above upper at coordinate " +
                                  std::to_string(i + 1));
}

ControlBox ControlBox::unbounded(int k) {
  double inf = std::numeric_limits<double>::infinity();
  return ControlBox(Eigen::VectorXd::Constant(k, -inf),
                    Eigen::VectorXd::Constant(k, inf));
}

ControlBox ControlBox::cube(int k, double lo, double hi) {
  return ControlBox(Eigen::VectorXd::Constant(k, lo), Eigen::VectorXd::Constant(k, hi));
}

bool ControlBox::is_compact() const {
  for (int i = 0; i < lower.size(); ++i)
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) return false;
  return true;
}

Eigen::VectorXd ControlBox::project(const Eigen::VectorXd& a) const {
  return a.cwiseMax(lower).cwiseMin(upper);
}

bool ControlBox::contains(const Eigen::VectorXd& a, double tol) const {
  for (int i = 0; i < a.size(); ++i)
    if (a[i] < lower[i] - tol || a[i] > upper[i] + tol) return false;
  return true;
}

Eigen::VectorXd ControlBox::clipped_lower(double big) const {
  return lower.cwiseMax(Eigen::VectorXd::Constant(lower.size(), -big));
}

Eigen::VectorXd ControlBox::clipped_upper(double big) const {
  return upper.cwiseMin(Eigen::VectorXd::Constant(upper.size(), big));
}

PhiFn PhiFn::coordinate(int c) {
  PhiFn f;
  f.kind = Kind::Coord;
  f.coord = c;
  return f;
}

PhiFn PhiFn::clamp_coord(int c, double lo, double hi) {
  PhiFn f;
  f.kind = Kind::Clamp;
  f.coord = c;
  f.lo = lo;
  f.hi = hi;
  return f;
}

PhiFn PhiFn::tanh_coord(int c) {
  PhiFn f;
  f.kind = Kind::Tanh;
  f.coord = c;
  return f;
}

PhiFn PhiFn::from_expression(expr::NodePtr e) {
  PhiFn f;
  f.kind = Kind::Expression;
  f.expression = std::move(e);
  return f;
}

double PhiFn::eval(const Eigen::VectorXd& x) const {
  switch (kind) {
    case Kind::Coord: return x[coord];
    case Kind::Clamp: return std::min(std::max(x[coord], lo), hi);
    case Kind::Tanh: return std::tanh(x[coord]);
    case Kind::Expression: {
      expr::EvalCtx ctx;
      ctx.x = x.data();
      ctx.dim_x = static_cast<int>(x.size());
      return expr::eval_expr(expression, ctx);
    }
  }
  throw std::logic_error("PhiFn: corrupt kind");
}

InteractionSpec InteractionSpec::none() { return InteractionSpec{}; }

InteractionSpec InteractionSpec::scalar(std::vector<PhiFn> fns, Eigen::VectorXd lo,
                                        Eigen::VectorXd hi) {
  if (static_cast<int>(fns.size()) != lo.size() || lo.size() != hi.size())
    throw std::invalid_argument("InteractionSpec: summary range size mismatch");
  InteractionSpec s;
  s.kind = Kind::ScalarFunctionals;
  s.functions = std::move(fns);
  s.summary_lo = std::move(lo);
  s.summary_hi = std::move(hi);
  return s;
}

InteractionSpec InteractionSpec::order1(expr::NodePtr kernel, double lo, double hi) {
  InteractionSpec s;
  s.kind = Kind::Order1Kernel;
  s.kernel = std::move(kernel);
  s.summary_lo = Eigen::VectorXd::Constant(1, lo);
  s.summary_hi = Eigen::VectorXd::Constant(1, hi);
  return s;
}

int InteractionSpec::n_summaries() const {
  switch (kind) {
    case Kind::None: return 0;
    case Kind::ScalarFunctionals: return static_cast<int>(functions.size());
    case Kind::Order1Kernel: return 1;
  }
  return 0;
}

Eigen::VectorXd ModelSpec::summary_lo() const {
  return interaction.kind == InteractionSpec::Kind::None ? Eigen::VectorXd(0)
                                                         : interaction.summary_lo;
}

Eigen::VectorXd ModelSpec::summary_hi() const {
  return interaction.kind == InteractionSpec::Kind::None ? Eigen::VectorXd(0)
                                                         : interaction.summary_hi;
}

Eigen::MatrixXd ModelSpec::sigma(double t, const Vec& x) const {
  Eigen::MatrixXd s(d, d1);
  for (int i = 0; i < d; ++i) s.row(i) = sigma_row(i, t, x[i]);
  return s;
}

Eigen::MatrixXd ModelSpec::sigma0(double t, const Vec& x) const {
  Eigen::MatrixXd s(d, d2);
  if (d2 == 0) return s;
  for (int i = 0; i < d; ++i) s.row(i) = sigma0_row(i, t, x[i]);
  return s;
}

void ModelSpec::check_wiring() const {
  if (!drift_free || !b2 || !drift_jac_x || !h || !g || !dx_h || !da_h || !dx_g)
    throw std::invalid_argument("ModelSpec '" + name + "': missing evaluator");
  if (d1 > 0 && !sigma_row)
    throw std::invalid_argument("ModelSpec '" + name + "': missing sigma_row");
  if (d2 > 0 && !sigma0_row)
    throw std::invalid_argument("ModelSpec '" + name + "': missing sigma0_row");
  if (box.dim() != k)
    throw std::invalid_argument("ModelSpec '" + name + "': control box dim != k");
  if (initial.dim() != d)
    throw std::invalid_argument("ModelSpec '" + name + "': initial law dim != d");
  if (quad_control_diagonal && !quad_control_diag)
    throw std::invalid_argument("ModelSpec '" + name +
                                "': quadratic-control hint without curvature handle");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_summaries());
  Eigen::VectorXd a = box.project(Eigen::VectorXd::Zero(k));
  double t0 = 0.0;
  if (drift_free(t0, x, m).size() != d)
    throw std::invalid_argument("ModelSpec '" + name + "': drift_free dim != d");
  if (b2(t0).rows() != d || b2(t0).cols() != k)
    throw std::invalid_argument("ModelSpec '" + name + "': b2 must be d x k");
  if (dx_h(t0, x, m, a).size() != d || da_h(t0, x, m, a).size() != k ||
      dx_g(x, m).size() != d)
    throw std::invalid_argument("ModelSpec '" + name + "': cost gradient dims wrong");
}

LqConditionError::LqConditionError(LqBuildReport r)
    : std::runtime_error("quadratic family conditions violated (" +
                         std::to_string(r.violations.size()) + " finding(s), first: " +
                         (r.violations.empty() ? std::string("none")
                                               : r.violations.front().condition) + ")"),
      report(std::move(r)) {}

std::function<Eigen::MatrixXd(double)> const_mat(Eigen::MatrixXd m) {
  return [m = std::move(m)](double) { return m; };
}

}  // namespace submfg
