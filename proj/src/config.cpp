#include "submfg/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

namespace submfg {

using ojson = nlohmann::ordered_json;

ConfigError::ConfigError(std::string path_, const std::string& msg)
    : std::runtime_error((path_.empty() ? "config" : path_) + ": " + msg),
      path(std::move(path_)) {}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path, msg);
}

std::string item(const std::string& path, int i) {
  return path + "[" + std::to_string(i) + "]";
}

void expect_object(const ojson& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
}

void check_keys(const ojson& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  expect_object(obj, path);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

const ojson* opt_key(const ojson& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const ojson& req_key(const ojson& obj, const std::string& path, const char* key) {
  const ojson* v = opt_key(obj, key);
  if (!v) fail(path.empty() ? std::string(key) : path + "." + key,
               "missing required key");
  return *v;
}

double as_num(const ojson& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const ojson& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail(path, "expected an integer");
  return v.get<int>();
}

bool as_bool(const ojson& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::string as_str(const ojson& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

double req_num(const ojson& o, const std::string& p, const char* k) {
  return as_num(req_key(o, p, k), p + "." + k);
}
double num_or(const ojson& o, const std::string& p, const char* k, double def) {
  const ojson* v = opt_key(o, k);
  return v ? as_num(*v, p + "." + k) : def;
}
int req_int(const ojson& o, const std::string& p, const char* k) {
  return as_int(req_key(o, p, k), p + "." + k);
}
int int_or(const ojson& o, const std::string& p, const char* k, int def) {
  const ojson* v = opt_key(o, k);
  return v ? as_int(*v, p + "." + k) : def;
}
bool bool_or(const ojson& o, const std::string& p, const char* k, bool def) {
  const ojson* v = opt_key(o, k);
  return v ? as_bool(*v, p + "." + k) : def;
}
std::string req_str(const ojson& o, const std::string& p, const char* k) {
  return as_str(req_key(o, p, k), p + "." + k);
}
std::string str_or(const ojson& o, const std::string& p, const char* k,
                   const std::string& def) {
  const ojson* v = opt_key(o, k);
  return v ? as_str(*v, p + "." + k) : def;
}

/// Scalar entries may be numbers or the strings "inf" / "-inf".
double entry_num(const ojson& v, const std::string& path) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    fail(path, "expected a number or \"inf\"/\"-inf\"");
  }
  return as_num(v, path);
}

Eigen::VectorXd read_vector(const ojson& v, const std::string& path, int n) {
  if (v.is_number() || v.is_string())
    return Eigen::VectorXd::Constant(n, entry_num(v, path));
  if (!v.is_array()) fail(path, "expected a number or an array");
  if (static_cast<int>(v.size()) != n)
    fail(path, "expected " + std::to_string(n) + " entries, got " +
                   std::to_string(v.size()));
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = entry_num(v[i], item(path, i));
  return out;
}

Eigen::MatrixXd read_matrix(const ojson& v, const std::string& path, int rows,
                            int cols) {
  if (v.is_number()) {
    if (rows == 1 && cols == 1)
      return Eigen::MatrixXd::Constant(1, 1, v.get<double>());
    fail(path, "a bare number only describes a 1x1 matrix; expected " +
                   std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (v.is_object()) {
    check_keys(v, path, {"diag"});
    if (rows != cols) fail(path, "diag form needs a square matrix");
    Eigen::VectorXd d = read_vector(req_key(v, path, "diag"), path + ".diag", rows);
    return d.asDiagonal();
  }
  if (!v.is_array()) fail(path, "expected a matrix");
  if (!v.empty() && v[0].is_array()) {
    if (static_cast<int>(v.size()) != rows)
      fail(path, "expected " + std::to_string(rows) + " rows, got " +
                     std::to_string(v.size()));
    Eigen::MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i) {
      const ojson& row = v[i];
      if (!row.is_array() || static_cast<int>(row.size()) != cols)
        fail(item(path, i), "expected a row of " + std::to_string(cols) +
                                " numbers");
      for (int j = 0; j < cols; ++j)
        out(i, j) = as_num(row[j], item(item(path, i), j));
    }
    return out;
  }
  // flat array: only unambiguous for a single row or column
  if (rows == 1 || cols == 1) {
    Eigen::VectorXd flat = read_vector(v, path, rows * cols);
    Eigen::MatrixXd out(rows, cols);
    for (int i = 0; i < rows * cols; ++i)
      out(rows == 1 ? 0 : i, rows == 1 ? i : 0) = flat(i);
    return out;
  }
  fail(path, "expected an array of rows");
}

expr::Parsed parse_checked(const std::string& src, const std::string& path) {
  try {
    return expr::parse_expr(src);
  } catch (const expr::ParseError& e) {
    fail(path, std::string("bad expression: ") + e.what());
  }
}

void collect_x_indices(const expr::Node& n, std::set<int>& idx) {
  if (n.kind == expr::NodeKind::Var && n.var.family == expr::VarFamily::X)
    idx.insert(n.var.index);
  for (const expr::NodePtr* ch : {&n.a, &n.b, &n.c, &n.d})
    if (*ch) collect_x_indices(**ch, idx);
}

void require_usage(const expr::VarUsage& u, const std::string& path, int max_x,
                   int max_m, int max_a, bool allow_t, bool allow_y) {
  if (u.max_x > max_x)
    fail(path, "references x" + std::to_string(u.max_x) +
                   " but the state dimension is " + std::to_string(max_x));
  if (u.max_m > max_m)
    fail(path, "references m" + std::to_string(u.max_m) + " but there are " +
                   std::to_string(max_m) + " interaction summaries");
  if (u.max_a > max_a)
    fail(path, max_a == 0 ? "control variables are not valid here"
                          : "references a" + std::to_string(u.max_a) +
                                " but the control dimension is " +
                                std::to_string(max_a));
  if (!allow_t && u.uses_t) fail(path, "t is not valid here");
  if (!allow_y && u.max_y > 0)
    fail(path, "adjoint variables are not valid here");
}

PhiFn read_phi(const ojson& v, const std::string& path, int d) {
  check_keys(v, path, {"kind", "coord", "lo", "hi", "expr"});
  const std::string kind = req_str(v, path, "kind");
  auto coord = [&]() {
    int c = int_or(v, path, "coord", 1);
    if (c < 1 || c > d)
      fail(path + ".coord", "state coordinate out of range 1.." +
                                std::to_string(d));
    return c - 1;
  };
  if (kind == "coord") return PhiFn::coordinate(coord());
  if (kind == "clamp") {
    const double lo = num_or(v, path, "lo", -1.0);
    const double hi = num_or(v, path, "hi", 1.0);
    if (!(lo < hi)) fail(path, "clamp needs lo < hi");
    return PhiFn::clamp_coord(coord(), lo, hi);
  }
  if (kind == "tanh") return PhiFn::tanh_coord(coord());
  if (kind == "expression") {
    expr::Parsed p = parse_checked(req_str(v, path, "expr"), path + ".expr");
    require_usage(p.usage, path + ".expr", d, 0, 0, false, false);
    return PhiFn::from_expression(p.ast);
  }
  fail(path + ".kind", "expected coord, clamp, tanh, or expression");
}

std::pair<double, double> phi_default_bounds(const PhiFn& f) {
  switch (f.kind) {
    case PhiFn::Kind::Clamp: return {f.lo, f.hi};
    case PhiFn::Kind::Tanh: return {-1.0, 1.0};
    default: return {-kInf, kInf};
  }
}

std::vector<PhiFn> read_phi_list(const ojson& v, const std::string& path,
                                 int count, int d) {
  if (!v.is_array() || static_cast<int>(v.size()) != count)
    fail(path, "expected an array of " + std::to_string(count) +
                   " function descriptions");
  std::vector<PhiFn> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(read_phi(v[i], item(path, i), d));
  return out;
}

InitialLaw read_initial(const ojson& v, const std::string& path, int d) {
  check_keys(v, path, {"kind", "point", "mean", "stddev", "lo", "hi"});
  const std::string kind = req_str(v, path, "kind");
  if (kind == "dirac")
    return InitialLaw::dirac(read_vector(req_key(v, path, "point"),
                                         path + ".point", d));
  if (kind == "gaussian") {
    Eigen::VectorXd mean =
        read_vector(req_key(v, path, "mean"), path + ".mean", d);
    Eigen::VectorXd sd =
        read_vector(req_key(v, path, "stddev"), path + ".stddev", d);
    if ((sd.array() < 0).any()) fail(path + ".stddev", "must be nonnegative");
    return InitialLaw::gaussian(std::move(mean), std::move(sd));
  }
  if (kind == "uniform") {
    Eigen::VectorXd lo = read_vector(req_key(v, path, "lo"), path + ".lo", d);
    Eigen::VectorXd hi = read_vector(req_key(v, path, "hi"), path + ".hi", d);
    if ((lo.array() > hi.array()).any()) fail(path, "needs lo <= hi");
    return InitialLaw::uniform(std::move(lo), std::move(hi));
  }
  fail(path + ".kind", "expected dirac, gaussian, or uniform");
}

ControlBox read_box(const ojson* v, const std::string& path, int k) {
  if (!v) return ControlBox::unbounded(k);
  check_keys(*v, path, {"lower", "upper"});
  Eigen::VectorXd lo = read_vector(req_key(*v, path, "lower"), path + ".lower", k);
  Eigen::VectorXd hi = read_vector(req_key(*v, path, "upper"), path + ".upper", k);
  for (int i = 0; i < k; ++i)
    if (!(lo(i) <= hi(i))) fail(path, "needs lower <= upper in every entry");
  return ControlBox(std::move(lo), std::move(hi));
}

void apply_constants(const ojson* v, const std::string& path, ModelSpec& model) {
  if (!v) return;
  check_keys(*v, path, {"K", "kappa", "lambda"});
  model.constants.K = num_or(*v, path, "K", model.constants.K);
  model.constants.kappa = num_or(*v, path, "kappa", model.constants.kappa);
  model.constants.lambda = num_or(*v, path, "lambda", model.constants.lambda);
}

// ---------------------------------------------------------------------------
// Built-in quadratic families.

void read_lq_model(const ojson& m, const std::string& path, int variant,
                   const GridConfig& grid, RunConfig& cfg) {
  if (variant == 1)
    check_keys(m, path,
               {"family", "name", "d", "d1", "d2", "P", "Q", "R", "P_T", "Q_T",
                "b0", "bbar1", "b2", "sigma_p", "sigma_q", "sigma0_p",
                "sigma0_q", "phi", "phi_lo", "phi_hi", "box", "initial",
                "constants"});
  else
    check_keys(m, path,
               {"family", "name", "d", "k", "d1", "d2", "P", "Q", "R", "P_T",
                "Q_T", "b0", "bbar1", "b2", "b0_coupling", "sigma_p", "sigma_q",
                "sigma0_p", "sigma0_q", "phi", "phi_lo", "phi_hi", "psi",
                "psi_lo", "psi_hi", "box", "initial", "constants"});

  LQModelParams p;
  p.variant = variant;
  p.d = int_or(m, path, "d", 1);
  if (p.d < 1) fail(path + ".d", "state dimension must be at least 1");
  p.k = variant == 1 ? p.d : int_or(m, path, "k", p.d);
  if (p.k < 1) fail(path + ".k", "control dimension must be at least 1");
  p.d1 = int_or(m, path, "d1", p.d);
  p.d2 = int_or(m, path, "d2", 0);
  if (p.d1 < 1) fail(path + ".d1", "need at least one idiosyncratic noise");
  if (p.d2 < 0) fail(path + ".d2", "must be nonnegative");
  if (p.d1 != 1 && p.d1 != p.d)
    fail(path + ".d1", "diffusion rows load either one shared column or one "
                       "column per coordinate");
  if (p.d2 > 1 && p.d2 != p.d)
    fail(path + ".d2", "common-noise rows load either one shared column or "
                       "one column per coordinate");
  p.horizon = grid.horizon;
  p.name = str_or(m, path, "name", variant == 1 ? "lq-example-1" : "lq-example-2");

  const int d = p.d, k = p.k;
  auto mat_or = [&](const char* key, int r, int c,
                    const Eigen::MatrixXd& def) -> Eigen::MatrixXd {
    const ojson* v = opt_key(m, key);
    return v ? read_matrix(*v, path + "." + key, r, c) : def;
  };
  const Eigen::MatrixXd zero_dd = Eigen::MatrixXd::Zero(d, d);

  p.P = const_mat(mat_or("P", variant == 1 ? d : k, variant == 1 ? d : k,
                         Eigen::MatrixXd::Zero(variant == 1 ? d : k,
                                               variant == 1 ? d : k)));
  p.Q = const_mat(mat_or("Q", d, d, zero_dd));
  p.R = const_mat(mat_or("R", k, k, Eigen::MatrixXd::Identity(k, k)));
  p.P_T = mat_or("P_T", d, d, zero_dd);
  p.Q_T = mat_or("Q_T", d, d, zero_dd);

  {
    const ojson* v = opt_key(m, "b0");
    p.b0_const = v ? read_vector(*v, path + ".b0", d) : Eigen::VectorXd::Zero(d);
  }
  p.bbar1 = mat_or("bbar1", d, d, zero_dd);
  p.b2 = mat_or("b2", d, k, Eigen::MatrixXd::Identity(d, k));
  if (variant == 2) p.b0_coupling = mat_or("b0_coupling", d, d, zero_dd);

  auto vec_or = [&](const char* key, int n,
                    const Eigen::VectorXd& def) -> Eigen::VectorXd {
    const ojson* v = opt_key(m, key);
    return v ? read_vector(*v, path + "." + key, n) : def;
  };
  const Eigen::VectorXd zero_d = Eigen::VectorXd::Zero(d);
  p.sigma_p = vec_or("sigma_p", d, zero_d);
  p.sigma_q = vec_or("sigma_q", d, zero_d);
  p.sigma0_p = vec_or("sigma0_p", d, zero_d);
  p.sigma0_q = vec_or("sigma0_q", d, zero_d);

  {
    const ojson* v = opt_key(m, "phi");
    if (v) {
      p.phi = read_phi_list(*v, path + ".phi", d, d);
    } else {
      for (int i = 0; i < d; ++i) p.phi.push_back(PhiFn::coordinate(i));
    }
    Eigen::VectorXd lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      auto [l, h] = phi_default_bounds(p.phi[i]);
      lo(i) = l;
      hi(i) = h;
    }
    p.phi_lo = vec_or("phi_lo", d, lo);
    p.phi_hi = vec_or("phi_hi", d, hi);
  }
  if (variant == 2) {
    const ojson* v = opt_key(m, "psi");
    if (v) {
      p.psi = read_phi_list(*v, path + ".psi", k, d);
    } else {
      for (int i = 0; i < k; ++i) p.psi.push_back(PhiFn::coordinate(i % d));
    }
    Eigen::VectorXd lo(k), hi(k);
    for (int i = 0; i < k; ++i) {
      auto [l, h] = phi_default_bounds(p.psi[i]);
      lo(i) = l;
      hi(i) = h;
    }
    p.psi_lo = vec_or("psi_lo", k, lo);
    p.psi_hi = vec_or("psi_hi", k, hi);
  }
  p.phi_bounded_declared =
      p.phi_lo.allFinite() && p.phi_hi.allFinite() &&
      (variant == 1 || (p.psi_lo.allFinite() && p.psi_hi.allFinite()));

  p.box = read_box(opt_key(m, "box"), path + ".box", k);
  p.initial = read_initial(req_key(m, path, "initial"), path + ".initial", d);

  cfg.lq = p;
  cfg.lq_family = true;
  // Build without condition enforcement; the runner decides whether a
  // violation is the subject (check) or a hard error (compute commands).
  LqBuildOptions opts;
  opts.validate = false;
  cfg.model = build_lq_model(p, opts);
  apply_constants(opt_key(m, "constants"), path + ".constants", cfg.model);
}

// ---------------------------------------------------------------------------
// Expression-driven generic model.

InteractionSpec read_interaction(const ojson* v, const std::string& path, int d) {
  if (!v) return InteractionSpec::none();
  check_keys(*v, path, {"kind", "functions", "summary_lo", "summary_hi", "kernel"});
  const std::string kind = req_str(*v, path, "kind");
  if (kind == "none") return InteractionSpec::none();
  if (kind == "scalar") {
    const ojson& fns = req_key(*v, path, "functions");
    if (!fns.is_array() || fns.empty())
      fail(path + ".functions", "expected a nonempty array");
    std::vector<PhiFn> phi;
    for (int i = 0; i < static_cast<int>(fns.size()); ++i)
      phi.push_back(read_phi(fns[i], item(path + ".functions", i), d));
    const int J = static_cast<int>(phi.size());
    Eigen::VectorXd lo(J), hi(J);
    for (int i = 0; i < J; ++i) {
      auto [l, h] = phi_default_bounds(phi[i]);
      lo(i) = l;
      hi(i) = h;
    }
    const ojson* vlo = opt_key(*v, "summary_lo");
    const ojson* vhi = opt_key(*v, "summary_hi");
    if (vlo) lo = read_vector(*vlo, path + ".summary_lo", J);
    if (vhi) hi = read_vector(*vhi, path + ".summary_hi", J);
    return InteractionSpec::scalar(std::move(phi), std::move(lo), std::move(hi));
  }
  if (kind == "order1") {
    expr::Parsed ker =
        parse_checked(req_str(*v, path, "kernel"), path + ".kernel");
    if (ker.usage.max_a > 0 || ker.usage.uses_t)
      fail(path + ".kernel", "kernel depends only on the observer state (x) "
                             "and the integration state (y)");
    if (ker.usage.max_x > d || ker.usage.max_y > d)
      fail(path + ".kernel", "kernel variable index exceeds the state dimension");
    const double lo = num_or(*v, path, "summary_lo", -kInf);
    const double hi = num_or(*v, path, "summary_hi", kInf);
    return InteractionSpec::order1(ker.ast, lo, hi);
  }
  fail(path + ".kind", "expected none, scalar, or order1");
}

void read_expression_model(const ojson& m, const std::string& path,
                           RunConfig& cfg) {
  check_keys(m, path,
             {"family", "name", "regime", "d", "k", "d1", "d2", "drift_free",
              "b2", "sigma", "sigma0", "h", "g", "quad_control_diag",
              "interaction", "box", "initial", "constants"});

  ModelSpec model;
  model.name = str_or(m, path, "name", "expression");
  const std::string regime = req_str(m, path, "regime");
  if (regime == "separable")
    model.regime = Regime::Separable;
  else if (regime == "nonseparable")
    model.regime = Regime::Nonseparable;
  else
    fail(path + ".regime", "expected separable or nonseparable");

  const int d = int_or(m, path, "d", 1);
  const int k = int_or(m, path, "k", 1);
  const int d1 = int_or(m, path, "d1", 1);
  const int d2 = int_or(m, path, "d2", 0);
  if (d < 1) fail(path + ".d", "state dimension must be at least 1");
  if (k < 1) fail(path + ".k", "control dimension must be at least 1");
  if (d1 < 1) fail(path + ".d1", "need at least one idiosyncratic noise");
  if (d2 < 0) fail(path + ".d2", "must be nonnegative");
  model.d = d;
  model.k = k;
  model.d1 = d1;
  model.d2 = d2;

  model.interaction =
      read_interaction(opt_key(m, "interaction"), path + ".interaction", d);
  const int J = model.interaction.n_summaries();

  // drift_free entries: expressions in (t, x, m)
  const ojson& bf = req_key(m, path, "drift_free");
  if (!bf.is_array() || static_cast<int>(bf.size()) != d)
    fail(path + ".drift_free", "expected " + std::to_string(d) + " expressions");
  std::vector<expr::NodePtr> drift_ast(d);
  std::vector<std::vector<expr::NodePtr>> drift_jac(d,
                                                    std::vector<expr::NodePtr>(d));
  for (int i = 0; i < d; ++i) {
    const std::string sp = item(path + ".drift_free", i);
    expr::Parsed pe = parse_checked(as_str(bf[i], sp), sp);
    require_usage(pe.usage, sp, d, J, 0, true, false);
    drift_ast[i] = pe.ast;
    for (int j = 0; j < d; ++j)
      drift_jac[i][j] = expr::diff_expr(pe.ast, {expr::VarFamily::X, j});
  }
  model.drift_free = [drift_ast, d](double t, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& mm) {
    expr::EvalCtx ctx;
    ctx.t = t;
    ctx.x = x.data();
    ctx.dim_x = d;
    ctx.m = mm.data();
    ctx.dim_m = static_cast<int>(mm.size());
    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i) out(i) = expr::eval_expr(drift_ast[i], ctx);
    return out;
  };
  model.drift_jac_x = [drift_jac, d](double t, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& mm) {
    expr::EvalCtx ctx;
    ctx.t = t;
    ctx.x = x.data();
    ctx.dim_x = d;
    ctx.m = mm.data();
    ctx.dim_m = static_cast<int>(mm.size());
    Eigen::MatrixXd out(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out(i, j) = expr::eval_expr(drift_jac[i][j], ctx);
    return out;
  };

  {
    Eigen::MatrixXd B = read_matrix(req_key(m, path, "b2"), path + ".b2", d, k);
    model.b2 = const_mat(std::move(B));
  }

  // sigma rows: expressions in (t, x_i) only
  auto read_vol = [&](const char* key, int cols, bool required)
      -> std::vector<std::vector<expr::NodePtr>> {
    std::vector<std::vector<expr::NodePtr>> rows(
        d, std::vector<expr::NodePtr>(cols));
    const ojson* v = opt_key(m, key);
    if (!v) {
      if (required) fail(path + "." + key, "missing required key");
      for (auto& r : rows)
        for (auto& e : r) e = expr::make_const(0.0);
      return rows;
    }
    const std::string vp = path + "." + key;
    if (!v->is_array() || static_cast<int>(v->size()) != d)
      fail(vp, "expected " + std::to_string(d) + " rows");
    for (int i = 0; i < d; ++i) {
      const ojson& row = (*v)[i];
      const std::string rp = item(vp, i);
      if (!row.is_array() || static_cast<int>(row.size()) != cols)
        fail(rp, "expected " + std::to_string(cols) + " expressions");
      for (int j = 0; j < cols; ++j) {
        const std::string ep = item(rp, j);
        expr::Parsed pe = parse_checked(as_str(row[j], ep), ep);
        require_usage(pe.usage, ep, d, 0, 0, true, false);
        std::set<int> used;
        collect_x_indices(*pe.ast, used);
        for (int u : used)
          if (u != i)
            fail(ep, "volatility row " + std::to_string(i + 1) +
                         " may only read x" + std::to_string(i + 1));
        rows[i][j] = pe.ast;
      }
    }
    return rows;
  };
  auto sigma_rows = read_vol("sigma", d1, true);
  auto sigma0_rows = read_vol("sigma0", d2, d2 > 0);
  auto make_row_eval = [d](std::vector<std::vector<expr::NodePtr>> rows) {
    return [rows, d](int i, double t, double xi) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
      z(i) = xi;
      expr::EvalCtx ctx;
      ctx.t = t;
      ctx.x = z.data();
      ctx.dim_x = d;
      Eigen::RowVectorXd out(static_cast<int>(rows[i].size()));
      for (int j = 0; j < out.size(); ++j)
        out(j) = expr::eval_expr(rows[i][j], ctx);
      return out;
    };
  };
  model.sigma_row = make_row_eval(std::move(sigma_rows));
  model.sigma0_row = make_row_eval(std::move(sigma0_rows));

  // running and terminal costs with symbolic gradients
  expr::NodePtr h_ast, g_ast;
  {
    const std::string hp = path + ".h";
    expr::Parsed pe = parse_checked(req_str(m, path, "h"), hp);
    require_usage(pe.usage, hp, d, J, k, true, false);
    h_ast = pe.ast;
  }
  {
    const std::string gp = path + ".g";
    expr::Parsed pe = parse_checked(req_str(m, path, "g"), gp);
    require_usage(pe.usage, gp, d, J, 0, false, false);
    g_ast = pe.ast;
  }
  std::vector<expr::NodePtr> dxh(d), dah(k), dxg(d);
  for (int i = 0; i < d; ++i) dxh[i] = expr::diff_expr(h_ast, {expr::VarFamily::X, i});
  for (int i = 0; i < k; ++i) dah[i] = expr::diff_expr(h_ast, {expr::VarFamily::A, i});
  for (int i = 0; i < d; ++i) dxg[i] = expr::diff_expr(g_ast, {expr::VarFamily::X, i});

  auto ctx_xma = [d, k](double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& mm, const Eigen::VectorXd& a) {
    expr::EvalCtx ctx;
    ctx.t = t;
    ctx.x = x.data();
    ctx.dim_x = d;
    ctx.m = mm.data();
    ctx.dim_m = static_cast<int>(mm.size());
    ctx.a = a.data();
    ctx.dim_a = k;
    return ctx;
  };
  model.h = [h_ast, ctx_xma](double t, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& mm, const Eigen::VectorXd& a) {
    return expr::eval_expr(h_ast, ctx_xma(t, x, mm, a));
  };
  model.dx_h = [dxh, ctx_xma, d](double t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& mm,
                                 const Eigen::VectorXd& a) {
    auto ctx = ctx_xma(t, x, mm, a);
    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i) out(i) = expr::eval_expr(dxh[i], ctx);
    return out;
  };
  model.da_h = [dah, ctx_xma, k](double t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& mm,
                                 const Eigen::VectorXd& a) {
    auto ctx = ctx_xma(t, x, mm, a);
    Eigen::VectorXd out(k);
    for (int i = 0; i < k; ++i) out(i) = expr::eval_expr(dah[i], ctx);
    return out;
  };
  model.g = [g_ast, d](const Eigen::VectorXd& x, const Eigen::VectorXd& mm) {
    expr::EvalCtx ctx;
    ctx.x = x.data();
    ctx.dim_x = d;
    ctx.m = mm.data();
    ctx.dim_m = static_cast<int>(mm.size());
    return expr::eval_expr(g_ast, ctx);
  };
  model.dx_g = [dxg, d](const Eigen::VectorXd& x, const Eigen::VectorXd& mm) {
    expr::EvalCtx ctx;
    ctx.x = x.data();
    ctx.dim_x = d;
    ctx.m = mm.data();
    ctx.dim_m = static_cast<int>(mm.size());
    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i) out(i) = expr::eval_expr(dxg[i], ctx);
    return out;
  };

  model.box = read_box(opt_key(m, "box"), path + ".box", k);
  model.initial =
      read_initial(req_key(m, path, "initial"), path + ".initial", d);
  model.horizon = 0.0;  // stamped from the grid section by the caller

  const ojson* qd = opt_key(m, "quad_control_diag");
  if (qd) {
    const std::string qp = path + ".quad_control_diag";
    Eigen::VectorXd c = read_vector(*qd, qp, k);
    if ((c.array() <= 0).any()) fail(qp, "curvature entries must be positive");
    // the declared curvature must match the symbolic control gradient:
    // da_h(a) - da_h(0) = 2 c .* a for quadratic-diagonal costs
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(d, 0.3);
    const Eigen::VectorXd m0 = Eigen::VectorXd::Constant(J, 0.2);
    for (int probe = 0; probe < 8; ++probe) {
      Eigen::VectorXd a1(k);
      for (int i = 0; i < k; ++i)
        a1(i) = std::sin(1.7 * (probe + 1) * (i + 1));
      const double t = 0.1 * probe;
      Eigen::VectorXd lhs = model.da_h(t, x0, m0, a1) -
                            model.da_h(t, x0, m0, Eigen::VectorXd::Zero(k)) -
                            2.0 * c.cwiseProduct(a1);
      if (lhs.cwiseAbs().maxCoeff() > 1e-8)
        fail(qp, "declared curvature disagrees with the control gradient of h");
    }
    model.quad_control_diagonal = true;
    model.quad_control_diag = [c](double) { return c; };
  }

  apply_constants(opt_key(m, "constants"), path + ".constants", model);
  cfg.model = std::move(model);
  cfg.lq_family = false;
}

// ---------------------------------------------------------------------------
// Non-model sections.

GridConfig read_grid(const ojson& doc, const std::string& path) {
  const ojson& g = req_key(doc, "", "grid");
  check_keys(g, path, {"T", "n_steps"});
  GridConfig out;
  out.horizon = req_num(g, path, "T");
  if (!(out.horizon > 0)) fail(path + ".T", "horizon must be positive");
  out.n_steps = req_int(g, path, "n_steps");
  if (out.n_steps < 1) fail(path + ".n_steps", "need at least one step");
  return out;
}

EnsembleConfig read_ensemble(const ojson* v, const std::string& path) {
  EnsembleConfig out;
  if (!v) return out;
  check_keys(*v, path, {"n_outer", "n_inner", "seed"});
  out.n_outer = int_or(*v, path, "n_outer", out.n_outer);
  out.n_inner = int_or(*v, path, "n_inner", out.n_inner);
  if (out.n_outer < 1) fail(path + ".n_outer", "need at least one scenario");
  if (out.n_inner < 1) fail(path + ".n_inner", "need at least one particle");
  const ojson* s = opt_key(*v, "seed");
  if (s) {
    if (!s->is_number_integer() && !s->is_number_unsigned())
      fail(path + ".seed", "expected an integer");
    out.seed = s->get<std::uint64_t>();
  }
  return out;
}

SolverConfig read_solver(const ojson* v, const std::string& path) {
  SolverConfig out;
  if (!v) return out;
  check_keys(*v, path,
             {"basis_degree", "ridge", "picard_max_iters", "picard_tol",
              "damping", "estimate_z"});
  out.basis_degree = int_or(*v, path, "basis_degree", out.basis_degree);
  if (out.basis_degree < 1 || out.basis_degree > 4)
    fail(path + ".basis_degree", "supported range is 1..4");
  out.ridge = num_or(*v, path, "ridge", out.ridge);
  if (out.ridge < 0) fail(path + ".ridge", "must be nonnegative");
  out.picard_max_iters = int_or(*v, path, "picard_max_iters", out.picard_max_iters);
  if (out.picard_max_iters < 1) fail(path + ".picard_max_iters", "need at least 1");
  out.picard_tol = num_or(*v, path, "picard_tol", out.picard_tol);
  if (!(out.picard_tol > 0)) fail(path + ".picard_tol", "must be positive");
  out.damping = num_or(*v, path, "damping", out.damping);
  if (!(out.damping > 0) || out.damping > 1)
    fail(path + ".damping", "must lie in (0, 1]");
  out.estimate_z = bool_or(*v, path, "estimate_z", out.estimate_z);
  return out;
}

EquilibriumConfig read_equilibrium(const ojson* v, const std::string& path) {
  EquilibriumConfig out;
  if (!v) return out;
  check_keys(*v, path,
             {"direction", "tol_scale", "mono_tol_scale", "hard_flag_scale",
              "max_outer_iters", "bracket", "fp_max_rounds", "fp_tol_scale",
              "fp_mono_tol"});
  const std::string dir = str_or(*v, path, "direction", "minimal");
  if (dir == "minimal")
    out.direction = Direction::Minimal;
  else if (dir == "maximal")
    out.direction = Direction::Maximal;
  else
    fail(path + ".direction", "expected minimal or maximal");
  out.tol_scale = num_or(*v, path, "tol_scale", out.tol_scale);
  out.mono_tol_scale = num_or(*v, path, "mono_tol_scale", out.mono_tol_scale);
  out.hard_flag_scale = num_or(*v, path, "hard_flag_scale", out.hard_flag_scale);
  if (!(out.tol_scale > 0)) fail(path + ".tol_scale", "must be positive");
  out.max_outer_iters = int_or(*v, path, "max_outer_iters", out.max_outer_iters);
  if (out.max_outer_iters < 1) fail(path + ".max_outer_iters", "need at least 1");
  const std::string br = str_or(*v, path, "bracket", "extremal-drift");
  if (br != "extremal-drift")
    fail(path + ".bracket",
         "only extremal-drift is available from config; user brackets are "
         "library-level");
  out.fp_max_rounds = int_or(*v, path, "fp_max_rounds", out.fp_max_rounds);
  if (out.fp_max_rounds < 1) fail(path + ".fp_max_rounds", "need at least 1");
  out.fp_tol_scale = num_or(*v, path, "fp_tol_scale", out.fp_tol_scale);
  if (!(out.fp_tol_scale > 0)) fail(path + ".fp_tol_scale", "must be positive");
  out.fp_mono_tol = num_or(*v, path, "fp_mono_tol", out.fp_mono_tol);
  return out;
}

FlowConfig read_flow(const ojson* v, const std::string& path, int J,
                     FlowConfig::Kind default_kind) {
  FlowConfig out;
  out.kind = default_kind;
  out.values = Eigen::VectorXd::Zero(J);
  if (!v) return out;
  check_keys(*v, path, {"kind", "values"});
  const std::string kind = str_or(*v, path, "kind", "constant");
  if (kind == "constant")
    out.kind = FlowConfig::Kind::Constant;
  else if (kind == "lower-bracket")
    out.kind = FlowConfig::Kind::LowerBracket;
  else if (kind == "upper-bracket")
    out.kind = FlowConfig::Kind::UpperBracket;
  else
    fail(path + ".kind", "expected constant, lower-bracket, or upper-bracket");
  const ojson* vals = opt_key(*v, "values");
  if (vals) {
    if (out.kind != FlowConfig::Kind::Constant)
      fail(path + ".values", "values only apply to the constant kind");
    out.values = read_vector(*vals, path + ".values", J);
  }
  return out;
}

CompareConfig read_compare(const ojson* v, const std::string& path, int d, int J) {
  CompareConfig out;
  out.base.kind = FlowConfig::Kind::LowerBracket;
  out.shift = Eigen::VectorXd::Constant(d, 0.5);
  if (!v) return out;
  check_keys(*v, path, {"flow", "shift", "tol_scale"});
  out.base = read_flow(opt_key(*v, "flow"), path + ".flow", J,
                       FlowConfig::Kind::LowerBracket);
  if (out.base.kind == FlowConfig::Kind::Constant)
    fail(path + ".flow.kind",
         "the comparison base flow must carry particles; use lower-bracket "
         "or upper-bracket");
  const ojson* sh = opt_key(*v, "shift");
  if (sh) out.shift = read_vector(*sh, path + ".shift", d);
  if ((out.shift.array() < 0).any())
    fail(path + ".shift", "the shifted flow must dominate: entries must be "
                          "nonnegative");
  out.tol_scale = num_or(*v, path, "tol_scale", out.tol_scale);
  if (!(out.tol_scale > 0)) fail(path + ".tol_scale", "must be positive");
  return out;
}

BenchConfig read_bench(const ojson* v, const std::string& path,
                       const GridConfig& grid, const EnsembleConfig& ens) {
  BenchConfig out;
  out.refinements = {{grid.n_steps, ens.n_inner}};
  if (!v) return out;
  check_keys(*v, path, {"refinements", "max_rel_error", "require_improvement"});
  const ojson* r = opt_key(*v, "refinements");
  if (r) {
    if (!r->is_array() || r->empty())
      fail(path + ".refinements", "expected a nonempty array of [n_steps, "
                                  "n_inner] pairs");
    out.refinements.clear();
    for (int i = 0; i < static_cast<int>(r->size()); ++i) {
      const ojson& pair = (*r)[i];
      const std::string pp = item(path + ".refinements", i);
      if (!pair.is_array() || pair.size() != 2)
        fail(pp, "expected [n_steps, n_inner]");
      const int ns = as_int(pair[0], pp + "[0]");
      const int ni = as_int(pair[1], pp + "[1]");
      if (ns < 1 || ni < 1) fail(pp, "entries must be positive");
      out.refinements.emplace_back(ns, ni);
    }
  }
  out.max_rel_error = num_or(*v, path, "max_rel_error", out.max_rel_error);
  if (!(out.max_rel_error > 0)) fail(path + ".max_rel_error", "must be positive");
  out.require_improvement =
      bool_or(*v, path, "require_improvement", out.require_improvement);
  return out;
}

OutputConfig read_outputs(const ojson* v, const std::string& path) {
  OutputConfig out;
  if (!v) return out;
  check_keys(*v, path, {"directory", "bundles", "write_adjoint"});
  out.directory = str_or(*v, path, "directory", out.directory);
  if (out.directory.empty()) fail(path + ".directory", "must not be empty");
  const std::string b = str_or(*v, path, "bundles", "none");
  if (b == "none")
    out.bundles = OutputConfig::Bundles::None;
  else if (b == "csv")
    out.bundles = OutputConfig::Bundles::Csv;
  else if (b == "binary")
    out.bundles = OutputConfig::Bundles::Binary;
  else
    fail(path + ".bundles", "expected none, csv, or binary");
  out.write_adjoint = bool_or(*v, path, "write_adjoint", out.write_adjoint);
  return out;
}

}  // namespace

RunConfig load_config(const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    fail("", std::string("not valid JSON: ") + e.what());
  }
  expect_object(doc, "");
  check_keys(doc, "(top level)",
             {"model", "grid", "ensemble", "solver", "equilibrium", "flow",
              "compare", "bench", "outputs", "threads"});

  RunConfig cfg;
  cfg.grid = read_grid(doc, "grid");

  const ojson& m = req_key(doc, "", "model");
  expect_object(m, "model");
  const std::string family = req_str(m, "model", "family");
  if (family == "lq-example-1")
    read_lq_model(m, "model", 1, cfg.grid, cfg);
  else if (family == "lq-example-2")
    read_lq_model(m, "model", 2, cfg.grid, cfg);
  else if (family == "expression")
    read_expression_model(m, "model", cfg);
  else
    fail("model.family",
         "expected lq-example-1, lq-example-2, or expression");
  cfg.model.horizon = cfg.grid.horizon;
  if (cfg.lq_family) cfg.lq.horizon = cfg.grid.horizon;

  cfg.ensemble = read_ensemble(opt_key(doc, "ensemble"), "ensemble");
  cfg.solver = read_solver(opt_key(doc, "solver"), "solver");
  cfg.equilibrium = read_equilibrium(opt_key(doc, "equilibrium"), "equilibrium");
  const int J = cfg.model.n_summaries();
  cfg.flow = read_flow(opt_key(doc, "flow"), "flow", J, FlowConfig::Kind::Constant);
  cfg.compare = read_compare(opt_key(doc, "compare"), "compare", cfg.model.d, J);
  cfg.bench = read_bench(opt_key(doc, "bench"), "bench", cfg.grid, cfg.ensemble);
  cfg.outputs = read_outputs(opt_key(doc, "outputs"), "outputs");
  cfg.threads = int_or(doc, "(top level)", "threads", 1);
  if (cfg.threads < 0) fail("threads", "must be 0 (auto) or positive");

  try {
    cfg.model.check_wiring();
  } catch (const std::exception& e) {
    fail("model", std::string("incomplete model: ") + e.what());
  }
  cfg.snapshot = doc;
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("", "cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

NoisePlan make_plan(const RunConfig& cfg) {
  return NoisePlan(cfg.ensemble.seed, TimeGrid(cfg.grid.horizon, cfg.grid.n_steps),
                   cfg.ensemble.n_outer, cfg.ensemble.n_inner, cfg.model.d1,
                   cfg.model.d2, cfg.model.initial);
}

PicardSettings picard_settings(const RunConfig& cfg) {
  PicardSettings s;
  s.max_iters = cfg.solver.picard_max_iters;
  s.tol = cfg.solver.picard_tol;
  s.damping = cfg.solver.damping;
  s.basis.degree = cfg.solver.basis_degree;
  s.basis.ridge = cfg.solver.ridge;
  s.estimate_z = cfg.solver.estimate_z;
  s.threads = cfg.threads;
  return s;
}

EquilibriumSettings equilibrium_settings(const RunConfig& cfg) {
  EquilibriumSettings s;
  s.picard = picard_settings(cfg);
  s.max_outer_iters = cfg.equilibrium.max_outer_iters;
  s.tol_scale = cfg.equilibrium.tol_scale;
  s.mono_tol_scale = cfg.equilibrium.mono_tol_scale;
  s.hard_flag_scale = cfg.equilibrium.hard_flag_scale;
  s.bracket = cfg.equilibrium.bracket;
  return s;
}

FictitiousPlaySettings fictitious_play_settings(const RunConfig& cfg) {
  FictitiousPlaySettings s;
  s.picard = picard_settings(cfg);
  s.max_rounds = cfg.equilibrium.fp_max_rounds;
  s.tol_scale = cfg.equilibrium.fp_tol_scale;
  s.mono_tol = cfg.equilibrium.fp_mono_tol;
  s.bracket = cfg.equilibrium.bracket;
  return s;
}

}  // namespace submfg
