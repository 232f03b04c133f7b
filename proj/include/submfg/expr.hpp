#pragma once

// Small expression language for time/state/control/measure-summary coefficient
// functions.  Variables: t, x1..xd, a1..ak, m1..mJ, y1..yd.  Operators follow
// the usual precedence with ^ binding tightest, then unary minus, then * /,
// then + -.  ^ takes an integer literal exponent.  Functions: exp, tanh, abs,
// min, max, clamp, and sel(a,b,p,q) which evaluates to p when a <= b and to q
// otherwise.  sel is what differentiation of the kinked primitives produces
// (left branch wins at ties), so printed derivatives re-parse to themselves.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace submfg::expr {

enum class VarFamily { T, X, A, M, Y };

struct VarRef {
  VarFamily family;
  int index;  // 0-based; always 0 for t
};

std::string var_name(VarRef v);

enum class NodeKind {
  Const, Var, Neg, Exp, Tanh, Abs,
  Add, Sub, Mul, Div, Pow, Min, Max, Clamp, Sel
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::Const;
  double value = 0.0;          // Const
  VarRef var{VarFamily::T, 0}; // Var
  int ipow = 0;                // Pow exponent
  NodePtr a, b, c, d;          // children (arity by kind)
};

NodePtr make_const(double v);
NodePtr make_var(VarFamily f, int index);

struct ParseError : std::runtime_error {
  int line, col;  // 1-based
  ParseError(std::string msg, int line_, int col_);
};

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Highest variable index used per family, 0 when a family is absent.
/// E.g. parsing "x1 + x3*a1" gives max_x = 3, max_a = 1.
struct VarUsage {
  int max_x = 0, max_a = 0, max_m = 0, max_y = 0;
  bool uses_t = false;
};

struct Parsed {
  NodePtr ast;
  VarUsage usage;
};

/// Parse source text.  Throws ParseError with 1-based line/col on bad input.
Parsed parse_expr(const std::string& src);

/// Evaluation context; null pointers mean the family is unavailable and any
/// reference to it throws EvalError.
struct EvalCtx {
  double t = 0.0;
  const double* x = nullptr; int dim_x = 0;
  const double* a = nullptr; int dim_a = 0;
  const double* m = nullptr; int dim_m = 0;
  const double* y = nullptr; int dim_y = 0;
};

double eval_expr(const Node& n, const EvalCtx& ctx);
inline double eval_expr(const NodePtr& n, const EvalCtx& ctx) { return eval_expr(*n, ctx); }

/// Symbolic partial derivative with light constant folding.  Kinked
/// primitives (abs/min/max/clamp) become sel() branches, left branch at ties.
NodePtr diff_expr(const NodePtr& n, VarRef wrt);

/// True when the tree contains abs/min/max/clamp/sel, i.e. evaluation can sit
/// on a kink of the original expression.
bool has_kinks(const Node& n);
inline bool has_kinks(const NodePtr& n) { return has_kinks(*n); }

/// Print with minimal parentheses; parse_expr(print_expr(e)) is structurally
/// equal to e.
std::string print_expr(const Node& n);
inline std::string print_expr(const NodePtr& n) { return print_expr(*n); }

bool structurally_equal(const Node& a, const Node& b);
inline bool structurally_equal(const NodePtr& a, const NodePtr& b) {
  return structurally_equal(*a, *b);
}

}  // namespace submfg::expr
