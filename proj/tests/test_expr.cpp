#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "submfg/expr.hpp"

using namespace submfg::expr;

namespace {

// shared evaluation point for the corpus
const double kX[] = {1.5, -2.0, 0.25};
const double kA[] = {0.5, -1.0};
const double kM[] = {2.0, 3.0};
const double kY[] = {-0.5, 1.0, 2.0};

EvalCtx corpus_ctx() {
  EvalCtx ctx;
  ctx.t = 0.5;
  ctx.x = kX;
  ctx.dim_x = 3;
  ctx.a = kA;
  ctx.dim_a = 2;
  ctx.m = kM;
  ctx.dim_m = 2;
  ctx.y = kY;
  ctx.dim_y = 3;
  return ctx;
}

double eval_src(const std::string& src) {
  return eval_expr(parse_expr(src).ast, corpus_ctx());
}

struct EvalCase {
  const char* src;
  double expected;
};

struct ErrorCase {
  const char* src;
  int line, col;
};

}  // namespace

TEST_CASE("evaluation corpus: literals, precedence, functions") {
  const EvalCase cases[] = {
      {"1+2", 3.0},
      {"2*3+4", 10.0},
      {"2+3*4", 14.0},
      {"2*(3+4)", 14.0},
      {"10-4-3", 3.0},
      {"12/4/3", 1.0},
      {"3-2+1", 2.0},
      {"1/2", 0.5},
      {"2^3", 8.0},
      {"-2^2", -4.0},
      {"(-2)^2", 4.0},
      {"2^3*2", 16.0},
      {"2^-1", 0.5},
      {"0.5e1 + 1e-1", 5.1},
      {".25*4", 1.0},
      {"((((42))))", 42.0},
      {"  1 +\t2 ", 3.0},
      {"-(-2)", 2.0},
      {"t", 0.5},
      {"-x1", -1.5},
      {"x1+x2", -0.5},
      {"x3*4", 1.0},
      {"a1*a2", -0.5},
      {"m1+m2", 5.0},
      {"y1", -0.5},
      {"x1*x2*x3", -0.75},
      {"2*x1^2", 4.5},
      {"x1^2+x2^2", 6.25},
      {"x1^3", 3.375},
      {"(x1-1)^2", 0.25},
      {"-x1^2", -2.25},
      {"-(x1+x2)", 0.5},
      {"m1*a1 - y2/2", 0.5},
      {"abs(x2)", 2.0},
      {"abs(-3)", 3.0},
      {"abs(x1-2*x2)", 5.5},
      {"exp(0)", 1.0},
      {"exp(1)", 2.718281828459045},
      {"exp(-x1*x1)", std::exp(-2.25)},
      {"tanh(0)", 0.0},
      {"tanh(100)", 1.0},
      {"tanh(x1)+tanh(x2)", std::tanh(1.5) + std::tanh(-2.0)},
      {"min(2,3)", 2.0},
      {"min(3,-4)", -4.0},
      {"max(2,3)", 3.0},
      {"max(-2,-3)", -2.0},
      {"min(x1, max(x2, x3))", 0.25},
      {"clamp(5,-1,1)", 1.0},
      {"clamp(-5,-1,1)", -1.0},
      {"clamp(0.3,-1,1)", 0.3},
      {"clamp(x1, -1, 1)", 1.0},
      {"sel(1,2,10,20)", 10.0},
      {"sel(2,2,10,20)", 10.0},
      {"sel(3,2,10,20)", 20.0},
      {"sel(x1, x2, 1, 0)", 0.0},
      {"sel(x2, x1, m1, m2)", 2.0},
      {"1+1+1+1+1+1+1+1+1+1+1+1+1+1+1+1+1+1+1+1", 20.0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.src);
    CHECK(eval_src(c.src) == doctest::Approx(c.expected).epsilon(1e-14));
  }
}

TEST_CASE("parse errors carry 1-based positions") {
  const ErrorCase cases[] = {
      {"", 1, 1},
      {"1+", 1, 3},
      {"(1+2", 1, 5},
      {"1 + * 2", 1, 5},
      {"1 2", 1, 3},
      {"x0", 1, 1},
      {"x", 1, 1},
      {"z1", 1, 1},
      {"foo(1)", 1, 1},
      {"min(1)", 1, 6},
      {"clamp(1,2)", 1, 10},
      {"sel(1,2,3)", 1, 10},
      {"^2", 1, 1},
      {"2^x1", 1, 3},
      {"2^2.5", 1, 3},
      {"2^2^2", 1, 4},
      {"2e", 1, 2},
      {"1 +\n* 2", 2, 1},
      {"(1+2))", 1, 6},
      {"1 @ 2", 1, 3},
  };
  for (const auto& c : cases) {
    CAPTURE(c.src);
    try {
      parse_expr(c.src);
      FAIL_CHECK("expected a parse error for: " << c.src);
    } catch (const ParseError& e) {
      CHECK(e.line == c.line);
      CHECK(e.col == c.col);
    }
  }
}

TEST_CASE("usage tracking reports the highest index per family") {
  Parsed p = parse_expr("x1 + x3*a1");
  CHECK(p.usage.max_x == 3);
  CHECK(p.usage.max_a == 1);
  CHECK(p.usage.max_m == 0);
  CHECK(p.usage.max_y == 0);
  CHECK_FALSE(p.usage.uses_t);

  Parsed q = parse_expr("t*m2 + y1");
  CHECK(q.usage.uses_t);
  CHECK(q.usage.max_m == 2);
  CHECK(q.usage.max_y == 1);
}

TEST_CASE("missing variable families are evaluation errors") {
  Parsed p = parse_expr("a1 + 1");
  EvalCtx ctx;  // no control slot bound
  CHECK_THROWS_AS(eval_expr(p.ast, ctx), EvalError);

  Parsed q = parse_expr("x2");
  EvalCtx c2;
  double one = 1.0;
  c2.x = &one;
  c2.dim_x = 1;  // index out of range
  CHECK_THROWS_AS(eval_expr(q.ast, c2), EvalError);
}

TEST_CASE("printed expressions re-parse to the same values") {
  const char* sources[] = {
      "1+2*3",         "-x1^2",
      "2^-1 * x1",     "min(x1, max(x2, x3))",
      "clamp(x1,-1,1)", "sel(x1, x2, m1, a2)",
      "exp(-x1*x1/2)", "tanh(2*x1+x2) - abs(x3)",
      "x1/(1+x2^2)",   "t*y1 - m2",
  };
  EvalCtx ctx = corpus_ctx();
  for (const char* src : sources) {
    CAPTURE(src);
    NodePtr ast = parse_expr(src).ast;
    std::string printed = print_expr(ast);
    NodePtr again = parse_expr(printed).ast;
    CHECK(eval_expr(again, ctx) ==
          doctest::Approx(eval_expr(ast, ctx)).epsilon(1e-12));
    // printing is a fixed point once normalized
    CHECK(print_expr(again) == printed);
  }
}

namespace {

struct DerivProbe {
  const char* src;
  bool uses_t;
};

double eval_at(const NodePtr& n, double t, std::vector<double>& x,
               std::vector<double>& a, std::vector<double>& m) {
  EvalCtx ctx;
  ctx.t = t;
  ctx.x = x.data();
  ctx.dim_x = static_cast<int>(x.size());
  ctx.a = a.data();
  ctx.dim_a = static_cast<int>(a.size());
  ctx.m = m.data();
  ctx.dim_m = static_cast<int>(m.size());
  return eval_expr(n, ctx);
}

}  // namespace

TEST_CASE("symbolic derivatives match finite differences on smooth probes") {
  const DerivProbe exprs[] = {
      {"x1^3 + 2*x1*x2 - x2^2", false},
      {"exp(-x1*x1/2)", false},
      {"tanh(2*x1 + x2)", false},
      {"x1/(5 + x2^2)", false},
      {"exp(x1)*tanh(x2) + x1^2*x2", false},
      {"t*x1 + t^2*x2", true},
      {"m1*x1 + a1*x1^2", false},
      {"1/(3 + tanh(x1))", false},
      {"clamp(x1, -10, 10) * x2", false},
      {"(x1 - x2)^4 + a1*m1", false},
  };
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);

  int probes = 0;
  double worst = 0.0;
  while (probes < 100) {
    for (const auto& pe : exprs) {
      if (probes >= 100) break;
      Parsed p = parse_expr(pe.src);
      std::vector<double> x{unif(rng), unif(rng)};
      std::vector<double> a{unif(rng)};
      std::vector<double> m{unif(rng)};
      const double t = 0.25 + 0.5 * std::abs(unif(rng));

      struct Slot {
        VarRef ref;
        double* loc;
      };
      std::vector<Slot> slots{{{VarFamily::X, 0}, &x[0]},
                              {{VarFamily::X, 1}, &x[1]},
                              {{VarFamily::A, 0}, &a[0]},
                              {{VarFamily::M, 0}, &m[0]}};
      for (const Slot& s : slots) {
        NodePtr d = diff_expr(p.ast, s.ref);
        const double sym = eval_at(d, t, x, a, m);
        const double h = 5e-6 * std::max(1.0, std::abs(*s.loc));
        const double save = *s.loc;
        *s.loc = save + h;
        const double fp = eval_at(p.ast, t, x, a, m);
        *s.loc = save - h;
        const double fm = eval_at(p.ast, t, x, a, m);
        *s.loc = save;
        const double fd = (fp - fm) / (2.0 * h);
        const double rel =
            std::abs(sym - fd) / std::max(1.0, std::abs(sym));
        worst = std::max(worst, rel);
        CAPTURE(pe.src);
        CAPTURE(var_name(s.ref));
        CHECK(rel <= 1e-6);
      }
      ++probes;
    }
  }
  MESSAGE("worst relative derivative gap: " << worst);
  CHECK(probes >= 100);
}

TEST_CASE("derivatives of kinked primitives use sel and re-parse") {
  Parsed p = parse_expr("clamp(x1, -1, 1)");
  NodePtr d = diff_expr(p.ast, {VarFamily::X, 0});
  std::string printed = print_expr(d);
  NodePtr again = parse_expr(printed).ast;

  std::vector<double> x{0.0}, a{}, m{};
  EvalCtx ctx;
  ctx.x = x.data();
  ctx.dim_x = 1;
  for (double v : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
    x[0] = v;
    const double expected = (v > -1.0 && v < 1.0) ? 1.0 : (v < -1.0 || v > 1.0) ? 0.0
                                                  : eval_expr(d, ctx);
    CHECK(eval_expr(d, ctx) == doctest::Approx(expected));
    CHECK(eval_expr(again, ctx) == doctest::Approx(eval_expr(d, ctx)));
  }
}
