#include "submfg/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace submfg::expr {

std::string var_name(VarRef v) {
  switch (v.family) {
    case VarFamily::T: return "t";
    case VarFamily::X: return "x" + std::to_string(v.index + 1);
    case VarFamily::A: return "a" + std::to_string(v.index + 1);
    case VarFamily::M: return "m" + std::to_string(v.index + 1);
    case VarFamily::Y: return "y" + std::to_string(v.index + 1);
  }
  return "?";
}

NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Const;
  n->value = v;
  return n;
}

NodePtr make_var(VarFamily f, int index) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Var;
  n->var = VarRef{f, index};
  return n;
}

ParseError::ParseError(std::string msg, int line_, int col_)
    : std::runtime_error(msg + " at line " + std::to_string(line_) +
                         ", col " + std::to_string(col_)),
      line(line_), col(col_) {}

namespace {

struct Token {
  enum Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End } kind;
  double number = 0.0;
  std::string text;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      if (src_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
      ++pos_;
    }
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) { tok_.kind = Token::End; return; }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_; ++col_;
      }
      tok_.kind = Token::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    switch (c) {
      case '+': tok_.kind = Token::Plus; break;
      case '-': tok_.kind = Token::Minus; break;
      case '*': tok_.kind = Token::Star; break;
      case '/': tok_.kind = Token::Slash; break;
      case '^': tok_.kind = Token::Caret; break;
      case '(': tok_.kind = Token::LParen; break;
      case ')': tok_.kind = Token::RParen; break;
      case ',': tok_.kind = Token::Comma; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }
    ++pos_; ++col_;
  }

  void lex_number() {
    size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) { ++pos_; ++col_; }
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_; ++col_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) { ++pos_; ++col_; }
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t mark = pos_;
      int mark_col = col_;
      ++pos_; ++col_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) { ++pos_; ++col_; }
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) { ++pos_; ++col_; }
      } else {
        pos_ = mark;  // "2e" with no digits: the e belongs to the next token
        col_ = mark_col;
      }
    }
    tok_.kind = Token::Number;
    tok_.text = src_.substr(start, pos_ - start);
    tok_.number = std::strtod(tok_.text.c_str(), nullptr);
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  Parsed parse() {
    NodePtr e = additive();
    const Token& t = lex_.peek();
    if (t.kind != Token::End)
      throw ParseError("unexpected trailing input", t.line, t.col);
    return Parsed{e, usage_};
  }

 private:
  NodePtr additive() {
    NodePtr lhs = multiplicative();
    for (;;) {
      Token::Kind k = lex_.peek().kind;
      if (k != Token::Plus && k != Token::Minus) return lhs;
      lex_.take();
      NodePtr rhs = multiplicative();
      lhs = binary(k == Token::Plus ? NodeKind::Add : NodeKind::Sub, lhs, rhs);
    }
  }

  NodePtr multiplicative() {
    NodePtr lhs = unary();
    for (;;) {
      Token::Kind k = lex_.peek().kind;
      if (k != Token::Star && k != Token::Slash) return lhs;
      lex_.take();
      NodePtr rhs = unary();
      lhs = binary(k == Token::Star ? NodeKind::Mul : NodeKind::Div, lhs, rhs);
    }
  }

  NodePtr unary() {
    if (lex_.peek().kind == Token::Minus) {
      lex_.take();
      NodePtr inner = unary();
      if (inner->kind == NodeKind::Const) return make_const(-inner->value);
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Neg;
      n->a = inner;
      return n;
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (lex_.peek().kind != Token::Caret) return base;
    Token caret = lex_.take();
    bool negated = false;
    if (lex_.peek().kind == Token::Minus) { lex_.take(); negated = true; }
    Token e = lex_.peek();
    if (e.kind != Token::Number)
      throw ParseError("'^' needs an integer literal exponent", e.line, e.col);
    double ev = e.number;
    if (ev != std::floor(ev) || std::abs(ev) > 1e9)
      throw ParseError("'^' exponent must be an integer", e.line, e.col);
    lex_.take();
    if (lex_.peek().kind == Token::Caret) {
      const Token& t = lex_.peek();
      throw ParseError("chained '^' needs parentheses", t.line, t.col);
    }
    (void)caret;
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Pow;
    n->a = base;
    n->ipow = static_cast<int>(ev) * (negated ? -1 : 1);
    return n;
  }

  NodePtr primary() {
    Token t = lex_.take();
    switch (t.kind) {
      case Token::Number:
        return make_const(t.number);
      case Token::LParen: {
        NodePtr e = additive();
        expect(Token::RParen, ")");
        return e;
      }
      case Token::Ident:
        return ident(t);
      default:
        throw ParseError("expected a number, variable, function or '('", t.line, t.col);
    }
  }

  NodePtr ident(const Token& t) {
    const std::string& s = t.text;
    if (s == "exp" || s == "tanh" || s == "abs") return call(t, 1);
    if (s == "min" || s == "max") return call(t, 2);
    if (s == "clamp") return call(t, 3);
    if (s == "sel") return call(t, 4);
    if (s == "t") { usage_.uses_t = true; return make_var(VarFamily::T, 0); }
    if (s.size() >= 2) {
      VarFamily fam;
      switch (s[0]) {
        case 'x': fam = VarFamily::X; break;
        case 'a': fam = VarFamily::A; break;
        case 'm': fam = VarFamily::M; break;
        case 'y': fam = VarFamily::Y; break;
        default: throw ParseError("unknown identifier '" + s + "'", t.line, t.col);
      }
      for (size_t i = 1; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
          throw ParseError("unknown identifier '" + s + "'", t.line, t.col);
      int idx = std::atoi(s.c_str() + 1);
      if (idx < 1)
        throw ParseError("variable index must be >= 1 in '" + s + "'", t.line, t.col);
      switch (fam) {
        case VarFamily::X: usage_.max_x = std::max(usage_.max_x, idx); break;
        case VarFamily::A: usage_.max_a = std::max(usage_.max_a, idx); break;
        case VarFamily::M: usage_.max_m = std::max(usage_.max_m, idx); break;
        case VarFamily::Y: usage_.max_y = std::max(usage_.max_y, idx); break;
        default: break;
      }
      return make_var(fam, idx - 1);
    }
    throw ParseError("unknown identifier '" + s + "'", t.line, t.col);
  }

  NodePtr call(const Token& name, int arity) {
    expect(Token::LParen, "(");
    std::vector<NodePtr> args;
    args.push_back(additive());
    while (lex_.peek().kind == Token::Comma) {
      lex_.take();
      args.push_back(additive());
    }
    Token closing = lex_.peek();
    expect(Token::RParen, ")");
    if (static_cast<int>(args.size()) != arity)
      throw ParseError(name.text + " takes " + std::to_string(arity) + " argument" +
                       (arity == 1 ? "" : "s") + ", got " + std::to_string(args.size()),
                       closing.line, closing.col);
    auto n = std::make_shared<Node>();
    if (name.text == "exp") n->kind = NodeKind::Exp;
    else if (name.text == "tanh") n->kind = NodeKind::Tanh;
    else if (name.text == "abs") n->kind = NodeKind::Abs;
    else if (name.text == "min") n->kind = NodeKind::Min;
    else if (name.text == "max") n->kind = NodeKind::Max;
    else if (name.text == "clamp") n->kind = NodeKind::Clamp;
    else n->kind = NodeKind::Sel;
    n->a = args[0];
    if (args.size() > 1) n->b = args[1];
    if (args.size() > 2) n->c = args[2];
    if (args.size() > 3) n->d = args[3];
    return n;
  }

  NodePtr binary(NodeKind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  void expect(Token::Kind k, const char* what) {
    const Token& t = lex_.peek();
    if (t.kind != k)
      throw ParseError(std::string("expected '") + what + "'", t.line, t.col);
    lex_.take();
  }

  Lexer lex_;
  VarUsage usage_;
};

double lookup(const VarRef& v, const EvalCtx& ctx) {
  const double* base = nullptr;
  int dim = 0;
  switch (v.family) {
    case VarFamily::T: return ctx.t;
    case VarFamily::X: base = ctx.x; dim = ctx.dim_x; break;
    case VarFamily::A: base = ctx.a; dim = ctx.dim_a; break;
    case VarFamily::M: base = ctx.m; dim = ctx.dim_m; break;
    case VarFamily::Y: base = ctx.y; dim = ctx.dim_y; break;
  }
  if (!base || v.index >= dim)
    throw EvalError("variable " + var_name(v) + " not available in this context (dim " +
                    std::to_string(dim) + ")");
  return base[v.index];
}

double ipow_eval(double base, int n) {
  if (n < 0) return 1.0 / ipow_eval(base, -n);
  double r = 1.0, b = base;
  while (n > 0) {
    if (n & 1) r *= b;
    b *= b;
    n >>= 1;
  }
  return r;
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == NodeKind::Const && n->value == v;
}

NodePtr neg(NodePtr u);

NodePtr add(NodePtr u, NodePtr v) {
  if (is_const(u, 0.0)) return v;
  if (is_const(v, 0.0)) return u;
  if (u->kind == NodeKind::Const && v->kind == NodeKind::Const &&
      std::isfinite(u->value + v->value))
    return make_const(u->value + v->value);
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Add; n->a = std::move(u); n->b = std::move(v);
  return n;
}

NodePtr sub(NodePtr u, NodePtr v) {
  if (is_const(v, 0.0)) return u;
  if (u->kind == NodeKind::Const && v->kind == NodeKind::Const &&
      std::isfinite(u->value - v->value))
    return make_const(u->value - v->value);
  if (is_const(u, 0.0)) return neg(std::move(v));
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Sub; n->a = std::move(u); n->b = std::move(v);
  return n;
}

NodePtr mul(NodePtr u, NodePtr v) {
  if (is_const(u, 0.0) || is_const(v, 0.0)) return make_const(0.0);
  if (is_const(u, 1.0)) return v;
  if (is_const(v, 1.0)) return u;
  if (u->kind == NodeKind::Const && v->kind == NodeKind::Const &&
      std::isfinite(u->value * v->value))
    return make_const(u->value * v->value);
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Mul; n->a = std::move(u); n->b = std::move(v);
  return n;
}

NodePtr div(NodePtr u, NodePtr v) {
  if (is_const(u, 0.0)) return make_const(0.0);
  if (is_const(v, 1.0)) return u;
  if (u->kind == NodeKind::Const && v->kind == NodeKind::Const && v->value != 0.0 &&
      std::isfinite(u->value / v->value))
    return make_const(u->value / v->value);
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Div; n->a = std::move(u); n->b = std::move(v);
  return n;
}

NodePtr neg(NodePtr u) {
  if (u->kind == NodeKind::Const) return make_const(-u->value);
  if (u->kind == NodeKind::Neg) return u->a;
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Neg; n->a = std::move(u);
  return n;
}

NodePtr pow_node(NodePtr u, int e) {
  if (e == 0) return make_const(1.0);
  if (e == 1) return u;
  if (u->kind == NodeKind::Const && std::isfinite(ipow_eval(u->value, e)))
    return make_const(ipow_eval(u->value, e));
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Pow; n->a = std::move(u); n->ipow = e;
  return n;
}

NodePtr unary_node(NodeKind k, NodePtr u) {
  auto n = std::make_shared<Node>();
  n->kind = k; n->a = std::move(u);
  return n;
}

NodePtr sel(NodePtr a, NodePtr b, NodePtr p, NodePtr q) {
  if (a->kind == NodeKind::Const && b->kind == NodeKind::Const)
    return a->value <= b->value ? p : q;
  if (structurally_equal(p, q)) return p;
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Sel;
  n->a = std::move(a); n->b = std::move(b); n->c = std::move(p); n->d = std::move(q);
  return n;
}

int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add: case NodeKind::Sub: return 1;
    case NodeKind::Mul: case NodeKind::Div: return 2;
    case NodeKind::Neg: return 3;
    case NodeKind::Pow: return 4;
    default: return 5;  // atoms and function calls never need parens
  }
}

void print_rec(const Node& n, std::ostream& os, int parent_prec, bool right_operand) {
  int prec = precedence(n.kind);
  bool need = prec < parent_prec ||
              (prec == parent_prec && right_operand &&
               (n.kind == NodeKind::Sub || n.kind == NodeKind::Add ||
                n.kind == NodeKind::Div || n.kind == NodeKind::Mul));
  if (need) os << '(';
  switch (n.kind) {
    case NodeKind::Const: {
      std::ostringstream tmp;
      tmp.precision(17);
      double v = n.value;
      if (v < 0) {
        // negative literals print as unary minus so they re-lex cleanly
        tmp << -v;
        os << "-" << tmp.str();
      } else {
        tmp << v;
        os << tmp.str();
      }
      break;
    }
    case NodeKind::Var: os << var_name(n.var); break;
    case NodeKind::Neg:
      os << '-';
      print_rec(*n.a, os, precedence(NodeKind::Neg) + 1, false);
      break;
    case NodeKind::Exp: case NodeKind::Tanh: case NodeKind::Abs: {
      os << (n.kind == NodeKind::Exp ? "exp" : n.kind == NodeKind::Tanh ? "tanh" : "abs") << '(';
      print_rec(*n.a, os, 0, false);
      os << ')';
      break;
    }
    case NodeKind::Min: case NodeKind::Max: {
      os << (n.kind == NodeKind::Min ? "min" : "max") << '(';
      print_rec(*n.a, os, 0, false); os << ", ";
      print_rec(*n.b, os, 0, false);
      os << ')';
      break;
    }
    case NodeKind::Clamp: {
      os << "clamp(";
      print_rec(*n.a, os, 0, false); os << ", ";
      print_rec(*n.b, os, 0, false); os << ", ";
      print_rec(*n.c, os, 0, false);
      os << ')';
      break;
    }
    case NodeKind::Sel: {
      os << "sel(";
      print_rec(*n.a, os, 0, false); os << ", ";
      print_rec(*n.b, os, 0, false); os << ", ";
      print_rec(*n.c, os, 0, false); os << ", ";
      print_rec(*n.d, os, 0, false);
      os << ')';
      break;
    }
    case NodeKind::Add: case NodeKind::Sub: {
      print_rec(*n.a, os, 1, false);
      os << (n.kind == NodeKind::Add ? " + " : " - ");
      print_rec(*n.b, os, 1, true);
      break;
    }
    case NodeKind::Mul: case NodeKind::Div: {
      print_rec(*n.a, os, 2, false);
      os << (n.kind == NodeKind::Mul ? "*" : "/");
      print_rec(*n.b, os, 2, true);
      break;
    }
    case NodeKind::Pow: {
      print_rec(*n.a, os, precedence(NodeKind::Pow) + 1, false);
      os << '^';
      if (n.ipow < 0) os << '-' << -n.ipow; else os << n.ipow;
      break;
    }
  }
  if (need) os << ')';
}

}  // namespace

Parsed parse_expr(const std::string& src) {
  Parser p(src);
  return p.parse();
}

double eval_expr(const Node& n, const EvalCtx& ctx) {
  switch (n.kind) {
    case NodeKind::Const: return n.value;
    case NodeKind::Var: return lookup(n.var, ctx);
    case NodeKind::Neg: return -eval_expr(*n.a, ctx);
    case NodeKind::Exp: return std::exp(eval_expr(*n.a, ctx));
    case NodeKind::Tanh: return std::tanh(eval_expr(*n.a, ctx));
    case NodeKind::Abs: return std::abs(eval_expr(*n.a, ctx));
    case NodeKind::Add: return eval_expr(*n.a, ctx) + eval_expr(*n.b, ctx);
    case NodeKind::Sub: return eval_expr(*n.a, ctx) - eval_expr(*n.b, ctx);
    case NodeKind::Mul: return eval_expr(*n.a, ctx) * eval_expr(*n.b, ctx);
    case NodeKind::Div: return eval_expr(*n.a, ctx) / eval_expr(*n.b, ctx);
    case NodeKind::Pow: return ipow_eval(eval_expr(*n.a, ctx), n.ipow);
    case NodeKind::Min: return std::min(eval_expr(*n.a, ctx), eval_expr(*n.b, ctx));
    case NodeKind::Max: return std::max(eval_expr(*n.a, ctx), eval_expr(*n.b, ctx));
    case NodeKind::Clamp: {
      double v = eval_expr(*n.a, ctx);
      double lo = eval_expr(*n.b, ctx);
      double hi = eval_expr(*n.c, ctx);
      return std::min(std::max(v, lo), hi);
    }
    case NodeKind::Sel:
      return eval_expr(*n.a, ctx) <= eval_expr(*n.b, ctx) ? eval_expr(*n.c, ctx)
                                                          : eval_expr(*n.d, ctx);
  }
  throw EvalError("corrupt expression node");
}

NodePtr diff_expr(const NodePtr& n, VarRef wrt) {
  switch (n->kind) {
    case NodeKind::Const: return make_const(0.0);
    case NodeKind::Var:
      return make_const(n->var.family == wrt.family && n->var.index == wrt.index ? 1.0 : 0.0);
    case NodeKind::Neg: return neg(diff_expr(n->a, wrt));
    case NodeKind::Exp: {
      auto du = diff_expr(n->a, wrt);
      return mul(unary_node(NodeKind::Exp, n->a), std::move(du));
    }
    case NodeKind::Tanh: {
      auto du = diff_expr(n->a, wrt);
      auto th = unary_node(NodeKind::Tanh, n->a);
      return mul(sub(make_const(1.0), pow_node(std::move(th), 2)), std::move(du));
    }
    case NodeKind::Abs: {
      auto du = diff_expr(n->a, wrt);
      auto ndu = neg(du);
      return sel(make_const(0.0), n->a, std::move(du), std::move(ndu));
    }
    case NodeKind::Add: return add(diff_expr(n->a, wrt), diff_expr(n->b, wrt));
    case NodeKind::Sub: return sub(diff_expr(n->a, wrt), diff_expr(n->b, wrt));
    case NodeKind::Mul:
      return add(mul(diff_expr(n->a, wrt), n->b), mul(n->a, diff_expr(n->b, wrt)));
    case NodeKind::Div: {
      auto num = sub(mul(diff_expr(n->a, wrt), n->b), mul(n->a, diff_expr(n->b, wrt)));
      return div(std::move(num), pow_node(n->b, 2));
    }
    case NodeKind::Pow: {
      auto du = diff_expr(n->a, wrt);
      return mul(mul(make_const(static_cast<double>(n->ipow)), pow_node(n->a, n->ipow - 1)),
                 std::move(du));
    }
    case NodeKind::Min:
      return sel(n->a, n->b, diff_expr(n->a, wrt), diff_expr(n->b, wrt));
    case NodeKind::Max:
      return sel(n->b, n->a, diff_expr(n->a, wrt), diff_expr(n->b, wrt));
    case NodeKind::Clamp: {
      // clamp(u, lo, hi) == min(max(u, lo), hi); same branch rules
      auto inner = sel(n->b, n->a, diff_expr(n->a, wrt), diff_expr(n->b, wrt));
      auto mx = std::make_shared<Node>();
      mx->kind = NodeKind::Max; mx->a = n->a; mx->b = n->b;
      return sel(NodePtr(mx), n->c, std::move(inner), diff_expr(n->c, wrt));
    }
    case NodeKind::Sel:
      return sel(n->a, n->b, diff_expr(n->c, wrt), diff_expr(n->d, wrt));
  }
  throw EvalError("corrupt expression node");
}

bool has_kinks(const Node& n) {
  switch (n.kind) {
    case NodeKind::Abs: case NodeKind::Min: case NodeKind::Max:
    case NodeKind::Clamp: case NodeKind::Sel:
      return true;
    default: break;
  }
  if (n.a && has_kinks(*n.a)) return true;
  if (n.b && has_kinks(*n.b)) return true;
  if (n.c && has_kinks(*n.c)) return true;
  if (n.d && has_kinks(*n.d)) return true;
  return false;
}

std::string print_expr(const Node& n) {
  std::ostringstream os;
  print_rec(n, os, 0, false);
  return os.str();
}

bool structurally_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Const: return a.value == b.value;
    case NodeKind::Var: return a.var.family == b.var.family && a.var.index == b.var.index;
    case NodeKind::Pow:
      if (a.ipow != b.ipow) return false;
      break;
    default: break;
  }
  auto eq = [](const NodePtr& x, const NodePtr& y) {
    if (!x && !y) return true;
    if (!x || !y) return false;
    return structurally_equal(*x, *y);
  };
  return eq(a.a, b.a) && eq(a.b, b.b) && eq(a.c, b.c) && eq(a.d, b.d);
}

}  // namespace submfg::expr
