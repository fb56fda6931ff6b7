#include "gibbsflow/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "gibbsflow/errors.hpp"

namespace gf {

struct Expr::Node {
  Op op;
  double value = 0.0;  // Num
  int k = 0;           // Pow exponent
  Expr a{Null{}}, b{Null{}};
  bool has_u = false;
  int depth = 1;
};

namespace {

bool is_binary(Expr::Op op) {
  return op == Expr::Op::Add || op == Expr::Op::Sub || op == Expr::Op::Mul || op == Expr::Op::Div;
}

}  // namespace

Expr::Expr() {
  static const std::shared_ptr<const Node> zero = [] {
    auto n = std::make_shared<Node>();
    n->op = Op::Num;
    return n;
  }();
  n_ = zero;
}

Expr::Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

Expr Expr::num(double c) {
  if (!std::isfinite(c)) throw DomainError("non-finite literal");
  if (std::signbit(c) && c != 0.0) return -num(-c);
  auto n = std::make_shared<Node>();
  n->op = Op::Num;
  n->value = c == 0.0 ? 0.0 : c;
  return Expr(std::move(n));
}

Expr Expr::x() {
  static const Expr e = [] {
    auto n = std::make_shared<Node>();
    n->op = Op::X;
    return Expr(std::move(n));
  }();
  return e;
}

Expr Expr::u() {
  static const Expr e = [] {
    auto n = std::make_shared<Node>();
    n->op = Op::U;
    n->has_u = true;
    return Expr(std::move(n));
  }();
  return e;
}

Expr Expr::pi() {
  static const Expr e = [] {
    auto n = std::make_shared<Node>();
    n->op = Op::Pi;
    return Expr(std::move(n));
  }();
  return e;
}

Expr Expr::pow(Expr base, int k) {
  if (k < 0) throw DomainError("negative exponent");
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->k = k;
  n->has_u = base.uses_u();
  n->depth = base.depth() + 1;
  n->a = std::move(base);
  return Expr(std::move(n));
}

Expr Expr::func(Op f, Expr arg) {
  auto n = std::make_shared<Node>();
  n->op = f;
  n->has_u = arg.uses_u();
  n->depth = arg.depth() + 1;
  n->a = std::move(arg);
  return Expr(std::move(n));
}

Expr operator+(Expr a, Expr b) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Add;
  n->has_u = a.uses_u() || b.uses_u();
  n->depth = 1 + std::max(a.depth(), b.depth());
  n->a = std::move(a);
  n->b = std::move(b);
  return Expr(std::move(n));
}

Expr operator-(Expr a, Expr b) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Sub;
  n->has_u = a.uses_u() || b.uses_u();
  n->depth = 1 + std::max(a.depth(), b.depth());
  n->a = std::move(a);
  n->b = std::move(b);
  return Expr(std::move(n));
}

Expr operator*(Expr a, Expr b) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Mul;
  n->has_u = a.uses_u() || b.uses_u();
  n->depth = 1 + std::max(a.depth(), b.depth());
  n->a = std::move(a);
  n->b = std::move(b);
  return Expr(std::move(n));
}

Expr operator/(Expr a, Expr b) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Div;
  n->has_u = a.uses_u() || b.uses_u();
  n->depth = 1 + std::max(a.depth(), b.depth());
  n->a = std::move(a);
  n->b = std::move(b);
  return Expr(std::move(n));
}

Expr operator-(Expr a) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Neg;
  n->has_u = a.uses_u();
  n->depth = a.depth() + 1;
  n->a = std::move(a);
  return Expr(std::move(n));
}


Expr::Op Expr::op() const { return n_->op; }
double Expr::value() const { return n_->value; }
int Expr::exponent() const { return n_->k; }
const Expr& Expr::lhs() const { return n_->a; }
const Expr& Expr::rhs() const { return n_->b; }
const Expr& Expr::arg() const { return n_->a; }
bool Expr::uses_u() const { return n_->has_u; }
int Expr::depth() const { return n_->depth; }

bool Expr::is_constant() const {
  switch (op()) {
    case Op::Num:
    case Op::Pi: return true;
    case Op::X:
    case Op::U: return false;
    default:
      if (is_binary(op())) return lhs().is_constant() && rhs().is_constant();
      return arg().is_constant();
  }
}

double Expr::operator()(double x, double u) const {
  const Node& n = *n_;
  switch (n.op) {
    case Op::Num: return n.value;
    case Op::X: return x;
    case Op::U: return u;
    case Op::Pi: return std::numbers::pi;
    case Op::Add: return n.a(x, u) + n.b(x, u);
    case Op::Sub: return n.a(x, u) - n.b(x, u);
    case Op::Mul: return n.a(x, u) * n.b(x, u);
    case Op::Div: return n.a(x, u) / n.b(x, u);
    case Op::Neg: return -n.a(x, u);
    case Op::Pow: {
      double base = n.a(x, u), r = 1.0;
      for (int i = 0; i < n.k; ++i) r *= base;
      return r;
    }
    case Op::Sin: return std::sin(n.a(x, u));
    case Op::Cos: return std::cos(n.a(x, u));
    case Op::Exp: return std::exp(n.a(x, u));
    case Op::Log: {
      double v = n.a(x, u);
      if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
      return std::log(v);
    }
  }
  return 0.0;
}

double eval(const Expr& e, double x) { return e(x); }

bool operator==(const Expr& a, const Expr& b) {
  if (a.n_ == b.n_) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Expr::Op::Num: return a.value() == b.value();
    case Expr::Op::X:
    case Expr::Op::U:
    case Expr::Op::Pi: return true;
    case Expr::Op::Pow: return a.exponent() == b.exponent() && a.arg() == b.arg();
    default:
      if (is_binary(a.op())) return a.lhs() == b.lhs() && a.rhs() == b.rhs();
      return a.arg() == b.arg();
  }
}

// ---------------------------------------------------------------- parser

namespace {

constexpr int kMaxNesting = 256;

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int nesting_ = 0;

  // Offsets are reported 1-based, so end-of-input in "2*x +" is 6.
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, pos_ + 1); }

  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' ||
                                s_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  struct Guard {
    Parser& p;
    explicit Guard(Parser& pp) : p(pp) {
      if (++p.nesting_ > kMaxNesting) p.fail("expression nested too deeply");
    }
    ~Guard() { --p.nesting_; }
  };

  Expr expr() {
    Guard g(*this);
    Expr e = term();
    for (;;) {
      if (accept('+'))
        e = e + term();
      else if (accept('-'))
        e = e - term();
      else
        return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*'))
        e = e * unary();
      else if (accept('/'))
        e = e / unary();
      else
        return e;
    }
  }

  // Unary minus binds looser than ^, so -x^2 is -(x^2).
  Expr unary() {
    if (accept('-')) {
      Guard g(*this);
      return -unary();
    }
    return factor();
  }

  Expr factor() {
    Expr base = atom();
    if (accept('^')) {
      skip();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == start) fail("expected integer exponent");
      if (pos_ - start > 6) {
        pos_ = start;
        fail("exponent too large");
      }
      int k = std::atoi(std::string(s_.substr(start, pos_ - start)).c_str());
      return Expr::pow(std::move(base), k);
    }
    return base;
  }

  Expr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string_view id = s_.substr(start, pos_ - start);
      if (id == "x") return Expr::x();
      if (id == "u") return Expr::u();
      if (id == "pi") return Expr::pi();
      Expr::Op f;
      if (id == "sin")
        f = Expr::Op::Sin;
      else if (id == "cos")
        f = Expr::Op::Cos;
      else if (id == "exp")
        f = Expr::Op::Exp;
      else if (id == "log")
        f = Expr::Op::Log;
      else
        throw UnknownIdentifier("'" + std::string(id) + "' at offset " + std::to_string(start + 1));
      if (!accept('(')) fail("expected '(' after function name");
      Expr a = expr();
      if (!accept(')')) fail("expected ')'");
      return Expr::func(f, std::move(a));
    }
    fail("unexpected character");
  }

  Expr number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t d = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      return pos_ - d;
    };
    std::size_t nd = digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;  // not an exponent; leave 'e' for the caller
    }
    std::string text(s_.substr(start, pos_ - start));
    double v = std::strtod(text.c_str(), nullptr);
    if (!std::isfinite(v)) {
      pos_ = start;
      fail("numeric literal out of range");
    }
    return Expr::num(v);
  }
};

// ---------------------------------------------------------------- printer

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

int prec(Expr::Op op) {
  switch (op) {
    case Expr::Op::Add:
    case Expr::Op::Sub: return 1;
    case Expr::Op::Mul:
    case Expr::Op::Div: return 2;
    case Expr::Op::Neg: return 3;
    case Expr::Op::Pow: return 4;
    default: return 5;
  }
}

void print(const Expr& e, std::string& out) {
  Expr::Op op = e.op();
  switch (op) {
    case Expr::Op::Num: out += fmt_num(e.value()); return;
    case Expr::Op::X: out += 'x'; return;
    case Expr::Op::U: out += 'u'; return;
    case Expr::Op::Pi: out += "pi"; return;
    case Expr::Op::Neg:
      out += '-';
      print_wrapped(e.arg(), prec(e.arg().op()) < 3, out);
      return;
    case Expr::Op::Pow:
      print_wrapped(e.arg(), prec(e.arg().op()) < 5, out);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    case Expr::Op::Sin: out += "sin("; break;
    case Expr::Op::Cos: out += "cos("; break;
    case Expr::Op::Exp: out += "exp("; break;
    case Expr::Op::Log: out += "log("; break;
    default: {
      int p = prec(op);
      print_wrapped(e.lhs(), prec(e.lhs().op()) < p, out);
      out += op == Expr::Op::Add ? "+" : op == Expr::Op::Sub ? "-" : op == Expr::Op::Mul ? "*" : "/";
      // Right operands of equal precedence need parentheses (left associativity),
      // and a leading minus reads better parenthesized.
      Expr::Op r = e.rhs().op();
      print_wrapped(e.rhs(), prec(r) <= p || r == Expr::Op::Neg, out);
      return;
    }
  }
  print(e.arg(), out);
  out += ')';
}

// ---------------------------------------------------------- differentiation

bool is_zero(const Expr& e) { return e.op() == Expr::Op::Num && e.value() == 0.0; }
bool is_one(const Expr& e) { return e.op() == Expr::Op::Num && e.value() == 1.0; }

Expr add(Expr a, Expr b) {
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  return a + b;
}

Expr sub(Expr a, Expr b) {
  if (is_zero(b)) return a;
  if (is_zero(a)) return -b;
  return a - b;
}

Expr mul(Expr a, Expr b) {
  if (is_zero(a) || is_zero(b)) return Expr::num(0);
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  return a * b;
}

Expr d(const Expr& e) {
  using Op = Expr::Op;
  switch (e.op()) {
    case Op::Num:
    case Op::Pi:
    case Op::U: return Expr::num(0);
    case Op::X: return Expr::num(1);
    case Op::Add: return add(d(e.lhs()), d(e.rhs()));
    case Op::Sub: return sub(d(e.lhs()), d(e.rhs()));
    case Op::Mul: return add(mul(d(e.lhs()), e.rhs()), mul(e.lhs(), d(e.rhs())));
    case Op::Div: {
      Expr num = sub(mul(d(e.lhs()), e.rhs()), mul(e.lhs(), d(e.rhs())));
      if (is_zero(num)) return Expr::num(0);
      return num / Expr::pow(e.rhs(), 2);
    }
    case Op::Neg: {
      Expr da = d(e.arg());
      return is_zero(da) ? da : -da;
    }
    case Op::Pow: {
      int k = e.exponent();
      if (k == 0) return Expr::num(0);
      Expr inner = k == 1 ? Expr::num(1) : mul(Expr::num(k), k == 2 ? e.arg() : Expr::pow(e.arg(), k - 1));
      return mul(inner, d(e.arg()));
    }
    case Op::Sin: return mul(Expr::func(Op::Cos, e.arg()), d(e.arg()));
    case Op::Cos: {
      Expr da = d(e.arg());
      if (is_zero(da)) return da;
      return -mul(Expr::func(Op::Sin, e.arg()), da);
    }
    case Op::Exp: return mul(e, d(e.arg()));
    case Op::Log: {
      Expr da = d(e.arg());
      if (is_zero(da)) return da;
      return da / e.arg();
    }
  }
  return Expr::num(0);
}

}  // namespace

Expr parse(std::string_view src) { return Parser(src).parse(); }

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

Expr differentiate(const Expr& e) { return d(e); }

}  // namespace gf
