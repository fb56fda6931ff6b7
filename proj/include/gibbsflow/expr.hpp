#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace gf {

// Immutable expression tree in one variable x (plus an optional second
// variable u, used only by flow observables). Copies share nodes.
class Expr {
 public:
  enum class Op { Num, X, U, Pi, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log };

  Expr();  // the literal 0

  static Expr num(double c);  // c < 0 becomes Neg(num(-c))
  static Expr x();
  static Expr u();
  static Expr pi();
  static Expr pow(Expr base, int k);
  static Expr func(Op f, Expr arg);

  friend Expr operator+(Expr a, Expr b);
  friend Expr operator-(Expr a, Expr b);
  friend Expr operator*(Expr a, Expr b);
  friend Expr operator/(Expr a, Expr b);
  friend Expr operator-(Expr a);

  Op op() const;
  double value() const;  // Num only
  int exponent() const;  // Pow only
  const Expr& lhs() const;
  const Expr& rhs() const;
  const Expr& arg() const;  // unary nodes and Pow base

  double operator()(double x, double u = 0.0) const;
  bool uses_u() const;
  bool is_constant() const;
  int depth() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  struct Null {};
  explicit Expr(Null) {}
  explicit Expr(std::shared_ptr<const Node> n);
  std::shared_ptr<const Node> n_;
};

Expr parse(std::string_view src);
std::string to_string(const Expr& e);
Expr differentiate(const Expr& e);  // d/dx
double eval(const Expr& e, double x);

}  // namespace gf
