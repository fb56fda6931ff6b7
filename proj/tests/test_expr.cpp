#include "doctest.h"

#include <cmath>
#include <random>
#include <string>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/expr.hpp"

using gf::Expr;

namespace {

// Generator of smooth, well-conditioned expressions on [0,1]: every subtree
// stays bounded, log and division only ever see arguments >= 1.
struct ExprGen {
  std::mt19937_64 rng;
  explicit ExprGen(std::uint64_t seed) : rng(seed) {}

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }
  double constant() { return 0.25 * (1 + pick(8)); }

  Expr leaf() {
    switch (pick(3)) {
      case 0: return Expr::x();
      case 1: return Expr::num(constant());
      default: return Expr::pi() * Expr::x();
    }
  }

  Expr bounded(int depth) {
    if (depth <= 1) return leaf();
    Expr a = bounded(depth - 1);
    switch (pick(9)) {
      case 0: return a + bounded(depth - 1);
      case 1: return a - bounded(depth - 1);
      case 2: return Expr::func(Expr::Op::Sin, a) * Expr::num(constant());
      case 3: return Expr::func(Expr::Op::Cos, a);
      case 4: return Expr::func(Expr::Op::Exp, Expr::func(Expr::Op::Sin, a));
      case 5: return Expr::func(Expr::Op::Log, Expr::num(1) + Expr::pow(a, 2));
      case 6: return a / (Expr::num(2) + Expr::func(Expr::Op::Cos, bounded(depth - 1)));
      case 7: return Expr::pow(Expr::func(Expr::Op::Sin, a), pick(4));
      default: return -a;
    }
  }
};

double central_difference(const Expr& e, double x, double h = 1e-5) {
  return (e(x + h) - e(x - h)) / (2 * h);
}

}  // namespace

TEST_SUITE("expr") {

TEST_CASE("parse builds the grammar-forced tree") {
  CHECK(gf::parse("2*x") == Expr::num(2) * Expr::x());
  Expr want = (Expr::num(2) + Expr::func(Expr::Op::Cos, Expr::num(2) * Expr::pi() * Expr::x())) /
              Expr::num(3);
  CHECK(gf::parse("(2+cos(2*pi*x))/3") == want);
  CHECK(gf::parse("-x^2") == -Expr::pow(Expr::x(), 2));
  CHECK(gf::parse("1-2-3") == (Expr::num(1) - Expr::num(2)) - Expr::num(3));
  CHECK(gf::parse("  3 * x / 2 ") == (Expr::num(3) * Expr::x()) / Expr::num(2));
  CHECK(gf::parse("1.5e-3") == Expr::num(1.5e-3));
}

TEST_CASE("syntax errors report the byte position") {
  try {
    gf::parse("2*x +");
    FAIL("expected SyntaxError");
  } catch (const gf::SyntaxError& e) {
    CHECK(e.offset() == 6);
  }
  CHECK_THROWS_AS(gf::parse("2*y"), gf::UnknownIdentifier);
  CHECK_THROWS_AS(gf::parse("foo(x)"), gf::UnknownIdentifier);
  CHECK_THROWS_AS(gf::parse("x^y"), gf::SyntaxError);
  CHECK_THROWS_AS(gf::parse("x^2^3"), gf::SyntaxError);
  CHECK_THROWS_AS(gf::parse("sin x"), gf::SyntaxError);
  CHECK_THROWS_AS(gf::parse(""), gf::SyntaxError);
  CHECK_THROWS_AS(gf::parse("(x"), gf::SyntaxError);
  CHECK_THROWS_AS(gf::parse("x)"), gf::SyntaxError);
}

TEST_CASE("eval") {
  CHECK(gf::eval(gf::parse("2*x"), 0.25) == 0.5);
  CHECK(gf::eval(gf::parse("cos(2*pi*x)"), 0.5) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(gf::eval(gf::parse("log(x)"), 0.0), gf::DomainError);
  CHECK_THROWS_AS(gf::eval(gf::parse("log(x-1)"), 0.5), gf::DomainError);
  CHECK(gf::eval(gf::parse("x^3"), 2.0) == 8.0);
  CHECK(gf::eval(gf::parse("x^0"), 7.0) == 1.0);
  CHECK(gf::parse("cos(2*pi*u)+x")(0.5, 0.25) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("differentiate examples") {
  Expr d = gf::differentiate(gf::parse("2*x"));
  CHECK(d.is_constant());
  CHECK(d(0.3) == 2.0);
  CHECK(gf::differentiate(gf::parse("cos(2*pi*x)"))(0.25) ==
        doctest::Approx(-2 * M_PI).epsilon(1e-14));
  Expr roof = gf::parse("(2+cos(2*pi*x))/3");
  double dv = gf::differentiate(roof)(0.1);
  CHECK(std::abs(dv - central_difference(roof, 0.1)) <= 1e-6 * std::abs(dv));
  CHECK(gf::differentiate(gf::parse("pi"))(0.4) == 0.0);
  CHECK(gf::differentiate(gf::parse("x^0"))(0.4) == 0.0);
}

TEST_CASE("derivative matches central differences on random expressions") {
  ExprGen gen(20240611);
  std::uniform_real_distribution<double> ux(0.05, 0.95);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Expr e = gen.bounded(1 + gen.pick(5));
    REQUIRE(e.depth() <= 16);
    double x = ux(gen.rng);
    double d = gf::differentiate(e)(x);
    double fd = central_difference(e, x);
    INFO(gf::to_string(e), " at x=", x);
    CHECK(std::abs(d - fd) <= 1e-6 * (1 + std::abs(d)));
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("print/parse round trip is structural identity") {
  ExprGen gen(7);
  for (int trial = 0; trial < 1000; ++trial) {
    Expr e = gen.bounded(1 + gen.pick(5));
    if (gen.pick(4) == 0) e = e + Expr::num(1e-7 * (1 + gen.pick(100)));
    if (gen.pick(5) == 0) e = -(-e);
    std::string s = gf::to_string(e);
    INFO(s);
    CHECK(gf::parse(s) == e);
  }
  // Derivatives are expressions too, and survive the trip.
  Expr d = gf::differentiate(gf::parse("log(1+x^2)/(2+cos(3*x))"));
  CHECK(gf::parse(gf::to_string(d)) == d);
}

TEST_CASE("parser is total on arbitrary input") {
  const std::string alphabet = "0123456789.xupiesncolgt()+-*/^ eE";
  std::mt19937_64 rng(99);
  int parsed = 0, rejected = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    int len = std::uniform_int_distribution<int>(0, 24)(rng);
    for (int i = 0; i < len; ++i) {
      if (std::uniform_int_distribution<int>(0, 40)(rng) == 0)
        s.push_back(static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng)));
      else
        s.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)]);
    }
    try {
      gf::parse(s);
      ++parsed;
    } catch (const gf::SyntaxError& e) {
      CHECK(e.offset() <= s.size() + 1);
      ++rejected;
    } catch (const gf::UnknownIdentifier&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 20000);
  CHECK(parsed > 0);
  std::string deep(100000, '(');
  CHECK_THROWS_AS(gf::parse(deep + "x" + std::string(100000, ')')), gf::SyntaxError);
  CHECK_THROWS_AS(gf::parse(std::string(100000, '-') + "x"), gf::SyntaxError);
}

}  // TEST_SUITE
