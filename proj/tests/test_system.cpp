#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/system.hpp"

using gf::MarkovSystem;
using gf::preset;

namespace {

// Admissible words by brute force over all m^n strings, with the transition
// relation re-derived from the image ranges.
std::set<gf::Word> brute_force_words(const gf::SystemSpec& spec, int n) {
  int m = static_cast<int>(spec.partition.size()) - 1;
  std::set<gf::Word> out;
  gf::Word w(n, 0);
  long total = 1;
  for (int i = 0; i < n; ++i) total *= m;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = n - 1; i >= 0; --i) {
      w[i] = static_cast<int>(c % m);
      c /= m;
    }
    bool ok = true;
    for (int i = 0; i + 1 < n && ok; ++i) {
      auto [lo, hi] = spec.images[w[i]];
      ok = lo <= w[i + 1] && w[i + 1] < hi;
    }
    if (ok) out.insert(w);
  }
  return out;
}

gf::SystemSpec single(const std::string& branch, const std::string& roof) {
  gf::SystemSpec s;
  s.partition = {0.0, 1.0};
  s.branches = {branch};
  s.images = {{0, 1}};
  s.roof = {roof};
  s.potential = {"0"};
  return s;
}

}  // namespace

TEST_SUITE("system") {

TEST_CASE("validate presets") {
  auto a = gf::validate(MarkovSystem(preset("SYS-A")));
  CHECK(a.lambda == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.rho == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.C4 == 0.0);
  CHECK(a.covering);
  CHECK(a.markov_residual <= 1e-12);

  auto b = gf::validate(MarkovSystem(preset("SYS-B")));
  CHECK(b.lambda == doctest::Approx(2.0).epsilon(1e-12));
  // sup|r'|/2 with r' = -(2pi/3) sin(2 pi x): pi/3, attained at x = 1/4 (a grid node).
  CHECK(b.C4 == doctest::Approx(std::numbers::pi / 3).epsilon(1e-6));
  CHECK(b.inf_r == doctest::Approx(1.0 / 3).epsilon(1e-6));
  CHECK(b.sup_r == doctest::Approx(1.0).epsilon(1e-12));

  auto c = gf::validate(MarkovSystem(preset("SYS-C")));
  CHECK(c.lambda == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c.rho == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(c.covering);
  CHECK(c.markov_residual <= 1e-12);
  CHECK(std::isfinite(c.C2));
}

TEST_CASE("validate rejects broken systems") {
  CHECK_THROWS_AS(gf::validate(MarkovSystem(single("x", "1"))), gf::NotExpanding);
  CHECK_THROWS_AS(gf::validate(MarkovSystem(single("1.5*x", "1"))), gf::NotMarkov);
  CHECK_THROWS_AS(gf::validate(MarkovSystem(single("2*x - 2*x + 2*x", "2"))), gf::NotMarkov);

  gf::SystemSpec s = preset("SYS-A");
  s.roof = {"2", "2"};
  CHECK_THROWS_AS(gf::validate(MarkovSystem(s)), gf::RoofOutOfRange);
  s.roof = {"x", "x"};
  CHECK_THROWS_AS(gf::validate(MarkovSystem(s)), gf::RoofOutOfRange);

  gf::SystemSpec split;
  split.partition = {0, 0.25, 0.5, 0.75, 1};
  split.branches = {"2*x", "2*x-0.5", "2*x-1", "2*x-1"};
  split.images = {{0, 2}, {0, 2}, {0, 2}, {2, 4}};
  split.roof = {"1", "1", "1", "1"};
  split.potential = {"0", "0", "0", "0"};
  // Branch 2 maps [1/2,3/4) onto [0,1/2): Markov, expanding, but the
  // left half never reaches the right half.
  CHECK_THROWS_AS(gf::validate(MarkovSystem(split)), gf::NotCovering);
}

TEST_CASE("cylinders") {
  MarkovSystem a(preset("SYS-A"));
  auto c2 = gf::cylinders(a, 2);
  REQUIRE(c2.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(c2[k].left == doctest::Approx(0.25 * k).epsilon(1e-15));
    CHECK(c2[k].diam() == doctest::Approx(0.25).epsilon(1e-14));
  }
  CHECK_THROWS_AS(gf::cylinders(a, 40, 1000000), gf::CapExceeded);

  gf::SystemSpec cs = preset("SYS-C");
  MarkovSystem c(cs);
  auto words = brute_force_words(cs, 2);
  std::set<gf::Word> expected = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 0}, {2, 1}};
  CHECK(words == expected);
  auto cc = gf::cylinders(c, 2);
  std::set<gf::Word> got;
  for (auto& cyl : cc) got.insert(cyl.word);
  CHECK(got == expected);

  for (int n = 1; n <= 7; ++n) {
    auto cyls = gf::cylinders(c, n);
    CHECK(cyls.size() == brute_force_words(cs, n).size());
    CHECK(cyls.front().left == 0.0);
    CHECK(cyls.back().right == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t k = 0; k + 1 < cyls.size(); ++k) {
      CHECK(cyls[k].left < cyls[k + 1].left);
      CHECK(std::abs(cyls[k].right - cyls[k + 1].left) <= 1e-14);
    }
  }
}

TEST_CASE("cylinder diameters obey the expansion bounds") {
  // A cylinder with i+1 symbols is mapped by T^i onto the element of its
  // last symbol, so its diameter sits between rho^-i and lambda^-i times it.
  for (const char* name : {"SYS-A", "SYS-B", "SYS-C"}) {
    MarkovSystem sys(preset(name));
    auto rep = gf::validate(sys);
    for (int i = 0; i < 10; ++i) {
      for (const auto& cyl : gf::cylinders(sys, i + 1)) {
        double el = sys.length(cyl.word.back());
        CHECK(cyl.diam() >= std::pow(rep.rho, -i) * el * (1 - 1e-9));
        CHECK(cyl.diam() <= std::pow(rep.lambda, -i) * el * (1 + 1e-9));
      }
    }
  }
}

TEST_CASE("inverse branches") {
  for (const char* name : {"SYS-A", "SYS-B", "SYS-C"}) {
    MarkovSystem sys(preset(name));
    auto rep = gf::validate(sys);
    for (int n = 1; n <= 8; ++n) {
      auto cyls = gf::cylinders(sys, n);
      for (std::size_t k = 0; k < cyls.size(); k += std::max<std::size_t>(1, cyls.size() / 40)) {
        gf::InverseBranch h(sys, cyls[k].word);
        for (int g = 0; g < 100; ++g) {
          double x = h.domain_left() + (h.domain_right() - h.domain_left()) * (g + 0.5) / 100;
          auto p = h(x);
          CHECK(std::abs(p.dh) <= std::pow(rep.lambda, -n) * (1 + 1e-9));
          CHECK(p.x >= cyls[k].left - 1e-12);
          CHECK(p.x <= cyls[k].right + 1e-12);
          double y = p.x;
          for (int j = 0; j < n; ++j) y = sys.T(cyls[k].word[j], y);
          CHECK(std::abs(y - x) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("preimage sets match admissible word counts") {
  MarkovSystem c(preset("SYS-C"));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0, 1);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      double x = ux(rng);
      auto pre = gf::preimages(c, x, n);
      // Count admissible words ending in a symbol whose image holds x.
      int e = c.element_of(x);
      std::size_t expected = 0;
      for (const auto& w : brute_force_words(preset("SYS-C"), n))
        if (c.admissible(w.back(), e)) ++expected;
      CHECK(pre.size() == expected);
      for (const auto& p : pre) {
        double y = p.x;
        for (int j = 0; j < n; ++j) y = c.T(p.word[j], y);
        CHECK(std::abs(y - x) <= 1e-10);
      }
    }
  }
}

TEST_CASE("birkhoff sums") {
  MarkovSystem a(preset("SYS-A"));
  auto one = std::vector<gf::Expr>{gf::parse("1"), gf::parse("1")};
  CHECK(gf::birkhoff_sum(a, one, 0.37, 5) == 5.0);
  auto id = std::vector<gf::Expr>{gf::parse("x"), gf::parse("x")};
  CHECK(gf::birkhoff_sum(a, id, 0.2, 4) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(gf::birkhoff_sum(a, id, 0.2, 0) == 0.0);
  // Orbit of 1/4 lands on the breakpoint 1/2; the sum is taken on a
  // slightly perturbed orbit instead of guessing a side.
  double s = gf::birkhoff_sum(a, id, 0.25, 3);
  CHECK(std::abs(s - 0.75) <= 1e-9);
}

TEST_CASE("element lookup ties break to the left-closed element") {
  MarkovSystem c(preset("SYS-C"));
  CHECK(c.element_of(0.0) == 0);
  CHECK(c.element_of(1.0 / 3) == 1);
  CHECK(c.element_of(2.0 / 3) == 2);
  CHECK(c.element_of(1.0) == 2);
}

}  // TEST_SUITE
