#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/uni.hpp"

using gf::MarkovSystem;
using gf::preset;

namespace {

gf::SystemSpec linear_roof() { return preset("DOUBLING-LINEAR-ROOF"); }

// Forward-orbit derivatives by central differences, as an independent check
// on the cone center -DS_n r / DT^n.
double fd_cone_center(const MarkovSystem& sys, double x, int n) {
  std::vector<gf::Expr> r = sys.roof_exprs();
  const double h = 1e-7;
  auto Tn = [&](double z) {
    for (int k = 0; k < n; ++k) z = sys.T(z);
    return z;
  };
  double dS = (gf::birkhoff_sum(sys, r, x + h, n) - gf::birkhoff_sum(sys, r, x - h, n)) / (2 * h);
  double dT = (Tn(x + h) - Tn(x - h)) / (2 * h);
  return -dS / dT;
}

struct Weighted {
  gf::ConeInterval cone;
  double w;
};

std::vector<Weighted> weighted_cones(const gf::TransferOperator& op, const gf::EigenData& e, double y, int n,
                                     double C7) {
  const auto& sys = op.system();
  auto f = e.f_function(op);
  std::vector<Weighted> out;
  double total = 0;
  for (const auto& p : gf::preimages(sys, y, n)) {
    double w = std::exp(p.Sphi) * f.eval(p.word.front(), p.x).real();
    out.push_back({gf::cone_of(p, C7), w});
    total += w;
  }
  for (auto& q : out) q.w /= total;
  return out;
}

// O(k^2) versions of a(n, y) and b(n, y).
double brute_a(const std::vector<Weighted>& c) {
  double best = 0;
  for (const auto& x0 : c) {
    double s = 0;
    for (const auto& x : c)
      if (x.cone.intersects(x0.cone)) s += x.w;
    best = std::max(best, s);
  }
  return best;
}

double brute_b(const std::vector<Weighted>& c) {
  double best = 0;
  for (const auto& probe : c)
    for (double p : {probe.cone.lo, probe.cone.hi}) {
      double s = 0;
      for (const auto& x : c)
        if (x.cone.contains(p)) s += x.w;
      best = std::max(best, s);
    }
  return best;
}

}  // namespace

TEST_SUITE("uni") {

TEST_CASE("C7") {
  CHECK(gf::c7(MarkovSystem(preset("SYS-A"))) == 0.0);
  CHECK(gf::c7(MarkovSystem(preset("SYS-B"))) == doctest::Approx(8 * std::numbers::pi / 3).epsilon(1e-6));
  for (const char* name : {"SYS-B", "SYS-C"}) {
    MarkovSystem sys(preset(name));
    double C7 = gf::c7(sys);
    double worst = 0;
    for (int n = 1; n <= 8; ++n)
      for (int g = 0; g < 64; ++g)
        for (const auto& p : gf::preimages(sys, (g + 0.5) / 64, n)) worst = std::max(worst, std::abs(p.dSr / p.dTn));
    CHECK(worst <= C7 / 2 + 1e-9);
  }
}

TEST_CASE("psi") {
  MarkovSystem b(preset("SYS-B"));
  gf::PsiFunction same(b, {0, 1}, {0, 1});
  for (double x : {0.1, 0.5, 0.9}) CHECK(same(x) == 0.0);

  MarkovSystem a(preset("SYS-A"));
  for (const auto& w1 : gf::cylinders(a, 3))
    for (const auto& w2 : gf::cylinders(a, 3)) {
      gf::PsiFunction p(a, w1.word, w2.word);
      CHECK(p(0.3) == 0.0);
      CHECK(p.derivative(0.7) == 0.0);
    }

  gf::PsiFunction p(b, {0}, {1});
  auto r = [](double x) { return (2 + std::cos(2 * std::numbers::pi * x)) / 3; };
  auto direct = [&](double x) { return r(x / 2) - r((x + 1) / 2); };
  CHECK(std::abs(p(0.5)) <= 1e-15);
  for (double x : {0.1, 0.25, 0.5, 0.77}) {
    CHECK(std::abs(p(x) - direct(x)) <= 1e-14);
    double h = 1e-6;
    CHECK(std::abs(p.derivative(x) - (direct(x + h) - direct(x - h)) / (2 * h)) <= 1e-6);
  }

  // Antisymmetry and |D psi| <= C7.
  for (const char* name : {"SYS-B", "SYS-C"}) {
    MarkovSystem sys(preset(name));
    double C7 = gf::c7(sys);
    auto cyl = gf::cylinders(sys, 3);
    double c9 = 0;
    for (std::size_t i = 0; i < cyl.size(); i += 2)
      for (std::size_t j = 1; j < cyl.size(); j += 3) {
        gf::PsiFunction f(sys, cyl[i].word, cyl[j].word), g(sys, cyl[j].word, cyl[i].word);
        double prev_x = 0, prev_d = 0;
        for (int k = 0; k <= 50; ++k) {
          double x = f.domain_left() + (f.domain_right() - f.domain_left()) * k / 50;
          CHECK(std::abs(f(x) + g(x)) <= 1e-12);
          double d = f.derivative(x);
          CHECK(std::abs(d) <= C7 + 1e-12);
          if (k > 0) c9 = std::max(c9, std::abs(d - prev_d) / (x - prev_x));
          prev_x = x;
          prev_d = d;
        }
      }
    CHECK(std::isfinite(c9));
  }

  gf::SystemSpec split;
  split.partition = {0, 0.25, 0.5, 0.75, 1};
  split.branches = {"4*x", "2*x-0.5", "2*x-0.5", "4*x-3"};
  split.images = {{0, 4}, {0, 2}, {2, 4}, {0, 4}};
  split.roof = {"1", "1", "1", "1"};
  MarkovSystem s(split);
  gf::validate(s);
  CHECK_THROWS_AS(gf::PsiFunction(s, {1}, {2}), gf::EmptyDomain);
}

TEST_CASE("check_uni") {
  auto ra = gf::check_uni(MarkovSystem(preset("SYS-A")), 2, 0.05);
  CHECK(ra.D_full == 0.0);
  CHECK(ra.D_point == 0.0);
  auto rb = gf::check_uni(MarkovSystem(preset("SYS-B")), 2, 0.05);
  CHECK(rb.D_point > 0);
  CHECK(rb.D_point >= rb.D_full);
  CHECK(!rb.witnesses.empty());
}

TEST_CASE("cone images") {
  MarkovSystem a(preset("SYS-A"));
  for (int n = 1; n <= 6; ++n) {
    auto c = gf::cone_image(a, 0.3, n, gf::c7(a));
    CHECK(c.lo == 0.0);
    CHECK(c.hi == 0.0);
  }
  for (const char* name : {"SYS-B", "SYS-C"}) {
    MarkovSystem sys(preset(name));
    double C7 = gf::c7(sys);
    double lambda = gf::validate(sys).lambda;
    for (int n = 1; n <= 8; ++n)
      for (int g = 0; g < 97; ++g) {
        double x = (g + 0.37) / 97;
        auto c = gf::cone_image(sys, x, n, C7);
        CHECK(c.width() <= 2 * C7 * std::pow(lambda, -n) * (1 + 1e-12));
        CHECK(c.lo >= -C7);
        CHECK(c.hi <= C7);
        if (n <= 4) CHECK(std::abs(0.5 * (c.lo + c.hi) - fd_cone_center(sys, x, n)) <= 1e-5);
      }
  }
}

TEST_CASE("transversality") {
  MarkovSystem b(preset("SYS-B"));
  double C7 = gf::c7(b);
  CHECK_FALSE(gf::transversal(b, 0.2, 0.2, 3, C7));
  CHECK_THROWS_AS(gf::transversal(b, 0.2, 0.3, 1, C7), gf::NotSiblings);

  auto pre = gf::preimages(b, 0.3, 4);
  int found = 0;
  for (std::size_t i = 0; i < pre.size(); ++i)
    for (std::size_t j = i + 1; j < pre.size(); ++j) found += gf::transversal(b, pre[i].x, pre[j].x, 4, C7);
  CHECK(found > 0);

  MarkovSystem a(preset("SYS-A"));
  auto pa = gf::preimages(a, 0.3, 4);
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = i + 1; j < pa.size(); ++j) CHECK_FALSE(gf::transversal(a, pa[i].x, pa[j].x, 4, 0.0));
}

TEST_CASE("a(n) and b(n) pointwise values match brute force") {
  for (const char* name : {"SYS-B", "SYS-C"}) {
    gf::TransferOperator op(MarkovSystem(preset(name)), 512);
    auto e = gf::eigendata(op, 0.0);
    double C7 = gf::c7(op.system());
    for (int n : {2, 5, 7})
      for (double y : {0.11, 0.5, 0.83}) {
        auto c = weighted_cones(op, e, y, n, C7);
        CHECK(gf::a_at(op, e, y, n, C7) == doctest::Approx(brute_a(c)).epsilon(1e-12));
        CHECK(gf::b_at(op, e, y, n, C7) == doctest::Approx(brute_b(c)).epsilon(1e-12));
      }
  }
}

TEST_CASE("a(n) and b(n) sequences") {
  gf::TransferOperator a(MarkovSystem(preset("SYS-A")), 256);
  auto ea = gf::eigendata(a, 0.0);
  for (double v : gf::a_sequence(a, ea, 8, 128).values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  for (double v : gf::b_sequence(a, ea, 8, 128).values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  gf::TransferOperator b(MarkovSystem(preset("SYS-B")), 512);
  auto eb = gf::eigendata(b, 0.0);
  auto as = gf::a_sequence(b, eb, 10, 256).values;
  for (double v : as) CHECK(v <= 1 + 1e-8);
  CHECK(*std::min_element(as.begin(), as.end()) < 1);
  CHECK(std::pow(as[9], 1.0 / 10) < std::pow(as[3], 1.0 / 4));

  auto bs = gf::b_sequence(b, eb, 10, 256).values;
  for (double v : bs) CHECK(v <= 1 + 1e-8);
  for (int n = 1; n <= 5; ++n)
    for (int m = 1; m <= 5; ++m) CHECK(bs[n + m - 1] <= bs[n - 1] * bs[m - 1] * (1 + 1e-6));
}

TEST_CASE("coboundary test") {
  auto ra = gf::coboundary_test(MarkovSystem(preset("SYS-A")));
  CHECK(ra.cohomologous);
  REQUIRE(ra.chi.size() == 2);
  CHECK(ra.chi[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ra.chi[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gf::coboundary_theta(MarkovSystem(preset("SYS-A")), 0.3) == doctest::Approx(0.0));

  MarkovSystem lin(linear_roof());
  auto rl = gf::coboundary_test(lin);
  CHECK(rl.cohomologous);
  CHECK(rl.chi[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rl.chi[1] == doctest::Approx(0.5).epsilon(1e-9));
  double t1 = gf::coboundary_theta(lin, 0.2), t2 = gf::coboundary_theta(lin, 0.8);
  CHECK((t2 - t1) / 0.6 == doctest::Approx(-0.5).epsilon(1e-9));

  MarkovSystem b(preset("SYS-B"));
  auto r20 = gf::coboundary_test(b, 20, 1e-6), r40 = gf::coboundary_test(b, 40, 1e-6);
  CHECK_FALSE(r20.cohomologous);
  CHECK_FALSE(r40.cohomologous);
  CHECK(r40.residual > 1e-5);
  CHECK(std::abs(r20.residual - r40.residual) <= 1e-3 * r40.residual);
  CHECK(r40.theta_difference > 1e-6);
}

TEST_CASE("trichotomy consistency") {
  for (const char* name : {"SYS-A", "DOUBLING-LINEAR-ROOF", "SYS-B", "SYS-C"}) {
    MarkovSystem sys(preset(name));
    gf::TransferOperator op(sys, 512);
    auto e = gf::eigendata(op, 0.0);
    bool cob = gf::coboundary_test(sys).cohomologous;
    auto as = gf::a_sequence(op, e, 8, 128, 256).values;
    auto bs = gf::b_sequence(op, e, 8, 128, 256).values;
    bool a_one = std::all_of(as.begin(), as.end(), [](double v) { return std::abs(v - 1) <= 1e-6; });
    bool b_one = std::all_of(bs.begin(), bs.end(), [](double v) { return std::abs(v - 1) <= 1e-6; });
    INFO(name);
    CHECK(cob == a_one);
    CHECK(a_one == b_one);
  }
}

TEST_CASE("UNI from transversality") {
  MarkovSystem b(preset("SYS-B"));
  auto r = gf::uni_from_transversality(b, 0.05, 1024);
  CHECK(r.n2 == 4);
  CHECK(r.n1 == static_cast<int>(std::floor(std::log(1024.0))));
  CHECK(r.D == gf::c7(b) / 2 * std::pow(2.0, -r.n2));
  CHECK(r.Delta == doctest::Approx(4 * std::numbers::pi / (gf::c7(b) * 0.05)));
  CHECK(r.points_with_pair == r.points);
  CHECK(r.pass_rate == 1.0);
  CHECK(r.worst_margin >= 0);

  auto ra = gf::uni_from_transversality(MarkovSystem(preset("SYS-A")), 0.05, 1024);
  CHECK(ra.no_transversal_pair);
  CHECK(ra.points_with_pair == 0);
}

}  // TEST_SUITE
