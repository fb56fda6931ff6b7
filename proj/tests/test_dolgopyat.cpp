#include "doctest.h"

#include <cmath>
#include <numbers>

#include "gibbsflow/dolgopyat.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/gibbs.hpp"

using gf::cplx;
using gf::GridFunction;
using gf::MarkovSystem;
using gf::preset;

namespace {

GridFunction constant(const gf::TransferOperator& op, cplx c) {
  return GridFunction::sample(op.system(), op.N(), [=](int, double) { return c; });
}

gf::SystemSpec cosine_roof(double amplitude) {
  auto s = preset("SYS-A");
  s.name = "doubling-cos";
  s.roof = {"0.5 + " + std::to_string(amplitude) + "*cos(2*pi*x)", "0.5 + " + std::to_string(amplitude) + "*cos(2*pi*x)"};
  return s;
}

}  // namespace

TEST_SUITE("dolgopyat") {

TEST_CASE("eta0") { CHECK(gf::eta0() == doctest::Approx(0.8228756555).epsilon(1e-9)); }

TEST_CASE("C0 from its closed form") {
  MarkovSystem a(preset("SYS-A"));
  gf::TransferOperator opa(a, 512);
  auto ra = gf::c0(opa, gf::eigendata(opa, 0));
  CHECK(std::abs(ra.raw) < 1e-9);
  CHECK(ra.floored);
  CHECK(ra.value == 0.1);

  // f0 = 1 and phi = 0, so only 2 |r|_1 (1 - 1/2) = sup|r'| = 2 pi/3 remains.
  MarkovSystem b(preset("SYS-B"));
  gf::TransferOperator opb(b, 2048);
  auto eb = gf::eigendata(opb, 0);
  auto rb = gf::c0(opb, eb);
  CHECK(rb.value == doctest::Approx(2 * std::numbers::pi / 3).epsilon(1e-4));
  CHECK(!rb.floored);
  auto rd = gf::c0(opb, eb, gf::C0Variant::Divided);
  CHECK(rd.value == doctest::Approx(8 * std::numbers::pi / 3).epsilon(1e-4));

  MarkovSystem s1(cosine_roof(0.2)), s2(cosine_roof(0.4));
  gf::TransferOperator o1(s1, 512), o2(s2, 512);
  CHECK(gf::c0(o2, gf::eigendata(o2, 0)).value >= gf::c0(o1, gf::eigendata(o1, 0)).value);
}

TEST_CASE("cone C_b membership") {
  MarkovSystem a(preset("SYS-A"));
  gf::TransferOperator op(a, 256);
  auto one = constant(op, 1.0), zero = constant(op, 0.0);
  CHECK(gf::in_cone_b(one, zero, 100, 0.1));
  CHECK(gf::in_cone_b(one, one, 100, 0.1));
  auto two_x = GridFunction::sample(a, op.N(), [](int, double x) { return cplx(2 * x); });
  auto m = gf::cone_margins(one, two_x, 1, 0.1);
  CHECK(m.domination < 0);
  CHECK(!m.inside());
  // |v'| = 5 against C0 |b| = 4: Hoelder condition fails, domination holds.
  auto wave = GridFunction::sample(a, op.N(), [](int, double x) { return 0.5 * std::exp(cplx(0, 10 * x)); });
  auto mw = gf::cone_margins(one, wave, 4, 1.0);
  CHECK(mw.domination > 0);
  CHECK(mw.v_hoelder < 0);
  CHECK(gf::cone_margins(one, wave, 6, 1.0).inside());
}

TEST_CASE("parameters and delta constraints") {
  MarkovSystem b(preset("SYS-B"));
  const double C7 = 8 * std::numbers::pi / 3;
  auto p = gf::dolgopyat_params(b, 2 * std::numbers::pi / 3, 0.05, 1024);
  CHECK(p.n2 == 4);
  CHECK(p.n1 == 6);
  CHECK(p.n == 10);
  CHECK(p.Delta == doctest::Approx(4 * std::numbers::pi / (C7 * 0.05)).epsilon(1e-9));
  CHECK(gf::delta_constraint_violations(p).empty());
  CHECK_NOTHROW(gf::check_delta_constraints(p));

  auto bad = gf::dolgopyat_params(b, 2 * std::numbers::pi / 3, 0.1, 1024);
  CHECK(gf::delta_constraint_violations(bad).size() == 2);  // C0 delta = 0.21, C7 delta = 0.84
  CHECK_THROWS_AS(gf::check_delta_constraints(bad), gf::PreconditionFailed);
  auto big_c0 = gf::dolgopyat_params(b, 4.0, 0.05, 1024);
  CHECK(gf::delta_constraint_violations(big_c0).size() == 1);  // only C0 delta = 0.2 > 1/6

  MarkovSystem a(preset("SYS-A"));
  auto pa = gf::dolgopyat_params(a, 0.1, 0.05, 1024);
  CHECK(pa.Delta == 1.0);
  CHECK(pa.Delta_source.find("fallback") != std::string::npos);

  for (double bb : gf::default_b_sweep()) CHECK(gf::beta_consistent(2, 1, 2.09, 1, bb));
  CHECK(!gf::beta_consistent(2, 1, 1e-6, 16, 1000));
  CHECK(gf::default_b_sweep().size() == 20);
  CHECK(gf::default_b_sweep().front() == doctest::Approx(128));
  CHECK(gf::default_b_sweep().back() == doctest::Approx(4096));
}

TEST_CASE("bump construction on SYS-B") {
  MarkovSystem b(preset("SYS-B"));
  gf::TransferOperator op(b, 4096);
  auto e = gf::eigendata(op, 0);
  const double C0 = gf::c0(op, e).value;
  auto p = gf::dolgopyat_params(b, C0, 0.05, 1024);
  auto one = constant(op, 1.0);
  auto res = gf::build_bump(op, e, 1024, one, one, p);
  CHECK(res.failed.empty());
  CHECK(res.winners.size() == res.q_count);
  CHECK(res.q_count == 16);  // dyadic depth 4: 1/16 >= 60/1024
  CHECK(res.chi.eta() >= gf::eta0());
  CHECK(res.chi.eta() < 1);
  auto audit = gf::audit_chi(res.chi, 1024, 0.05);
  CHECK(audit.ok);
  CHECK(audit.min_value == doctest::Approx(res.chi.eta()).epsilon(1e-12));
  CHECK(audit.max_derivative <= 1024 * (1 + 1e-9));
  CHECK(audit.max_derivative > 0.5 * 1024);

  for (const auto& w : res.winners) {
    CHECK(w.x1 - 0.05 / 2048 >= w.Q.left);
    CHECK(w.x1 + 0.05 / 2048 <= w.Q.right);
    CHECK(std::abs(w.x1 - w.x0) <= p.Delta / 1024 + 1e-15);
    // Exclusivity: swapping the roles swaps the label.
    auto c = gf::classify_case(op, e, 1024, one, one, w.w, w.wbar, w.x1, 0.05 / 1024);
    auto s = gf::classify_case(op, e, 1024, one, one, w.wbar, w.w, w.x1, 0.05 / 1024);
    CHECK(c.label == w.label);
    CHECK(s.label == (c.label == 'a' ? 'b' : 'a'));
  }

  // The plateau images sit inside the supports, inside the winning cylinders.
  auto sup = res.chi.supports(), pla = res.chi.plateaus();
  REQUIRE(sup.size() == pla.size());
  for (std::size_t j = 0; j < sup.size(); ++j) {
    CHECK(sup[j].first <= pla[j].first);
    CHECK(pla[j].second <= sup[j].second);
    double zm = 0.5 * (pla[j].first + pla[j].second);
    CHECK(res.chi(zm) == doctest::Approx(res.chi.eta()).epsilon(1e-12));
  }
  CHECK(res.chi(0.123456) == 1.0);
}

TEST_CASE("no witnesses for the constant roof") {
  MarkovSystem a(preset("SYS-A"));
  gf::TransferOperator op(a, 1024);
  auto e = gf::eigendata(op, 0);
  auto p = gf::dolgopyat_params(a, 0.1, 0.05, 1024);
  auto one = constant(op, 1.0);
  CHECK_THROWS_AS(gf::build_bump(op, e, 1024, one, one, p), gf::NoCancellationWitness);
  gf::BumpOptions opt;
  opt.allow_failures = true;
  auto res = gf::build_bump(op, e, 1024, one, one, p, opt);
  CHECK(res.winners.empty());
  CHECK(res.failed.size() == res.q_count);
}

TEST_CASE("cancellation check") {
  MarkovSystem b(preset("SYS-B"));
  gf::TransferOperator op(b, 4096);
  auto e = gf::eigendata(op, 0);
  auto one = constant(op, 1.0);
  auto p = gf::dolgopyat_params(b, gf::c0(op, e).value, 0.05, 1024);

  // chi = 1 reduces to the triangle inequality.
  auto wave = GridFunction::sample(b, op.N(), [](int, double x) { return 0.7 * std::exp(cplx(0, 30 * x)); });
  CHECK(gf::cancellation_check(op, e, 1024, one, wave, nullptr, p.n).holds);

  auto res = gf::build_bump(op, e, 1024, one, one, p);
  auto rep = gf::cancellation_check(op, e, 1024, one, one, &res.chi, p.n);
  CHECK(rep.holds);
  CHECK(rep.nodes_checked > 1024);

  // Sign test: at b = 0, v = u there is no cancellation, so any chi < 1 must
  // produce a negative margin of size (1 - eta) 2^-n at the plateau.
  gf::BumpFunction chi(op.system(), 1024, 0.05, 0.9, p.n, std::pow(2.0, -p.n));
  chi.add({gf::Word(p.n, 0), 0.5, 0});
  auto neg = gf::cancellation_check(op, e, 0, one, one, &chi, p.n);
  CHECK(!neg.holds);
  CHECK(neg.worst_margin == doctest::Approx(-0.1 * std::pow(2.0, -p.n)).epsilon(1e-6));
  auto zero_b_plain = gf::cancellation_check(op, e, 0, one, one, nullptr, p.n);
  CHECK(zero_b_plain.holds);
  CHECK(std::abs(zero_b_plain.worst_margin) < 1e-12);
}

TEST_CASE("bumped operator matches the preimage sum") {
  MarkovSystem b(preset("SYS-B"));
  gf::TransferOperator op(b, 1 << 15);
  auto e = gf::eigendata(op, 0);
  auto one = constant(op, 1.0);
  gf::BumpFunction chi(op.system(), 256, 0.05, 0.9, 3, 0.125);
  chi.add({gf::Word{1, 0, 1}, 0.3, 0});
  auto u1 = gf::apply_bumped(op, e, one, chi, 3);
  // At the centre only branch 101 is damped: 1 - (1 - eta)/8.
  int idx = 0;
  for (int i = 0; i < op.size(); ++i)
    if (std::abs(op.node(i) - 0.3) < std::abs(op.node(idx) - 0.3)) idx = i;
  double x = op.node(idx);
  double expect = 1 - (1 - chi.on_branch(0, x)) / 8;
  CHECK(chi.on_branch(0, x) < 1);
  CHECK(u1.values()[idx].real() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(u1.values()[0].real() == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("cone iteration on SYS-B") {
  MarkovSystem b(preset("SYS-B"));
  const double bb = 256, delta = 0.05;
  gf::GridPolicy g;
  g.per_b = 12 / delta;
  gf::TransferOperator op(b, g.nodes(bb));
  auto e = gf::eigendata(op, 0);
  auto p = gf::dolgopyat_params(b, gf::c0(op, e).value, delta, bb);
  auto v0 = GridFunction::sample(b, op.N(), [](int, double x) { return std::exp(cplx(0, 2 * std::numbers::pi * x)); });
  auto tr = gf::cone_iteration(op, e, p, 3, v0);
  REQUIRE(tr.steps.size() == 3);
  CHECK(tr.worst_cone >= -1e-8);
  CHECK(tr.worst_cancellation >= -1e-9);
  CHECK(tr.tau_max < 1);
  for (const auto& s : tr.steps) {
    CHECK(s.failed == 0);
    CHECK(s.v2 <= s.u2 * (1 + 1e-12));
  }
  MarkovSystem a(preset("SYS-A"));
  gf::TransferOperator opa(a, 1024);
  auto ea = gf::eigendata(opa, 0);
  auto pa = gf::dolgopyat_params(a, 0.1, delta, bb);
  CHECK_THROWS_AS(gf::cone_iteration(opa, ea, pa, 2, constant(opa, 1.0)), gf::NoCancellationWitness);
}

TEST_CASE("hypothesis family") {
  MarkovSystem b(preset("SYS-B"));
  gf::TransferOperator op(b, 8192);
  const double bb = 256;
  const int k = 5;
  auto fam = gf::hypothesis_family(op, bb, k, 6, 3);
  CHECK(fam.size() >= 5);
  const double thr = std::pow(2.0, k / 16.0);
  for (const auto& g : fam) CHECK(gf::norm_b(g, 1, bb) < thr * g.sup_abs());
}

TEST_CASE("L1 contraction") {
  gf::ContractionOptions opt;
  opt.grid.per_b = 32;
  opt.random_family = 4;
  MarkovSystem a(preset("SYS-A"));
  auto ra = gf::l1_contraction(a, 0, {2 * std::numbers::pi}, 1.0, opt);
  REQUIRE(ra.rows.size() == 1);
  CHECK(ra.rows[0].k == 1);
  CHECK(ra.rows[0].ratio == doctest::Approx(1).epsilon(1e-6));
  CHECK(ra.rows[0].witnesses_failed == -1);  // b below the partition threshold
  CHECK(!ra.rows[0].beta_ok);

  MarkovSystem b(preset("SYS-B"));
  auto rb = gf::l1_contraction(b, 0, {256, 512}, 1.0, opt);
  for (const auto& r : rb.rows) {
    CHECK(r.ratio < 1);
    CHECK(r.ratio <= r.c6);
    CHECK(r.witnesses_failed == 0);
    CHECK(r.beta_ok);
  }
  CHECK(rb.xi_hat > 0);

  // Monotone envelope L1 <= L2 <= Linf on one image.
  gf::TransferOperator op(b, 8192);
  auto e = gf::eigendata(op, 0);
  gf::NormalizedOperator L(op, e, 256);
  Eigen::VectorXcd w = L.apply(Eigen::VectorXcd::Ones(op.size()), 5);
  double l1 = gf::lp_norm(w, e.mu, 1), l2 = gf::lp_norm(w, e.mu, 2), li = w.cwiseAbs().maxCoeff();
  CHECK(l1 <= l2 * (1 + 1e-12));
  CHECK(l2 <= li * (1 + 1e-12));
}

TEST_CASE("norm contraction sweep") {
  gf::SweepOptions opt;
  opt.grid.per_b = 32;
  opt.random_functions = 20;
  opt.power_steps = 5;
  MarkovSystem a(preset("SYS-A"));
  auto ra = gf::norm_contraction_sweep(a, 0, {2 * std::numbers::pi}, 2.0, opt);
  CHECK(ra.rows[0].zeta_hat == doctest::Approx(1).epsilon(1e-6));

  MarkovSystem b(preset("SYS-B"));
  auto rb = gf::norm_contraction_sweep(b, 0, {256}, 2.0, opt);
  CHECK(rb.rows[0].k == 12);
  CHECK(rb.rows[0].zeta_hat < 1);
  CHECK(rb.rows[0].zeta_hat <= rb.rows[0].envelope);
}

}  // TEST_SUITE
