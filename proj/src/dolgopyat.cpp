#include "gibbsflow/dolgopyat.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/gibbs.hpp"
#include "gibbsflow/random.hpp"
#include "gibbsflow/uni.hpp"

namespace gf {

double eta0() { return 0.5 * (std::sqrt(7.0) - 1); }

C0Report c0(const TransferOperator& op, const EigenData& eig0, C0Variant variant, double floor) {
  if (eig0.sigma != 0) throw PreconditionFailed("C0 uses the sigma = 0 eigendata");
  const auto& sys = op.system();
  const double alpha = sys.alpha();
  const double lam = validate(sys).lambda;
  auto f = eig0.f_function(op);
  auto phi = GridFunction::sample(sys, op.N(), [&](int e, double x) { return cplx(sys.phi(e, x)); });
  auto r = GridFunction::sample(sys, op.N(), [&](int e, double x) { return cplx(sys.r(e, x)); });
  C0Report rep;
  rep.variant = variant;
  rep.f_term = 4 / eig0.f.minCoeff() * hoelder_seminorm(f, alpha);
  rep.potential_term = 2 * (hoelder_seminorm(phi, alpha) + hoelder_seminorm(r, alpha));
  const double factor = 1 - std::pow(lam, -alpha);
  rep.raw = rep.f_term + (variant == C0Variant::Printed ? rep.potential_term * factor : rep.potential_term / factor);
  rep.floored = rep.raw < floor;
  rep.value = std::max(rep.raw, floor);
  return rep;
}

double ConeMargins::worst() const { return std::min({positivity, domination, log_hoelder, v_hoelder}); }

namespace {

double relative_margin(double seminorm, double bound) {
  if (bound > 0) return 1 - seminorm / bound;
  return seminorm <= 1e-15 ? 1.0 : -HUGE_VAL;
}

}  // namespace

ConeMargins cone_margins(const GridFunction& u, const GridFunction& v, double b, double C0, int random_pairs,
                         std::uint64_t seed) {
  const auto& sys = u.system();
  const double alpha = sys.alpha();
  const auto& U = u.values();
  const auto& V = v.values();
  const int N = u.N(), m = sys.size(), n = u.size();
  ConeMargins c;
  Eigen::VectorXd ur = U.real();
  c.positivity = ur.minCoeff() / ur.maxCoeff();
  c.domination = HUGE_VAL;
  for (int i = 0; i < n; ++i) c.domination = std::min(c.domination, (ur[i] - std::abs(V[i])) / ur[i]);
  if (c.positivity <= 0) {
    c.log_hoelder = c.v_hoelder = -HUGE_VAL;
    return c;
  }
  const double bound = C0 * std::pow(std::abs(b), alpha);
  GridFunction logu(sys, N);
  logu.values() = ur.array().log().cast<cplx>();
  c.log_hoelder = relative_margin(hoelder_seminorm(logu, alpha, random_pairs, seed), bound);

  double worst = 0;
  auto pair = [&](int i, int j) {
    double d = std::abs(u.node(i) - u.node(j));
    if (d == 0) return;
    worst = std::max(worst, std::abs(V[i] - V[j]) / (std::min(ur[i], ur[j]) * std::pow(d, alpha)));
  };
  for (int e = 0; e < m; ++e)
    for (int k = 0; k + 1 < N; ++k) pair(e * N + k, e * N + k + 1);
  std::mt19937_64 rng(seed + 1);
  std::uniform_int_distribution<int> pe(0, m - 1), pk(0, N - 1);
  for (int t = 0; t < random_pairs; ++t) {
    int e = pe(rng);
    pair(e * N + pk(rng), e * N + pk(rng));
  }
  c.v_hoelder = relative_margin(worst, bound);
  return c;
}

bool in_cone_b(const GridFunction& u, const GridFunction& v, double b, double C0) {
  return cone_margins(u, v, b, C0).inside();
}

DolgopyatParams dolgopyat_params(const MarkovSystem& sys, double C0, double delta, double b, double beta) {
  if (!(delta > 0 && delta < 1)) throw PreconditionFailed("delta must lie in (0, 1)");
  auto rep = validate(sys);
  DolgopyatParams p;
  p.b = b;
  p.delta = delta;
  p.C0 = C0;
  p.C7 = c7(sys);
  p.alpha = sys.alpha();
  p.lambda = rep.lambda;
  p.rho = rep.rho;
  p.beta = beta;
  p.n2 = static_cast<int>(std::floor(std::log(1 / delta) / std::log(rep.rho)));
  p.n1 = static_cast<int>(std::floor(beta * std::log(std::abs(b))));
  if (p.n2 < 1) throw PreconditionFailed("delta too large: n2 = " + std::to_string(p.n2));
  if (p.n1 < 1) throw PreconditionFailed("|b| too small: n1 = " + std::to_string(p.n1));
  p.n = p.n1 + p.n2;
  if (p.C7 > 0) {
    p.Delta = 4 * std::numbers::pi / (p.C7 * delta);
    p.Delta_source = "4 pi / (C7 delta)";
  } else {
    p.Delta = 1;
    p.Delta_source = "fallback 1 (C7 = 0)";
  }
  return p;
}

std::vector<std::string> delta_constraint_violations(const DolgopyatParams& p) {
  std::vector<std::string> out;
  const double t = p.C0 * std::pow(p.delta, p.alpha);
  if (!(t < 1.0 / 6)) out.push_back("C0 delta^alpha = " + std::to_string(t) + " is not < 1/6");
  if (!(2.0 / 3 * std::exp(t) < eta0()))
    out.push_back("(2/3) exp(C0 delta^alpha) = " + std::to_string(2.0 / 3 * std::exp(t)) + " is not < eta0");
  if (!(p.C7 * p.delta < std::numbers::pi / 6))
    out.push_back("C7 delta = " + std::to_string(p.C7 * p.delta) + " is not < pi/6");
  return out;
}

void check_delta_constraints(const DolgopyatParams& p) {
  auto v = delta_constraint_violations(p);
  if (v.empty()) return;
  std::string msg;
  for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
  throw PreconditionFailed(msg);
}

bool beta_consistent(double lambda, double alpha, double C0, double beta, double b) {
  int k = static_cast<int>(std::floor(beta * std::log(std::abs(b))));
  return std::pow(lambda, alpha * k / 16) <= C0 * std::pow(std::abs(b), alpha);
}

// ---------------------------------------------------------------------------

BumpFunction::BumpFunction(const MarkovSystem& sys, double b, double delta, double eta, int n, double M)
    : sys_(&sys), b_(std::abs(b)), delta_(delta), eta_(eta), M_(M), n_(n) {}

double BumpFunction::plateau_radius() const { return delta_ / (6 * b_); }
double BumpFunction::support_radius() const { return delta_ / (2 * b_); }

namespace {

// S(d): 1 on [0, a], 0 on [c, inf), C^1 smoothstep between.
double plateau_profile(double d, double a, double c) {
  if (d <= a) return 1;
  if (d >= c) return 0;
  double t = (d - a) / (c - a);
  return 1 - t * t * (3 - 2 * t);
}

double plateau_slope(double d, double a, double c) {
  if (d <= a || d >= c) return 0;
  double t = (d - a) / (c - a);
  return -6 * t * (1 - t) / (c - a);
}

}  // namespace

double BumpFunction::on_branch(std::size_t j, double y) const {
  double d = std::abs(y - pieces_[j].center);
  return 1 - (1 - eta_) * plateau_profile(d, plateau_radius(), support_radius());
}

double BumpFunction::on_branch_derivative(std::size_t j, double y) const {
  double dy = y - pieces_[j].center;
  double s = plateau_slope(std::abs(dy), plateau_radius(), support_radius());
  return -(1 - eta_) * s * (dy < 0 ? -1 : 1);
}

namespace {

// Forward image T^n z along a prescribed itinerary, with (T^n)'(z).
std::pair<double, double> forward_along(const MarkovSystem& sys, const Word& w, double z) {
  double d = 1;
  for (int s : w) {
    d *= sys.dT(s, z);
    z = sys.T(s, z);
  }
  return {z, d};
}

}  // namespace

double BumpFunction::operator()(double z) const {
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    const auto& w = pieces_[j].winner;
    auto cyl = make_cylinder(*sys_, w);
    if (z < cyl.left || z > cyl.right) continue;
    double y = forward_along(*sys_, w, z).first;
    if (std::abs(y - pieces_[j].center) < support_radius()) return on_branch(j, y);
  }
  return 1;
}

double BumpFunction::derivative(double z) const {
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    const auto& w = pieces_[j].winner;
    auto cyl = make_cylinder(*sys_, w);
    if (z < cyl.left || z > cyl.right) continue;
    auto [y, d] = forward_along(*sys_, w, z);
    if (std::abs(y - pieces_[j].center) < support_radius()) return on_branch_derivative(j, y) * d;
  }
  return 0;
}

namespace {

std::vector<std::pair<double, double>> branch_images(const MarkovSystem& sys,
                                                     const std::vector<BumpFunction::Piece>& pieces, double R) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : pieces) {
    int last = p.winner.back();
    double lo = std::max(p.center - R, sys.left(sys.image_lo(last)));
    double hi = std::min(p.center + R, sys.right(sys.image_hi(last) - 1));
    double a = along(sys, p.winner, lo).x, b = along(sys, p.winner, hi).x;
    out.emplace_back(std::min(a, b), std::max(a, b));
  }
  return out;
}

}  // namespace

std::vector<std::pair<double, double>> BumpFunction::supports() const {
  return branch_images(*sys_, pieces_, support_radius());
}

std::vector<std::pair<double, double>> BumpFunction::plateaus() const {
  return branch_images(*sys_, pieces_, plateau_radius());
}

// ---------------------------------------------------------------------------

namespace {

struct Weighted {
  const MarkovSystem* sys;
  GridFunction f, fu, fv;
  double sigma, lambda, b;

  Weighted(const TransferOperator& op, const EigenData& eig, double b_, const GridFunction& u, const GridFunction& v)
      : sys(&op.system()), f(eig.f_function(op)), fu(f), fv(f), sigma(eig.sigma), lambda(eig.lambda), b(b_) {
    fu.values() = f.values().cwiseProduct(u.values());
    fv.values() = f.values().cwiseProduct(v.values());
  }

  // A_{sigma}(f u) and A_s(f v) along one preimage.
  double Au(const Preimage& p) const {
    return std::exp(p.Sphi - sigma * p.Sr) * fu.eval_linear(p.word.front(), p.x).real();
  }
  cplx Av(const Preimage& p) const {
    return std::exp(cplx(p.Sphi - sigma * p.Sr, -b * p.Sr)) * fv.eval_linear(p.word.front(), p.x);
  }
  double scale(double x, int n) const {
    return std::pow(lambda, n) * f.eval_linear(sys->element_of(x), x).real();
  }
};

CaseResult classify(const Weighted& W, const Word& w, const Word& wbar, double x1, double radius, int subgrid) {
  const auto& sys = *W.sys;
  PsiFunction psi(sys, w, wbar);
  const double lo = std::max(x1 - radius, psi.domain_left()), hi = std::min(x1 + radius, psi.domain_right());
  const int n = static_cast<int>(w.size());
  const double e0 = eta0();
  CaseResult c;
  c.margin_a = c.margin_b = HUGE_VAL;
  for (int k = 0; k < subgrid; ++k) {
    double x = subgrid == 1 ? x1 : lo + (hi - lo) * k / (subgrid - 1);
    auto p = along(sys, w, x), q = along(sys, wbar, x);
    double uw = W.Au(p), ub = W.Au(q);
    double s = std::abs(W.Av(p) + W.Av(q));
    double sc = W.scale(x, n);
    c.margin_a = std::min(c.margin_a, (e0 * uw + ub - s) / sc);
    c.margin_b = std::min(c.margin_b, (uw + e0 * ub - s) / sc);
  }
  c.a_holds = c.margin_a >= 0;
  c.b_holds = c.margin_b >= 0;
  // Ties go to the lexicographically smaller word so that swapping the pair
  // swaps the label.
  bool prefer_a = c.margin_a > c.margin_b || (c.margin_a == c.margin_b && w < wbar);
  if (c.a_holds && (prefer_a || !c.b_holds))
    c.label = 'a';
  else if (c.b_holds)
    c.label = 'b';
  return c;
}

// Lowest-index admissible head of length n1 ending before symbol `first`.
Word greedy_head(const MarkovSystem& sys, int first, int n1) {
  Word head(n1);
  int cur = first;
  for (int k = n1 - 1; k >= 0; --k) {
    int pick = 0;
    while (!sys.admissible(pick, cur)) ++pick;
    head[k] = pick;
    cur = pick;
  }
  return head;
}

double max_expansion(const MarkovSystem& sys) {
  double L = 0;
  for (int i = 0; i < sys.size(); ++i)
    for (int k = 0; k <= 1024; ++k) L = std::max(L, std::abs(sys.dT(i, sys.left(i) + sys.length(i) * k / 1024)));
  return L;
}

}  // namespace

CaseResult classify_case(const TransferOperator& op, const EigenData& eig, double b, const GridFunction& u,
                         const GridFunction& v, const Word& w, const Word& wbar, double x1, double radius,
                         int subgrid) {
  Weighted W(op, eig, b, u, v);
  return classify(W, w, wbar, x1, radius, subgrid);
}

BumpResult build_bump(const TransferOperator& op, const EigenData& eig, double b, const GridFunction& u,
                      const GridFunction& v, const DolgopyatParams& p, const BumpOptions& opt) {
  const auto& sys = op.system();
  const double ab = std::abs(b);
  auto Q = adapted_partition(sys, b, p.Delta);
  Weighted W(op, eig, b, u, v);

  const double M = std::pow(max_expansion(sys), -p.n);
  const double eta = std::max(eta0(), 1 - p.delta * M / 4.5);
  BumpResult res;
  res.chi = BumpFunction(sys, b, p.delta, eta, p.n, M);
  res.q_count = Q.elements.size();
  const double half = p.delta / (2 * ab);

  for (std::size_t j = 0; j < Q.elements.size(); ++j) {
    const auto& q = Q.elements[j];
    const double x0 = q.mid();
    auto tails = preimages(sys, x0, p.n2);
    std::vector<std::tuple<double, int, int>> pairs;
    for (std::size_t a = 0; a < tails.size(); ++a)
      for (std::size_t c = a + 1; c < tails.size(); ++c) {
        auto ca = cone_of(tails[a], p.C7), cc = cone_of(tails[c], p.C7);
        if (ca.intersects(cc)) continue;
        pairs.emplace_back(std::max(cc.lo - ca.hi, ca.lo - cc.hi), static_cast<int>(a), static_cast<int>(c));
      }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
    if (static_cast<int>(pairs.size()) > opt.max_pairs) pairs.resize(opt.max_pairs);

    bool found = false;
    for (const auto& [gap, ia, ic] : pairs) {
      Word w = greedy_head(sys, tails[ia].word.front(), p.n1), wb = greedy_head(sys, tails[ic].word.front(), p.n1);
      w.insert(w.end(), tails[ia].word.begin(), tails[ia].word.end());
      wb.insert(wb.end(), tails[ic].word.begin(), tails[ic].word.end());
      double dl, dr;
      try {
        PsiFunction psi(sys, w, wb);
        dl = psi.domain_left();
        dr = psi.domain_right();
      } catch (const EmptyDomain&) {
        continue;
      }
      const double lo = std::max({x0 - p.Delta / ab, q.left + half, dl + half});
      const double hi = std::min({x0 + p.Delta / ab, q.right - half, dr - half});
      if (lo > hi) continue;
      std::vector<double> scan;
      if (x0 >= lo && x0 <= hi) scan.push_back(x0);
      for (int k = 0; k < opt.scan; ++k) scan.push_back(lo + (hi - lo) * (k + 0.5) / opt.scan);
      std::stable_sort(scan.begin(), scan.end(),
                       [&](double x, double y) { return std::abs(x - x0) < std::abs(y - x0); });
      for (double x1 : scan) {
        auto c = classify(W, w, wb, x1, p.delta / ab, opt.subgrid);
        if (!c.label) continue;
        Witness wit{static_cast<int>(j), q, x0, x1, w, wb, c.label == 'a' ? w : wb, c.label,
                    c.label == 'a' ? c.margin_a : c.margin_b};
        res.chi.add({wit.winner, x1, static_cast<int>(j)});
        res.winners.push_back(std::move(wit));
        found = true;
        break;
      }
      if (found) break;
    }
    if (!found) res.failed.push_back(static_cast<int>(j));
  }
  if (!res.failed.empty() && !opt.allow_failures) {
    std::ostringstream os;
    os << res.failed.size() << " of " << res.q_count << " adapted-partition elements have no witness (Q ids:";
    for (std::size_t k = 0; k < std::min<std::size_t>(res.failed.size(), 12); ++k) os << ' ' << res.failed[k];
    if (res.failed.size() > 12) os << " ...";
    os << ")";
    throw NoCancellationWitness(os.str());
  }
  return res;
}

ChiAudit audit_chi(const BumpFunction& chi, double b, double delta, int grid) {
  ChiAudit a;
  a.min_value = HUGE_VAL;
  a.max_value = -HUGE_VAL;
  auto visit = [&](double z) {
    double c = chi(z);
    a.min_value = std::min(a.min_value, c);
    a.max_value = std::max(a.max_value, c);
    a.max_derivative = std::max(a.max_derivative, std::abs(chi.derivative(z)));
  };
  for (int k = 0; k < grid; ++k) visit((k + 0.5) / grid);
  for (auto [lo, hi] : chi.supports())
    for (int k = 0; k < grid; ++k) visit(lo + (hi - lo) * k / (grid - 1));
  const double ab = std::abs(b);
  a.derivative_bound = std::min(6 * (1 - chi.eta()) * ab / (delta * chi.M()), ab);
  a.ok = a.min_value >= chi.eta() - 1e-15 && a.max_value <= 1 && a.max_derivative <= a.derivative_bound * (1 + 1e-9);
  return a;
}

namespace {

// Flat node indices within the support radius of some piece centre.
std::vector<int> support_nodes(const TransferOperator& op, const BumpFunction& chi) {
  std::vector<int> out;
  const auto& sys = op.system();
  const int N = op.N();
  const double R = chi.support_radius();
  for (const auto& p : chi.pieces()) {
    for (int e = 0; e < sys.size(); ++e) {
      if (p.center + R < sys.left(e) || p.center - R > sys.right(e)) continue;
      if (!sys.admissible(p.winner.back(), e)) continue;
      double t0 = (p.center - R - sys.left(e)) / sys.length(e) * (N - 1);
      double t1 = (p.center + R - sys.left(e)) / sys.length(e) * (N - 1);
      int k0 = std::max(0, static_cast<int>(std::floor(t0))), k1 = std::min(N - 1, static_cast<int>(std::ceil(t1)));
      for (int k = k0; k <= k1; ++k)
        if (std::abs(op.node(e * N + k) - p.center) < R) out.push_back(e * N + k);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

CancellationReport cancellation_check(const TransferOperator& op, const EigenData& eig, double b,
                                      const GridFunction& u, const GridFunction& v, const BumpFunction* chi, int n,
                                      int subsample, double slack) {
  const auto& sys = op.system();
  Weighted W(op, eig, b, u, v);
  std::map<Word, std::vector<std::size_t>> by_winner;
  std::vector<int> nodes;
  if (chi) {
    for (std::size_t j = 0; j < chi->pieces().size(); ++j) by_winner[chi->pieces()[j].winner].push_back(j);
    nodes = support_nodes(op, *chi);
  }
  const int stride = std::max(1, op.size() / std::max(1, subsample));
  for (int i = 0; i < op.size(); i += stride) nodes.push_back(i);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const double lam_n = std::pow(eig.lambda, n);
  const double R = chi ? chi->support_radius() : 0;
  CancellationReport rep;
  rep.worst_margin = HUGE_VAL;
  for (int idx : nodes) {
    const int e = idx / op.N();
    const double x = op.node(idx);
    cplx lhs = 0;
    double rhs = 0;
    for (const auto& p : preimages_from(sys, x, e, n)) {
      lhs += W.Av(p);
      double c = 1;
      if (chi) {
        auto it = by_winner.find(p.word);
        if (it != by_winner.end())
          for (std::size_t j : it->second)
            if (std::abs(x - chi->pieces()[j].center) < R) c = std::min(c, chi->on_branch(j, x));
      }
      rhs += c * W.Au(p);
    }
    const double sc = lam_n * eig.f[idx];
    rep.worst_margin = std::min(rep.worst_margin, (rhs - std::abs(lhs)) / sc);
  }
  rep.nodes_checked = nodes.size();
  rep.holds = rep.worst_margin >= -slack;
  return rep;
}

namespace {

GridFunction bumped(const TransferOperator& op, const EigenData& eig, const NormalizedOperator& L0,
                    const GridFunction& u, const BumpFunction& chi, int n) {
  const auto& sys = op.system();
  GridFunction out = L0.apply(u, n);
  GridFunction fu = eig.f_function(op);
  fu.values() = fu.values().cwiseProduct(u.values());
  const double lam_n = std::pow(eig.lambda, n), R = chi.support_radius();
  for (int idx : support_nodes(op, chi)) {
    const int e = idx / op.N();
    const double x = op.node(idx);
    for (std::size_t j = 0; j < chi.pieces().size(); ++j) {
      const auto& pc = chi.pieces()[j];
      if (std::abs(x - pc.center) >= R || !sys.admissible(pc.winner.back(), e)) continue;
      auto p = along(sys, pc.winner, x);
      double deficit = (1 - chi.on_branch(j, x)) * std::exp(p.Sphi - eig.sigma * p.Sr) *
                       fu.eval_linear(p.word.front(), p.x).real() / (lam_n * eig.f[idx]);
      out.values()[idx] -= deficit;
    }
  }
  return out;
}

double integral_sq(const GridFunction& g, const Eigen::VectorXd& mu) {
  return (g.values().cwiseAbs2().array() * mu.array()).sum();
}

}  // namespace

GridFunction apply_bumped(const TransferOperator& op, const EigenData& eig, const GridFunction& u,
                          const BumpFunction& chi, int n) {
  NormalizedOperator L0(op, eig, 0);
  return bumped(op, eig, L0, u, chi, n);
}

IterationTrace cone_iteration(const TransferOperator& op, const EigenData& eig, const DolgopyatParams& p, int m_max,
                              const GridFunction& v0, const BumpOptions& opt) {
  check_delta_constraints(p);
  const auto& sys = op.system();
  NormalizedOperator L0(op, eig, 0), Ls(op, eig, p.b);
  GridFunction u = GridFunction::sample(sys, op.N(), [](int, double) { return cplx(1); });
  GridFunction v = v0;
  const double sup = v.sup_abs();
  if (!(sup > 0)) throw PreconditionFailed("starting v must be nonzero");
  v.values() /= sup;

  IterationTrace tr;
  tr.params = p;
  tr.worst_cone = tr.worst_cancellation = HUGE_VAL;
  for (int m = 0; m < m_max; ++m) {
    IterationStep st;
    st.m = m;
    st.cone = cone_margins(u, v, p.b, p.C0);
    st.u2 = integral_sq(u, eig.mu);
    st.v2 = integral_sq(v, eig.mu);
    auto bump = build_bump(op, eig, p.b, u, v, p, opt);
    st.witnesses = bump.winners.size();
    st.failed = bump.failed.size();
    st.eta = bump.chi.eta();
    st.cancellation_margin = cancellation_check(op, eig, p.b, u, v, &bump.chi, p.n).worst_margin;
    GridFunction un = bumped(op, eig, L0, u, bump.chi, p.n);
    GridFunction vn = Ls.apply(v, p.n);
    st.tau_hat = integral_sq(un, eig.mu) / st.u2;
    tr.tau_max = std::max(tr.tau_max, st.tau_hat);
    tr.worst_cone = std::min(tr.worst_cone, st.cone.worst());
    tr.worst_cancellation = std::min(tr.worst_cancellation, st.cancellation_margin);
    tr.steps.push_back(st);
    u = std::move(un);
    v = std::move(vn);
  }
  tr.worst_cone = std::min(tr.worst_cone, cone_margins(u, v, p.b, p.C0).worst());
  return tr;
}

// ---------------------------------------------------------------------------

int GridPolicy::nodes(double b) const {
  double want = std::ceil(per_b * std::abs(b));
  return static_cast<int>(std::clamp(want, static_cast<double>(N_min), static_cast<double>(N_max)));
}

std::vector<GridFunction> hypothesis_family(const TransferOperator& op, double b, int k, int random_count,
                                            std::uint64_t seed) {
  const auto& sys = op.system();
  const double alpha = sys.alpha();
  const double thr = std::pow(validate(sys).lambda, alpha * k / 16);
  // For alpha = 1 a plane wave exp(i kappa x) has seminorm kappa.
  const double kappa_max = (thr - 1) * (1 + std::pow(std::abs(b), alpha));
  std::vector<GridFunction> out;
  auto admit = [&](GridFunction g) {
    if (norm_b(g, alpha, b) < thr * g.sup_abs()) out.push_back(std::move(g));
  };
  auto wave = [&](double kappa, double phase) {
    return GridFunction::sample(sys, op.N(), [=](int, double x) { return std::exp(cplx(0, kappa * x + phase)); });
  };
  admit(GridFunction::sample(sys, op.N(), [](int, double) { return cplx(1); }));
  for (double c : {0.2, 0.5, 0.9}) {
    admit(wave(c * kappa_max, 0));
    admit(wave(-c * kappa_max, 0));
  }
  std::mt19937_64 rng(seed);
  for (int t = 0; t < random_count; ++t) {
    cplx a[3];
    double kap[3];
    for (int j = 0; j < 3; ++j) {
      a[j] = cplx(2 * uniform53(rng) - 1, 2 * uniform53(rng) - 1);
      kap[j] = (2 * uniform53(rng) - 1) * kappa_max;
    }
    for (double scale = 1; scale > 1e-3; scale *= 0.5) {
      auto g = GridFunction::sample(sys, op.N(), [&](int, double x) {
        cplx s = 1.5;
        for (int j = 0; j < 3; ++j) s += a[j] * std::exp(cplx(0, scale * kap[j] * x)) / 3.0;
        return s;
      });
      const auto before = out.size();
      admit(std::move(g));
      if (out.size() > before) break;
    }
  }
  return out;
}

namespace {

int witness_failures(const TransferOperator& op, const EigenData& eig, double b, double C0, double delta,
                     double beta) {
  try {
    auto p = dolgopyat_params(op.system(), C0, delta, b, beta);
    GridFunction one = GridFunction::sample(op.system(), op.N(), [](int, double) { return cplx(1); });
    BumpOptions bo;
    bo.allow_failures = true;
    return static_cast<int>(build_bump(op, eig, b, one, one, p, bo).failed.size());
  } catch (const FrequencyTooSmall&) {
    return -1;
  } catch (const PreconditionFailed&) {
    return -1;
  }
}

double fit_through_origin(const std::vector<ContractionRow>& rows, double lambda) {
  double num = 0, den = 0;
  for (const auto& r : rows) {
    if (!(r.ratio > 0)) continue;
    num += r.k * (-std::log(r.ratio) / std::log(lambda));
    den += static_cast<double>(r.k) * r.k;
  }
  return den > 0 ? num / den : 0.0;
}

}  // namespace

ContractionReport l1_contraction(const MarkovSystem& sys, double sigma, const std::vector<double>& b_list,
                                 double beta, const ContractionOptions& opt) {
  const auto v = validate(sys);
  ContractionReport rep;
  {
    TransferOperator op0(sys, 1024);
    rep.C0 = c0(op0, eigendata(op0, 0)).value;
  }
  for (double b : b_list) {
    ContractionRow row;
    row.b = b;
    row.beta_ok = beta_consistent(v.lambda, sys.alpha(), rep.C0, beta, b);
    row.k = static_cast<int>(std::floor(beta * std::log(std::abs(b))));
    if (row.k < 1) throw PreconditionFailed("k = floor(beta log|b|) < 1 at b = " + std::to_string(b));
    row.N = opt.grid.nodes(b);
    TransferOperator op(sys, row.N);
    auto eig = eigendata(op, sigma);
    NormalizedOperator L(op, eig, b);
    auto family = hypothesis_family(op, b, row.k, opt.random_family, opt.seed);
    row.family_size = static_cast<int>(family.size());
    for (const auto& g : family) {
      auto out = L.apply(g.values(), row.k);
      row.ratio = std::max(row.ratio, lp_norm(out, eig.mu, 1) / g.sup_abs());
    }
    row.c6 = c6_bound(op, eig);
    row.zeta_hat = std::pow(row.ratio, 1.0 / row.k);
    row.xi_hat = -std::log(row.ratio) / (row.k * std::log(v.lambda));
    if (opt.witness_diagnostic) {
      if (sigma == 0) {
        row.witnesses_failed = witness_failures(op, eig, b, rep.C0, opt.delta, beta);
      } else {
        auto eig0 = eigendata(op, 0);
        row.witnesses_failed = witness_failures(op, eig0, b, rep.C0, opt.delta, beta);
      }
    }
    rep.rows.push_back(row);
  }
  rep.xi_hat = fit_through_origin(rep.rows, v.lambda);
  return rep;
}

ContractionReport norm_contraction_sweep(const MarkovSystem& sys, double sigma, const std::vector<double>& b_list,
                                         double B, const SweepOptions& opt) {
  const double alpha = sys.alpha();
  ContractionReport rep;
  for (double b : b_list) {
    ContractionRow row;
    row.b = b;
    row.k = std::max(1, static_cast<int>(std::ceil(B * std::log(std::abs(b)))));
    row.N = opt.grid.nodes(b);
    TransferOperator op(sys, row.N);
    auto eig = eigendata(op, sigma);
    NormalizedOperator L(op, eig, b);
    std::mt19937_64 rng(opt.seed);
    GridFunction best(op.system(), op.N());
    double best_ratio = -1;
    auto try_fn = [&](const GridFunction& g) {
      GridFunction out(op.system(), op.N());
      out.values() = L.apply(g.values(), row.k);
      double r = norm_b(out, alpha, b) / norm_b(g, alpha, b);
      if (r > best_ratio) {
        best_ratio = r;
        best = g;
      }
      return out;
    };
    try_fn(GridFunction::sample(op.system(), op.N(), [](int, double) { return cplx(1); }));
    for (int t = 0; t < opt.random_functions; ++t) {
      cplx a[4];
      double kap[4];
      for (int j = 0; j < 4; ++j) {
        a[j] = cplx(2 * uniform53(rng) - 1, 2 * uniform53(rng) - 1);
        kap[j] = (2 * uniform53(rng) - 1) * std::abs(b) * uniform53(rng);
      }
      try_fn(GridFunction::sample(op.system(), op.N(), [&](int, double x) {
        cplx s = 0;
        for (int j = 0; j < 4; ++j) s += a[j] * std::exp(cplx(0, kap[j] * x));
        return s;
      }));
    }
    // Power refinement from the best candidate.
    GridFunction g = best;
    for (int t = 0; t < opt.power_steps; ++t) {
      GridFunction out = try_fn(g);
      double nb = norm_b(out, alpha, b);
      if (!(nb > 0)) break;
      out.values() /= nb;
      g = std::move(out);
    }
    row.ratio = best_ratio;
    row.zeta_hat = std::pow(best_ratio, 1.0 / row.k);
    row.c6 = c6_bound(op, eig);
    double c8 = lasota_yorke_audit(op, eig, b, 8, opt.seed, 8).max_C8;
    row.envelope = std::pow(row.c6 + c8, 1.0 / row.k);
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<double> default_b_sweep() {
  std::vector<double> out;
  for (int i = 0; i < 20; ++i) out.push_back(std::pow(2.0, 7 + 5.0 * i / 19));
  return out;
}

}  // namespace gf
