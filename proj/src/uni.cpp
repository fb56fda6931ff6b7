#include "gibbsflow/uni.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

#include "gibbsflow/errors.hpp"

namespace gf {

double c7(const MarkovSystem& sys) {
  auto rep = validate(sys);
  double l = 1 - 1 / rep.lambda;
  return std::max(2 * rep.C4 * rep.rho / l, l * rep.C4);
}

PsiFunction::PsiFunction(const MarkovSystem& sys, Word w, Word wbar)
    : sys_(&sys), w_(std::move(w)), wbar_(std::move(wbar)) {
  if (w_.empty() || w_.size() != wbar_.size()) throw PreconditionFailed("psi needs two words of equal length");
  int lo = std::max(sys.image_lo(w_.back()), sys.image_lo(wbar_.back()));
  int hi = std::min(sys.image_hi(w_.back()), sys.image_hi(wbar_.back()));
  if (lo >= hi) throw EmptyDomain("the two inverse branches have disjoint domains");
  left_ = sys.left(lo);
  right_ = sys.right(hi - 1);
}

double PsiFunction::operator()(double x) const { return along(*sys_, w_, x).Sr - along(*sys_, wbar_, x).Sr; }

double PsiFunction::derivative(double x) const {
  auto p = along(*sys_, w_, x), q = along(*sys_, wbar_, x);
  return p.dSr / p.dTn - q.dSr / q.dTn;
}

ConeInterval cone_of(const Preimage& p, double C7) {
  double c = -p.dSr / p.dTn, rad = C7 / std::abs(p.dTn);
  return {c - rad, c + rad};
}

namespace {

Preimage forward(const MarkovSystem& sys, double x, int n, double* end = nullptr) {
  Preimage p;
  p.x = x;
  for (int k = 0; k < n; ++k) {
    int e = sys.element_of(x);
    p.word.push_back(e);
    p.dSr += sys.dr(e, x) * p.dTn;
    p.dTn *= sys.dT(e, x);
    x = sys.T(e, x);
  }
  if (end) *end = x;
  return p;
}

}  // namespace

ConeInterval cone_image(const MarkovSystem& sys, double x, int n, double C7) { return cone_of(forward(sys, x, n), C7); }

bool transversal(const MarkovSystem& sys, double x1, double x2, int n, double C7) {
  double y1 = 0, y2 = 0;
  auto p1 = forward(sys, x1, n, &y1), p2 = forward(sys, x2, n, &y2);
  if (std::abs(y1 - y2) > 1e-9) throw NotSiblings("T^n x1 and T^n x2 differ by " + std::to_string(std::abs(y1 - y2)));
  return !cone_of(p1, C7).intersects(cone_of(p2, C7));
}

UniReport check_uni(const MarkovSystem& sys, int n, double R, int grid, int ball_grid) {
  UniReport rep;
  const int m = sys.size();
  auto cyl = cylinders(sys, n);
  auto full = [&](int s) { return sys.image_lo(s) == 0 && sys.image_hi(s) == m; };
  for (std::size_t i = 0; i < cyl.size(); ++i) {
    if (!full(cyl[i].word.back())) continue;
    for (std::size_t j = i + 1; j < cyl.size(); ++j) {
      if (!full(cyl[j].word.back())) continue;
      PsiFunction psi(sys, cyl[i].word, cyl[j].word);
      double inf = HUGE_VAL;
      for (int k = 0; k <= 200; ++k) inf = std::min(inf, std::abs(psi.derivative(k / 200.0)));
      rep.D_full = std::max(rep.D_full, inf);
    }
  }
  rep.D_point = HUGE_VAL;
  for (int g = 0; g < grid; ++g) {
    double y = (g + 0.5) / grid;
    auto pre = preimages(sys, y, n);
    UniWitness best{y, {}, {}, 0.0};
    for (std::size_t i = 0; i < pre.size(); ++i)
      for (std::size_t j = i + 1; j < pre.size(); ++j) {
        PsiFunction psi(sys, pre[i].word, pre[j].word);
        double a = std::max(y - R, psi.domain_left()), b = std::min(y + R, psi.domain_right());
        double inf = HUGE_VAL;
        for (int k = 0; k < ball_grid; ++k) inf = std::min(inf, std::abs(psi.derivative(a + (b - a) * k / (ball_grid - 1))));
        if (inf > best.value || best.w1.empty()) best = {y, pre[i].word, pre[j].word, inf};
      }
    rep.D_point = std::min(rep.D_point, best.value);
    rep.witnesses.push_back(std::move(best));
  }
  return rep;
}

namespace {

struct Weighted {
  ConeInterval cone;
  double w;
};

std::vector<Weighted> weighted_cones(const MarkovSystem& sys, const GridFunction& f, double lambda, double y, int n,
                                     double C7, double* defect) {
  auto pre = preimages(sys, y, n);
  std::vector<Weighted> out;
  out.reserve(pre.size());
  double total = 0;
  for (const auto& p : pre) {
    double w = std::exp(p.Sphi) * f.eval(p.word.front(), p.x).real();
    out.push_back({cone_of(p, C7), w});
    total += w;
  }
  if (defect) {
    double raw = total / (std::pow(lambda, n) * f.eval(y).real());
    *defect = std::max(*defect, std::abs(raw - 1));
  }
  for (auto& q : out) q.w /= total;
  return out;
}

// max over x0 of the weight of cones meeting cone(x0): everything minus the
// cones entirely below and entirely above it.
double a_value(const std::vector<Weighted>& c) {
  const std::size_t k = c.size();
  std::vector<std::pair<double, double>> by_hi(k), by_lo(k);
  for (std::size_t i = 0; i < k; ++i) {
    by_hi[i] = {c[i].cone.hi, c[i].w};
    by_lo[i] = {c[i].cone.lo, c[i].w};
  }
  std::sort(by_hi.begin(), by_hi.end());
  std::sort(by_lo.begin(), by_lo.end());
  std::vector<double> pre_hi(k + 1, 0.0), suf_lo(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) pre_hi[i + 1] = pre_hi[i] + by_hi[i].second;
  for (std::size_t i = k; i-- > 0;) suf_lo[i] = suf_lo[i + 1] + by_lo[i].second;
  double best = 0;
  for (const auto& x0 : c) {
    auto below = std::lower_bound(by_hi.begin(), by_hi.end(), std::make_pair(x0.cone.lo, -HUGE_VAL)) - by_hi.begin();
    auto above = std::upper_bound(by_lo.begin(), by_lo.end(), std::make_pair(x0.cone.hi, HUGE_VAL)) - by_lo.begin();
    best = std::max(best, pre_hi.back() - pre_hi[below] - suf_lo[above]);
  }
  return best;
}

// Heaviest stabbing of closed intervals by one slope.
double b_value(const std::vector<Weighted>& c) {
  std::vector<std::pair<double, double>> ev;
  ev.reserve(2 * c.size());
  for (const auto& q : c) {
    ev.push_back({q.cone.lo, q.w});
    ev.push_back({q.cone.hi, -q.w});
  }
  // Starts (positive weight) before ends at the same coordinate.
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  });
  double run = 0, best = 0;
  for (const auto& e : ev) {
    run += e.second;
    best = std::max(best, run);
  }
  return best;
}

void require_sigma_zero(const EigenData& e) {
  if (e.sigma != 0) throw PreconditionFailed("a(n) and b(n) use the sigma = 0 eigendata");
}

}  // namespace

double a_at(const TransferOperator& op, const EigenData& eig0, double y, int n, double C7) {
  require_sigma_zero(eig0);
  return a_value(weighted_cones(op.system(), eig0.f_function(op), eig0.lambda, y, n, C7, nullptr));
}

double b_at(const TransferOperator& op, const EigenData& eig0, double y, int n, double C7) {
  require_sigma_zero(eig0);
  return b_value(weighted_cones(op.system(), eig0.f_function(op), eig0.lambda, y, n, C7, nullptr));
}

std::pair<SequenceReport, SequenceReport> ab_sequences(const TransferOperator& op, const EigenData& eig0, int n_max,
                                                       int grid, std::size_t max_midpoints, std::size_t cap) {
  require_sigma_zero(eig0);
  const auto& sys = op.system();
  const double C7 = c7(sys);
  auto f = eig0.f_function(op);
  SequenceReport A, B;
  for (int n = 1; n <= n_max; ++n) {
    if (count_words(sys, n) > static_cast<long double>(cap))
      throw CapExceeded("preimage enumeration at depth " + std::to_string(n) + " exceeds cap");
    std::vector<double> ys;
    for (int g = 0; g < grid; ++g) ys.push_back((g + 0.5) / grid);
    auto cyl = cylinders(sys, n, cap);
    std::size_t stride = std::max<std::size_t>(1, (cyl.size() + max_midpoints - 1) / std::max<std::size_t>(1, max_midpoints));
    for (std::size_t k = 0; k < cyl.size() && max_midpoints > 0; k += stride) ys.push_back(cyl[k].mid());
    double best_a = -1, best_b = -1, ya = 0, yb = 0;
    for (double y : ys) {
      auto c = weighted_cones(sys, f, eig0.lambda, y, n, C7, &A.max_weight_defect);
      double a = a_value(c), b = b_value(c);
      if (a > best_a) best_a = a, ya = y;
      if (b > best_b) best_b = b, yb = y;
    }
    if (best_a > 1 + 1e-8 || best_b > 1 + 1e-8)
      throw PreconditionFailed("a(n) or b(n) exceeds 1: normalization broken");
    A.values.push_back(best_a);
    A.argmax_y.push_back(ya);
    B.values.push_back(best_b);
    B.argmax_y.push_back(yb);
  }
  B.max_weight_defect = A.max_weight_defect;
  return {A, B};
}

SequenceReport a_sequence(const TransferOperator& op, const EigenData& eig0, int n_max, int grid,
                          std::size_t max_midpoints, std::size_t cap) {
  return ab_sequences(op, eig0, n_max, grid, max_midpoints, cap).first;
}

SequenceReport b_sequence(const TransferOperator& op, const EigenData& eig0, int n_max, int grid,
                          std::size_t max_midpoints, std::size_t cap) {
  return ab_sequences(op, eig0, n_max, grid, max_midpoints, cap).second;
}

namespace {

// theta on each element from a fixed backward chain of inverse branches,
// truncated at J terms, with per-element constants chosen so that theta is
// continuous across partition points.
class Theta {
 public:
  Theta(const MarkovSystem& sys, int J, bool lowest) : sys_(&sys) {
    const int m = sys.size();
    for (int e = 0; e < m; ++e) {
      Word chain;
      int cur = e;
      for (int j = 0; j < J; ++j) {
        int pick = -1;
        for (int i = 0; i < m; ++i)
          if (sys.admissible(i, cur) && (pick < 0 || !lowest)) pick = i;
        chain.push_back(pick);
        cur = pick;
      }
      words_.emplace_back(chain.rbegin(), chain.rend());
      base_.push_back(along(sys, words_.back(), 0.5 * (sys.left(e) + sys.right(e))).Sr);
    }
    offset_.assign(m, 0.0);
    for (int k = 1; k < m; ++k)
      offset_[k] = offset_[k - 1] + raw(k - 1, sys.left(k)) - raw(k, sys.left(k));
  }
  double value(int e, double y) const { return raw(e, y) + offset_[e]; }
  double derivative(int e, double y) const {
    auto p = along(*sys_, words_[e], y);
    return p.dSr / p.dTn;
  }

 private:
  double raw(int e, double y) const { return along(*sys_, words_[e], y).Sr - base_[e]; }
  const MarkovSystem* sys_;
  std::vector<Word> words_;
  std::vector<double> base_, offset_;
};

}  // namespace

double coboundary_theta(const MarkovSystem& sys, double y, int J_trunc) {
  return Theta(sys, J_trunc, true).value(sys.element_of(y), y);
}

CoboundaryReport coboundary_test(const MarkovSystem& sys, int J_trunc, double tol, int grid) {
  if (J_trunc < 1) throw PreconditionFailed("truncation must be >= 1");
  auto rep_v = validate(sys);
  Theta lo(sys, J_trunc, true), hi(sys, J_trunc, false);
  CoboundaryReport rep;
  rep.truncation = J_trunc;
  rep.tail_bound = rep_v.C4 * std::pow(rep_v.lambda, -J_trunc) / (1 - 1 / rep_v.lambda);
  for (int i = 0; i < sys.size(); ++i) {
    double mn = HUGE_VAL, mx = -HUGE_VAL, sum = 0;
    for (int g = 0; g < grid; ++g) {
      double x = sys.left(i) + sys.length(i) * g / (grid - 1);
      double Tx = sys.T(i, x);
      double v = sys.r(i, x) - lo.value(sys.element_of(Tx), Tx) + lo.value(i, x);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      sum += v;
      rep.theta_difference = std::max(rep.theta_difference, std::abs(lo.derivative(i, x) - hi.derivative(i, x)));
    }
    rep.element_residuals.push_back(mx - mn);
    rep.chi.push_back(sum / grid);
    rep.residual = std::max(rep.residual, mx - mn);
  }
  rep.cohomologous = rep.residual < tol;
  return rep;
}

PointwiseUniReport uni_from_transversality(const MarkovSystem& sys, double delta, double b, double beta, int min_n2,
                                           int y_grid, int z_grid) {
  if (!(delta > 0 && delta < 1)) throw PreconditionFailed("delta must lie in (0, 1)");
  const double rho = validate(sys).rho;
  const double C7 = c7(sys);
  PointwiseUniReport rep;
  rep.n2 = static_cast<int>(std::floor(std::log(delta) / -std::log(rho)));
  if (rep.n2 < min_n2)
    throw PreconditionFailed("n2 = " + std::to_string(rep.n2) + " is below the configured minimum " + std::to_string(min_n2));
  rep.n1 = static_cast<int>(std::floor(beta * std::log(std::abs(b))));
  rep.n = rep.n1 + rep.n2;
  rep.Delta = C7 > 0 ? 4 * std::numbers::pi / (C7 * delta) : std::numeric_limits<double>::infinity();
  rep.radius = rep.Delta / std::abs(b);
  rep.D = C7 / 2 * std::pow(rho, -rep.n2);
  rep.worst_margin = HUGE_VAL;

  auto head_for = [&](int first) {
    std::deque<int> head;
    int cur = first;
    for (int k = 0; k < rep.n1; ++k) {
      int pick = 0;
      while (!sys.admissible(pick, cur)) ++pick;
      head.push_front(pick);
      cur = pick;
    }
    return Word(head.begin(), head.end());
  };

  for (int g = 0; g < y_grid; ++g) {
    double y = (g + 0.5) / y_grid;
    ++rep.points;
    auto tails = preimages(sys, y, rep.n2);
    int bi = -1, bj = -1;
    double gap = 0;
    for (std::size_t i = 0; i < tails.size(); ++i)
      for (std::size_t j = i + 1; j < tails.size(); ++j) {
        auto ci = cone_of(tails[i], C7), cj = cone_of(tails[j], C7);
        if (ci.intersects(cj)) continue;
        double sep = std::max(cj.lo - ci.hi, ci.lo - cj.hi);
        if (bi < 0 || sep > gap) bi = static_cast<int>(i), bj = static_cast<int>(j), gap = sep;
      }
    if (bi < 0) continue;
    ++rep.points_with_pair;
    Word w = head_for(tails[bi].word.front()), wb = head_for(tails[bj].word.front());
    w.insert(w.end(), tails[bi].word.begin(), tails[bi].word.end());
    wb.insert(wb.end(), tails[bj].word.begin(), tails[bj].word.end());
    PsiFunction psi(sys, w, wb);
    double a = std::max(y - rep.radius, psi.domain_left()), c = std::min(y + rep.radius, psi.domain_right());
    double inf = HUGE_VAL;
    for (int k = 0; k < z_grid; ++k) inf = std::min(inf, std::abs(psi.derivative(a + (c - a) * k / (z_grid - 1))));
    double margin = inf - rep.D;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin >= 0) ++rep.points_passing;
    rep.witnesses.push_back({y, w, wb, inf});
  }
  rep.no_transversal_pair = rep.points_with_pair == 0;
  rep.pass_rate = rep.points_with_pair ? static_cast<double>(rep.points_passing) / rep.points_with_pair : 0.0;
  if (rep.points_with_pair == 0) rep.worst_margin = 0;
  return rep;
}

}  // namespace gf
