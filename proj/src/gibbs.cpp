#include "gibbsflow/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <boost/math/tools/roots.hpp>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/random.hpp"

namespace gf {

PathSums::PathSums(const TransferOperator& op, const EigenData& eig) : eig_(&eig), P_(op.branch_P(eig.sigma)) {}

Eigen::VectorXd PathSums::along(const Word& w) const {
  Eigen::VectorXd D = start();
  for (int s : w) D = extend(D, s);
  return D;
}

double PathSums::mass(const Eigen::VectorXd& D, int depth) const {
  return eig_->nu.dot(D) * std::pow(eig_->lambda, -depth);
}

namespace {

void check_cap(const MarkovSystem& sys, int n, std::size_t cap) {
  long double total = count_words(sys, n);
  if (total > static_cast<long double>(cap))
    throw CapExceeded(std::to_string(static_cast<double>(total)) + " cylinders at depth " + std::to_string(n) +
                      " exceed cap " + std::to_string(cap));
}

// Depth-first walk over admissible words up to max_depth; visit(word, D).
void walk(const MarkovSystem& sys, const PathSums& ps, int max_depth,
          const std::function<void(const Word&, const Eigen::VectorXd&)>& visit) {
  Word w;
  std::function<void(const Eigen::VectorXd&)> rec = [&](const Eigen::VectorXd& D) {
    visit(w, D);
    if (static_cast<int>(w.size()) == max_depth) return;
    for (int j = 0; j < sys.size(); ++j) {
      if (!sys.admissible(w.back(), j)) continue;
      w.push_back(j);
      rec(ps.extend(D, j));
      w.pop_back();
    }
  };
  Eigen::VectorXd f = ps.start();
  for (int i = 0; i < sys.size(); ++i) {
    w.assign(1, i);
    rec(ps.extend(f, i));
  }
}

std::vector<Expr> reduced_potential(const MarkovSystem& sys, double sigma) {
  std::vector<Expr> g;
  for (int i = 0; i < sys.size(); ++i) g.push_back(sys.potential_exprs()[i] - Expr::num(sigma) * sys.roof_exprs()[i]);
  return g;
}

}  // namespace

CylinderMeasureTable cylinder_masses(const TransferOperator& op, const EigenData& eig, int n, std::size_t cap) {
  const auto& sys = op.system();
  check_cap(sys, n, cap);
  PathSums ps(op, eig);
  std::map<Word, double> mass;
  walk(sys, ps, n, [&](const Word& w, const Eigen::VectorXd& D) {
    if (static_cast<int>(w.size()) == n) mass[w] = ps.mass(D, n);
  });
  CylinderMeasureTable t;
  t.depth = n;
  t.pressure = std::log(eig.lambda);
  for (auto& c : cylinders(sys, n, cap)) t.rows.push_back({c.word, c.left, c.right, mass.at(c.word)});
  return t;
}

GibbsAudit gibbs_audit(const TransferOperator& op, const EigenData& eig, int max_depth, std::size_t cap) {
  const auto& sys = op.system();
  check_cap(sys, max_depth, cap);
  PathSums ps(op, eig);
  auto g = reduced_potential(sys, eig.sigma);
  const double P = std::log(eig.lambda);
  GibbsAudit a;
  a.lower.assign(max_depth, HUGE_VAL);
  a.upper.assign(max_depth, 0.0);
  walk(sys, ps, max_depth, [&](const Word& w, const Eigen::VectorXd& D) {
    int n = static_cast<int>(w.size());
    double mid = make_cylinder(sys, w).mid();
    double ratio = ps.mass(D, n) / std::exp(-P * n + birkhoff_along(sys, g, w, mid));
    a.lower[n - 1] = std::min(a.lower[n - 1], ratio);
    a.upper[n - 1] = std::max(a.upper[n - 1], ratio);
  });
  double run = 0;
  for (int n = 0; n < max_depth; ++n) {
    run = std::max({run, a.upper[n], 1 / a.lower[n]});
    a.C5.push_back(run);
  }
  a.C5_lower = *std::min_element(a.lower.begin(), a.lower.end());
  a.C5_upper = *std::max_element(a.upper.begin(), a.upper.end());
  return a;
}

MuSampler::MuSampler(const TransferOperator& op, const EigenData& eig)
    : op_(&op), eig_(&eig), f_(eig.f_function(op)) {}

namespace {

std::vector<Transition> raw_transitions(const MarkovSystem& sys, const EigenData& eig, const GridFunction& f,
                                        double x, int element) {
  std::vector<Transition> out;
  double fx = f.eval(element, x).real();
  for (int i = 0; i < sys.size(); ++i) {
    if (!sys.admissible(i, element)) continue;
    double y = sys.inverse(i, x);
    double w = std::exp(sys.phi(i, y) - eig.sigma * sys.r(i, y)) * f.eval(i, y).real() / (eig.lambda * fx);
    out.push_back({i, y, w});
  }
  return out;
}

}  // namespace

std::vector<Transition> MuSampler::transitions(double x, int element) const {
  auto t = raw_transitions(op_->system(), *eig_, f_, x, element);
  double s = 0;
  for (const auto& q : t) s += q.p;
  for (auto& q : t) q.p /= s;
  return t;
}

double MuSampler::raw_weight_sum(double x, int element) const {
  double s = 0;
  for (const auto& q : raw_transitions(op_->system(), *eig_, f_, x, element)) s += q.p;
  return s;
}

std::vector<double> sample_mu(const TransferOperator& op, const EigenData& eig, std::size_t count,
                              std::uint64_t seed, const SamplerOptions& opt) {
  MuSampler sampler(op, eig);
  std::mt19937_64 rng(seed);
  double x = opt.x0;
  int e = op.system().element_of(x);
  auto step = [&] {
    auto t = sampler.transitions(x, e);
    double u = uniform53(rng), acc = 0;
    std::size_t k = 0;
    for (; k + 1 < t.size(); ++k) {
      acc += t[k].p;
      if (u < acc) break;
    }
    x = t[k].y;
    e = t[k].branch;
  };
  for (int k = 0; k < opt.burn_in; ++k) step();
  std::vector<double> out;
  out.reserve(count);
  while (out.size() < count) {
    for (int k = 0; k < opt.thin; ++k) step();
    out.push_back(x);
  }
  return out;
}

AdaptedPartition adapted_partition(const MarkovSystem& sys, double b, double Delta) {
  const double rho = validate(sys).rho;
  double min_len = HUGE_VAL;
  for (int i = 0; i < sys.size(); ++i) min_len = std::min(min_len, sys.length(i));
  if (!(std::abs(b) > 2 * Delta * rho / min_len))
    throw FrequencyTooSmall("|b| = " + std::to_string(std::abs(b)) + " must exceed 2*Delta*rho/min diam = " +
                            std::to_string(2 * Delta * rho / min_len));
  const double thr = 2 * Delta / std::abs(b) * (1 - 1e-12);
  AdaptedPartition p;
  p.b = b;
  p.Delta = Delta;
  std::function<void(const Cylinder&)> descend = [&](const Cylinder& c) {
    std::vector<Cylinder> kids;
    for (int j = 0; j < sys.size(); ++j) {
      if (!sys.admissible(c.word.back(), j)) continue;
      Word w = c.word;
      w.push_back(j);
      kids.push_back(make_cylinder(sys, w));
    }
    bool all_big = std::all_of(kids.begin(), kids.end(), [&](const Cylinder& k) { return k.diam() >= thr; });
    if (!all_big) {
      p.elements.push_back(c);
      return;
    }
    for (const auto& k : kids) descend(k);
  };
  for (int i = 0; i < sys.size(); ++i) descend(make_cylinder(sys, {i}));
  std::sort(p.elements.begin(), p.elements.end(),
            [](const Cylinder& x, const Cylinder& y) { return x.left < y.left; });
  return p;
}

namespace {

// mu([w] intersected with [a, b]) by refining straddling cylinders until they
// are small relative to the window, then prorating by length.
double mass_in(const MarkovSystem& sys, const PathSums& ps, Word& w, const Eigen::VectorXd& D, const Cylinder& c,
               double a, double b) {
  if (c.right <= a || c.left >= b) return 0;
  const int n = static_cast<int>(w.size());
  double m = ps.mass(D, n);
  if (c.left >= a && c.right <= b) return m;
  if (c.diam() <= 1e-4 * (b - a) || n >= 64)
    return m * (std::min(c.right, b) - std::max(c.left, a)) / c.diam();
  double total = 0;
  for (int j = 0; j < sys.size(); ++j) {
    if (!sys.admissible(w.back(), j)) continue;
    w.push_back(j);
    total += mass_in(sys, ps, w, ps.extend(D, j), make_cylinder(sys, w), a, b);
    w.pop_back();
  }
  return total;
}

}  // namespace

FedererAudit federer_audit(const TransferOperator& op, const EigenData& eig, double b, double Delta, double delta,
                           double K) {
  if (!(delta > 0 && delta < Delta)) throw PreconditionFailed("federer audit needs 0 < delta < Delta");
  const auto& sys = op.system();
  auto Q = adapted_partition(sys, b, Delta);
  PathSums ps(op, eig);
  const double len = 2 * delta / std::abs(b);
  FedererAudit r;
  r.gamma = r.gamma_left = HUGE_VAL;
  for (const auto& q : Q.elements) {
    Word w = q.word;
    Eigen::VectorXd D = ps.along(w);
    double mq = ps.mass(D, q.depth());
    double l = std::min(len, q.diam());
    double a = std::max(q.left, q.mid() - l / 2);
    double centred = mass_in(sys, ps, w, D, q, a, std::min(q.right, a + l));
    double flush = mass_in(sys, ps, w, D, q, q.left, q.left + l);
    r.gamma = std::min(r.gamma, centred / mq);
    r.gamma_left = std::min(r.gamma_left, flush / mq);
  }
  r.count = Q.elements.size();
  r.K_prime = K * std::pow(2 * Delta * validate(sys).rho, sys.alpha());
  r.delta_prime = r.gamma * std::exp(-r.K_prime);
  return r;
}

NormalizedPotential normalize_flow_potential(const MarkovSystem& sys, int N) {
  TransferOperator op(sys, N);
  auto log_lambda = [&](double P) { return std::log(eigendata(op, P).lambda); };
  const double lo = -50, hi = 50;
  double flo = log_lambda(lo), fhi = log_lambda(hi);
  if (!(flo > 0 && fhi < 0))
    throw BracketFailure("log lambda_0(phi - P r) has no sign change on [-50, 50]");
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10; };
  auto [a, b] = boost::math::tools::toms748_solve(log_lambda, lo, hi, flo, fhi, tol, iters);
  double P = 0.5 * (a + b);
  std::vector<Expr> phi;
  for (int i = 0; i < sys.size(); ++i) phi.push_back(sys.potential_exprs()[i] - Expr::num(P) * sys.roof_exprs()[i]);
  return {P, sys.with_potential(phi, sys.name() + "-normalized")};
}

}  // namespace gf
