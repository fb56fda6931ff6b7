#include "gibbsflow/operator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

// Boost 1.74's pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "gibbsflow/errors.hpp"

namespace gf {

namespace {

double node_position(const MarkovSystem& sys, int N, int idx) {
  int e = idx / N, k = idx % N;
  if (k == N - 1) return sys.right(e);
  return sys.left(e) + sys.length(e) * k / (N - 1);
}

}  // namespace

GridFunction::GridFunction(const MarkovSystem& sys, int N) : sys_(&sys), N_(N), v_(Eigen::VectorXcd::Zero(sys.size() * N)) {
  if (N < 4) throw PreconditionFailed("grid needs at least 4 nodes per element");
}

double GridFunction::node(int idx) const { return node_position(*sys_, N_, idx); }

cplx GridFunction::eval(int e, double x) const {
  const double a = sys_->left(e), len = sys_->length(e);
  double t = std::clamp((x - a) / len, 0.0, 1.0) * (N_ - 1);
  int k = std::min(static_cast<int>(t), N_ - 2);
  // PCHIP slopes at k and k+1 only see nodes k-1..k+2, so a 4-node window
  // reproduces the full-element interpolant on [x_k, x_{k+1}].
  int s = std::clamp(k - 1, 0, N_ - 4);
  std::vector<double> xs(4), re(4), im(4);
  for (int q = 0; q < 4; ++q) {
    int idx = e * N_ + s + q;
    xs[q] = node(idx);
    re[q] = v_[idx].real();
    im[q] = v_[idx].imag();
  }
  std::vector<double> xs2 = xs;
  using boost::math::interpolators::pchip;
  double xc = std::clamp(x, a, a + len);
  pchip<std::vector<double>> pr(std::move(xs), std::move(re));
  pchip<std::vector<double>> pi(std::move(xs2), std::move(im));
  return {pr(xc), pi(xc)};
}

cplx GridFunction::eval_linear(int e, double x) const {
  double t = std::clamp((x - sys_->left(e)) / sys_->length(e), 0.0, 1.0) * (N_ - 1);
  int k = std::min(static_cast<int>(t), N_ - 2);
  double w = t - k;
  return (1 - w) * v_[e * N_ + k] + w * v_[e * N_ + k + 1];
}

void GridFunction::write_csv(std::ostream& os) const {
  os << "element_index,node_x,re,im\n";
  char buf[128];
  for (int i = 0; i < size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", element_of_node(i), node(i), v_[i].real(), v_[i].imag());
    os << buf;
  }
}

double hoelder_seminorm(const GridFunction& v, double alpha, int random_pairs, std::uint64_t seed) {
  const int N = v.N(), m = v.system().size();
  const auto& val = v.values();
  auto ratio = [&](int i, int j) {
    double d = std::abs(v.node(i) - v.node(j));
    return d > 0 ? std::abs(val[i] - val[j]) / std::pow(d, alpha) : 0.0;
  };
  double best = 0;
  for (int e = 0; e < m; ++e)
    for (int k = 0; k + 1 < N; ++k) best = std::max(best, ratio(e * N + k, e * N + k + 1));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pe(0, m - 1), pk(0, N - 1);
  for (int t = 0; t < random_pairs; ++t) {
    int e = pe(rng);
    best = std::max(best, ratio(e * N + pk(rng), e * N + pk(rng)));
  }
  return best;
}

double norm_b(const GridFunction& v, double alpha, double b) {
  return hoelder_seminorm(v, alpha) / (1 + std::pow(std::abs(b), alpha)) + v.sup_abs();
}

double lp_norm(const Eigen::VectorXcd& v, const Eigen::VectorXd& w, double p) {
  return std::pow(w.dot(v.cwiseAbs().array().pow(p).matrix()), 1 / p);
}

TransferOperator::TransferOperator(const MarkovSystem& sys, int N) : sys_(sys), N_(N) {
  if (N < 4) throw PreconditionFailed("grid needs at least 4 nodes per element");
  const int m = sys_.size();
  for (int idx = 0; idx < size(); ++idx) {
    const int e = idx / N_;
    const double x = node(idx);
    for (int i = 0; i < m; ++i) {
      if (!sys_.admissible(i, e)) continue;
      double y = sys_.inverse(i, x);
      double t = std::clamp((y - sys_.left(i)) / sys_.length(i), 0.0, 1.0) * (N_ - 1);
      int j = std::min(static_cast<int>(t), N_ - 2);
      samples_.push_back({idx, i, y, j, std::clamp(t - j, 0.0, 1.0), sys_.phi(i, y), sys_.r(i, y)});
    }
  }
}

double TransferOperator::node(int idx) const { return node_position(sys_, N_, idx); }

namespace {

template <class Scalar, class Weight>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> assemble(const TransferOperator& op, Weight&& weight,
                                                      int only_branch = -1) {
  std::vector<Eigen::Triplet<Scalar>> trip;
  trip.reserve(op.samples().size() * 2);
  const int N = op.N();
  for (const auto& s : op.samples()) {
    if (only_branch >= 0 && s.branch != only_branch) continue;
    Scalar c = weight(s);
    int col = s.branch * N + s.j;
    if (s.w < 1) trip.emplace_back(s.node, col, c * (1 - s.w));
    if (s.w > 0) trip.emplace_back(s.node, col + 1, c * s.w);
  }
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> M(op.size(), op.size());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace

SpMat TransferOperator::P(double sigma) const {
  return assemble<double>(*this, [&](const BranchSample& s) { return std::exp(s.phi - sigma * s.r); });
}

SpMatC TransferOperator::P(cplx s) const {
  return assemble<cplx>(*this, [&](const BranchSample& b) { return std::exp(b.phi - s * b.r); });
}

std::vector<SpMat> TransferOperator::branch_P(double sigma) const {
  std::vector<SpMat> out;
  for (int i = 0; i < sys_.size(); ++i)
    out.push_back(assemble<double>(*this, [&](const BranchSample& s) { return std::exp(s.phi - sigma * s.r); }, i));
  return out;
}

GridFunction TransferOperator::apply_P(cplx s, const GridFunction& v) const {
  GridFunction out(sys_, N_);
  out.values() = P(s) * v.values();
  return out;
}

GridFunction EigenData::f_function(const TransferOperator& op) const {
  GridFunction g(op.system(), op.N());
  g.values() = f.cast<cplx>();
  return g;
}

namespace {

// Leading eigenvalue/eigenvector of a nonnegative primitive matrix.
template <class Mat>
std::pair<double, Eigen::VectorXd> power_iterate(const Mat& M, double tol, int max_iter, int& iters) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M.rows());
  double lam = 0;
  for (iters = 1; iters <= max_iter; ++iters) {
    Eigen::VectorXd w = M * v;
    double next = w.sum() / v.sum();
    double scale = w.maxCoeff();
    if (!(scale > 0) || !std::isfinite(scale)) throw NoConvergence("power iteration degenerated");
    w /= scale;
    double change = (w - v).cwiseAbs().maxCoeff();
    v.swap(w);
    if (std::abs(next - lam) <= tol * next && change <= 1e-13) return {next, v};
    lam = next;
  }
  throw NoConvergence("power iteration did not converge in " + std::to_string(max_iter) + " iterations");
}

}  // namespace

EigenData eigendata(const TransferOperator& op, double sigma, double tol, int max_iter) {
  EigenData e;
  e.sigma = sigma;
  SpMat P = op.P(sigma);
  int it1 = 0, it2 = 0;
  auto [lam, f] = power_iterate(P, tol, max_iter, it1);
  Eigen::SparseMatrix<double, Eigen::RowMajor> Pt = P.transpose();
  auto [lam_t, nu] = power_iterate(Pt, tol, max_iter, it2);
  (void)lam_t;
  e.lambda = lam;
  e.iterations = std::max(it1, it2);
  e.nu = nu / nu.sum();
  e.f = f / e.nu.dot(f);
  e.mu = e.f.cwiseProduct(e.nu);
  e.mu /= e.mu.sum();
  return e;
}

NormalizedOperator::NormalizedOperator(const TransferOperator& op, const EigenData& eig, double b)
    : op_(&op), b_(b) {
  const double sigma = eig.sigma, lam = eig.lambda;
  const auto& f = eig.f;
  const int N = op.N();
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(op.samples().size() * 2);
  for (const auto& s : op.samples()) {
    cplx c = std::exp(cplx(s.phi - sigma * s.r, -b * s.r)) / (lam * f[s.node]);
    int col = s.branch * N + s.j;
    if (s.w < 1) trip.emplace_back(s.node, col, c * (1 - s.w) * f[col]);
    if (s.w > 0) trip.emplace_back(s.node, col + 1, c * s.w * f[col + 1]);
  }
  L_.resize(op.size(), op.size());
  L_.setFromTriplets(trip.begin(), trip.end());
}

Eigen::VectorXcd NormalizedOperator::apply(Eigen::VectorXcd v, int n) const {
  for (int k = 0; k < n; ++k) v = L_ * v;
  return v;
}

GridFunction NormalizedOperator::apply(const GridFunction& v, int n) const {
  GridFunction out(op_->system(), op_->N());
  out.values() = apply(v.values(), n);
  return out;
}

GridFunction apply_L(const TransferOperator& op, const EigenData& eig, double b, const GridFunction& v, int n) {
  return NormalizedOperator(op, eig, b).apply(v, n);
}

double c6_bound(const TransferOperator& op, const EigenData& eig) {
  const auto& sys = op.system();
  const double alpha = sys.alpha();
  double lam = validate(sys).lambda;
  auto g = GridFunction::sample(sys, op.N(), [&](int e, double x) {
    return cplx(sys.phi(e, x) - eig.sigma * sys.r(e, x), 0);
  });
  double semi = hoelder_seminorm(g, alpha);
  double diam = sys.partition().back() - sys.partition().front();
  return std::exp(semi * std::pow(diam, alpha) / (1 - std::pow(lam, -alpha))) * eig.f.maxCoeff() /
         eig.f.minCoeff();
}

LasotaYorkeReport lasota_yorke_audit(const TransferOperator& op, const EigenData& eig, double b, int trials,
                                     std::uint64_t seed, int max_n) {
  const auto& sys = op.system();
  const double alpha = sys.alpha();
  const double lam = validate(sys).lambda;
  NormalizedOperator L(op, eig, b);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> freq(0.0, 2 * std::abs(b) + 20);

  std::vector<GridFunction> family;
  family.push_back(GridFunction::sample(sys, op.N(), [](int, double) { return cplx(1, 0); }));
  for (int t = 0; t < trials; ++t) {
    double w1 = freq(rng), w2 = freq(rng);
    cplx a0(gauss(rng), gauss(rng)), a1(gauss(rng), gauss(rng)), a2(gauss(rng), gauss(rng));
    family.push_back(GridFunction::sample(sys, op.N(), [&](int e, double x) {
      return a0 + a1 * std::exp(cplx(0, w1 * x)) + a2 * std::cos(w2 * x + e);
    }));
  }

  LasotaYorkeReport rep;
  rep.C8.assign(max_n, 0.0);
  std::vector<std::vector<double>> ratio(family.size(), std::vector<double>(max_n));
  for (std::size_t t = 0; t < family.size(); ++t) {
    const auto& v = family[t];
    double nb = norm_b(v, alpha, b), sup = v.sup_abs();
    GridFunction u = v;
    for (int n = 1; n <= max_n; ++n) {
      u = L.apply(u, 1);
      ratio[t][n - 1] = norm_b(u, alpha, b) / (std::pow(lam, -alpha * n) * nb + sup);
      rep.C8[n - 1] = std::max(rep.C8[n - 1], ratio[t][n - 1]);
    }
  }
  rep.max_C8 = *std::max_element(rep.C8.begin(), rep.C8.end());
  rep.constant_consistent = std::all_of(ratio[0].begin(), ratio[0].end(),
                                        [&](double r) { return r <= rep.max_C8; });
  return rep;
}

double resolution_shift(const MarkovSystem& sys, int N, double sigma) {
  double a = eigendata(TransferOperator(sys, N), sigma).lambda;
  double b = eigendata(TransferOperator(sys, 2 * N), sigma).lambda;
  return std::abs(b - a) / a;
}

}  // namespace gf
