#include "gibbsflow/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "gibbsflow/errors.hpp"

namespace gf {

namespace {

std::vector<Expr> parse_all(const std::vector<std::string>& src, int m, const char* what) {
  std::vector<Expr> out;
  if (src.size() == 1 && m > 1) {
    out.assign(m, parse(src[0]));
    return out;
  }
  if (static_cast<int>(src.size()) != m)
    throw PreconditionFailed(std::string(what) + ": expected " + std::to_string(m) + " expressions, got " +
                             std::to_string(src.size()));
  for (const auto& s : src) out.push_back(parse(s));
  return out;
}

SystemSpec doubling(std::string name, std::string roof) {
  SystemSpec s;
  s.name = std::move(name);
  s.partition = {0.0, 0.5, 1.0};
  s.branches = {"2*x", "2*x - 1"};
  s.images = {{0, 2}, {0, 2}};
  s.roof = {roof, roof};
  s.potential = {"0", "0"};
  return s;
}

}  // namespace

SystemSpec preset(std::string_view name) {
  if (name == "SYS-A") return doubling("SYS-A", "1");
  if (name == "SYS-B") return doubling("SYS-B", "(2 + cos(2*pi*x))/3");
  if (name == "DOUBLING-LINEAR-ROOF") return doubling("DOUBLING-LINEAR-ROOF", "1 - x/2");
  if (name == "BERNOULLI-0.3") {
    auto s = doubling("BERNOULLI-0.3", "1");
    s.potential = {"log(0.3)", "log(0.7)"};
    return s;
  }
  if (name == "SYS-C") {
    SystemSpec s;
    s.name = "SYS-C";
    s.partition = {0.0, 1.0 / 3, 2.0 / 3, 1.0};
    s.branches = {"3*x", "2*x - 1/3", "2*x - 4/3"};
    s.images = {{0, 3}, {1, 3}, {0, 2}};
    s.roof.assign(3, "(2 + cos(2*pi*x))/3");
    s.potential.assign(3, "0");
    return s;
  }
  throw PreconditionFailed("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  return {"SYS-A", "SYS-B", "SYS-C", "DOUBLING-LINEAR-ROOF", "BERNOULLI-0.3"};
}

MarkovSystem::MarkovSystem(SystemSpec spec) : spec_(std::move(spec)) {
  m_ = static_cast<int>(spec_.partition.size()) - 1;
  if (m_ < 1) throw PreconditionFailed("partition needs at least two points");
  for (int i = 0; i < m_; ++i)
    if (!(spec_.partition[i] < spec_.partition[i + 1]))
      throw PreconditionFailed("partition must be strictly increasing");
  if (static_cast<int>(spec_.images.size()) != m_)
    throw PreconditionFailed("one image range per element is required");
  for (auto [lo, hi] : spec_.images)
    if (lo < 0 || hi > m_ || lo >= hi) throw NotMarkov("image range out of bounds");
  if (spec_.potential.empty()) spec_.potential.assign(m_, "0");
  T_ = parse_all(spec_.branches, m_, "branches");
  r_ = parse_all(spec_.roof, m_, "roof");
  phi_ = parse_all(spec_.potential, m_, "potential");
  for (int i = 0; i < m_; ++i) {
    dT_.push_back(differentiate(T_[i]));
    d2T_.push_back(differentiate(dT_[i]));
    dr_.push_back(differentiate(r_[i]));
    dphi_.push_back(differentiate(phi_[i]));
    double a = T_[i](left(i)), b = T_[i](right(i));
    increasing_.push_back(b >= a);
    img_left_.push_back(std::min(a, b));
    img_right_.push_back(std::max(a, b));
  }
}

int MarkovSystem::element_of(double x) const {
  const auto& p = spec_.partition;
  auto it = std::upper_bound(p.begin() + 1, p.end() - 1, x);
  return static_cast<int>(it - p.begin()) - 1;
}

double MarkovSystem::inverse(int i, double x) const {
  x = std::clamp(x, img_left_[i], img_right_[i]);
  const double span = img_right_[i] - img_left_[i];
  double guess = (x - img_left_[i]) / span;
  if (!increasing_[i]) guess = 1 - guess;
  guess = left(i) + length(i) * guess;
  std::uintmax_t iters = 100;
  auto f = [&](double y) { return std::make_pair(T_[i](y) - x, dT_[i](y)); };
  return boost::math::tools::newton_raphson_iterate(f, guess, left(i), right(i), 52, iters);
}

MarkovSystem MarkovSystem::with_potential(const std::vector<Expr>& phi, std::string name) const {
  SystemSpec s = spec_;
  s.name = std::move(name);
  s.potential.clear();
  for (const auto& e : phi) s.potential.push_back(to_string(e));
  return MarkovSystem(std::move(s));
}

ValidationReport validate(const MarkovSystem& sys, int grid) {
  ValidationReport rep;
  const int m = sys.size();
  const auto& p = sys.partition();
  if (std::abs(p.front()) > 1e-12 || std::abs(p.back() - 1) > 1e-12)
    throw NotMarkov("partition must span [0, 1]");

  // Markov images: each branch maps its element onto a union of elements.
  for (int i = 0; i < m; ++i) {
    double a = sys.T(i, sys.left(i)), b = sys.T(i, sys.right(i));
    double lo = std::min(a, b), hi = std::max(a, b);
    double res = std::max(std::abs(lo - p[sys.image_lo(i)]), std::abs(hi - p[sys.image_hi(i)]));
    rep.image_residuals.push_back(res);
    rep.markov_residual = std::max(rep.markov_residual, res);
  }
  if (rep.markov_residual > 1e-9)
    throw NotMarkov("branch images miss partition points by " + std::to_string(rep.markov_residual));

  rep.lambda = std::numeric_limits<double>::infinity();
  rep.rho = 0;
  rep.inf_r = std::numeric_limits<double>::infinity();
  rep.sup_r = -std::numeric_limits<double>::infinity();
  double distortion = 0;
  for (int i = 0; i < m; ++i) {
    double sign = 0;
    for (int g = 0; g <= grid; ++g) {
      double y = sys.left(i) + sys.length(i) * g / grid;
      double dt = sys.dT(i, y);
      if (sign == 0) sign = dt > 0 ? 1 : -1;
      if (dt * sign <= 0) throw NotMarkov("branch " + std::to_string(i) + " is not monotone");
      double a = std::abs(dt);
      rep.lambda = std::min(rep.lambda, a);
      rep.rho = std::max(rep.rho, a);
      double rv = sys.r(i, y);
      rep.inf_r = std::min(rep.inf_r, rv);
      rep.sup_r = std::max(rep.sup_r, rv);
      rep.C4 = std::max(rep.C4, std::abs(sys.dr(i, y)) / a);
      distortion = std::max(distortion, std::abs(sys.d2T(i, y)) / (a * a));
    }
  }
  if (!(rep.lambda > 1))
    throw NotExpanding("inf |T'| = " + std::to_string(rep.lambda) + " <= 1");
  // log|Dh_n| is L-Lipschitz with L = sup|T''/T'^2| / (1 - 1/lambda).
  double L = distortion / (1 - 1 / rep.lambda);
  rep.C2 = L * std::exp(L);
  if (!(rep.inf_r > 0) || rep.sup_r > 1 + 1e-12)
    throw RoofOutOfRange("roof range [" + std::to_string(rep.inf_r) + ", " + std::to_string(rep.sup_r) +
                         "] not inside (0, 1]");

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = sys.image_lo(i); j < sys.image_hi(i); ++j) A(i, j) = 1;
  Eigen::MatrixXd P = A;
  const int limit = (m - 1) * (m - 1) + 1;
  for (int k = 1; k <= limit; ++k) {
    if ((P.array() > 0).all()) {
      rep.covering = true;
      rep.primitive_power = k;
      break;
    }
    P = ((P * A).array() > 0).cast<double>().matrix();
  }
  if (!rep.covering) throw NotCovering("no power of the transition matrix is positive");
  return rep;
}

long double count_words(const MarkovSystem& sys, int n) {
  const int m = sys.size();
  std::vector<long double> c(m, 1.0L), next(m);
  for (int k = 1; k < n; ++k) {
    std::fill(next.begin(), next.end(), 0.0L);
    for (int i = 0; i < m; ++i)
      for (int j = sys.image_lo(i); j < sys.image_hi(i); ++j) next[i] += c[j];
    c.swap(next);
  }
  long double total = 0;
  for (auto v : c) total += v;
  return n <= 0 ? 0.0L : total;
}

Cylinder make_cylinder(const MarkovSystem& sys, const Word& word) {
  int last = word.back();
  double a = sys.left(last), b = sys.right(last);
  for (int k = static_cast<int>(word.size()) - 2; k >= 0; --k) {
    double u = sys.inverse(word[k], a), v = sys.inverse(word[k], b);
    a = std::min(u, v);
    b = std::max(u, v);
  }
  return {word, a, b};
}

std::vector<Cylinder> cylinders(const MarkovSystem& sys, int n, std::size_t cap) {
  if (n < 1) throw PreconditionFailed("cylinder depth must be >= 1");
  long double total = count_words(sys, n);
  if (total > static_cast<long double>(cap))
    throw CapExceeded(std::to_string(static_cast<double>(total)) + " cylinders at depth " + std::to_string(n) +
                      " exceed cap " + std::to_string(cap));
  // Build depth k from depth k-1 by prepending a symbol: the cylinder
  // [i w] is h_i of the cylinder [w].
  std::vector<Cylinder> cur;
  for (int i = 0; i < sys.size(); ++i) cur.push_back({{i}, sys.left(i), sys.right(i)});
  for (int k = 1; k < n; ++k) {
    std::vector<Cylinder> next;
    next.reserve(cur.size() * 2);
    for (int i = 0; i < sys.size(); ++i) {
      for (const auto& c : cur) {
        if (!sys.admissible(i, c.word.front())) continue;
        Cylinder d;
        d.word.reserve(k + 1);
        d.word.push_back(i);
        d.word.insert(d.word.end(), c.word.begin(), c.word.end());
        double u = sys.inverse(i, c.left), v = sys.inverse(i, c.right);
        d.left = std::min(u, v);
        d.right = std::max(u, v);
        next.push_back(std::move(d));
      }
    }
    cur.swap(next);
  }
  std::sort(cur.begin(), cur.end(), [](const Cylinder& a, const Cylinder& b) { return a.left < b.left; });
  return cur;
}

InverseBranch::InverseBranch(const MarkovSystem& sys, Word word) : sys_(&sys), word_(std::move(word)) {
  if (word_.empty()) throw PreconditionFailed("inverse branch needs a nonempty word");
}

BranchPoint InverseBranch::operator()(double y) const {
  double x = y, dh = 1;
  for (int k = static_cast<int>(word_.size()) - 1; k >= 0; --k) {
    x = sys_->inverse(word_[k], x);
    dh /= sys_->dT(word_[k], x);
  }
  return {x, dh};
}

Preimage prepend(const MarkovSystem& sys, const Preimage& p, int i) {
  Preimage q;
  q.word.reserve(p.word.size() + 1);
  q.word.push_back(i);
  q.word.insert(q.word.end(), p.word.begin(), p.word.end());
  q.x = sys.inverse(i, p.x);
  double dt = sys.dT(i, q.x);
  q.dTn = p.dTn * dt;
  q.Sr = sys.r(i, q.x) + p.Sr;
  q.dSr = sys.dr(i, q.x) + dt * p.dSr;
  q.Sphi = sys.phi(i, q.x) + p.Sphi;
  q.dSphi = sys.dphi(i, q.x) + dt * p.dSphi;
  return q;
}

std::vector<Preimage> preimages_from(const MarkovSystem& sys, double y, int element, int n, std::size_t cap) {
  std::vector<Preimage> cur(1);
  cur[0].x = y;
  std::vector<int> head(1, element);  // element holding the current point
  for (int k = 0; k < n; ++k) {
    std::vector<Preimage> next;
    std::vector<int> nhead;
    for (std::size_t a = 0; a < cur.size(); ++a) {
      for (int i = 0; i < sys.size(); ++i) {
        if (!sys.admissible(i, head[a])) continue;
        next.push_back(prepend(sys, cur[a], i));
        nhead.push_back(i);
        if (next.size() > cap) throw CapExceeded("preimage count exceeds cap " + std::to_string(cap));
      }
    }
    cur.swap(next);
    head.swap(nhead);
  }
  return cur;
}

std::vector<Preimage> preimages(const MarkovSystem& sys, double y, int n, std::size_t cap) {
  return preimages_from(sys, y, sys.element_of(y), n, cap);
}

Preimage along(const MarkovSystem& sys, const Word& word, double y) {
  Preimage p;
  p.x = y;
  for (int k = static_cast<int>(word.size()) - 1; k >= 0; --k) {
    Preimage q = prepend(sys, p, word[k]);
    p = std::move(q);
  }
  return p;
}

double birkhoff_along(const MarkovSystem& sys, const std::vector<Expr>& g, const Word& word, double x) {
  double s = 0;
  for (int i : word) {
    s += g[g.size() == 1 ? 0 : i](x);
    x = sys.T(i, x);
  }
  return s;
}

double birkhoff_sum(const MarkovSystem& sys, const std::vector<Expr>& g, double x, int n) {
  const auto& p = sys.partition();
  auto on_breakpoint = [&](double y) {
    for (int k = 1; k < sys.size(); ++k)
      if (std::abs(y - p[k]) <= 1e-14) return true;
    return false;
  };
  double shift = 0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    double y = std::clamp(x + shift, 0.0, 1.0);
    double s = 0;
    bool hit = false;
    for (int j = 0; j < n && !hit; ++j) {
      if (on_breakpoint(y)) {
        hit = true;
        break;
      }
      int e = sys.element_of(y);
      s += g[g.size() == 1 ? 0 : e](y);
      y = sys.T(e, y);
    }
    if (!hit) return s;
    shift = (shift == 0 ? 1e-13 : -2 * shift);
  }
  throw PreconditionFailed("orbit keeps hitting partition breakpoints");
}

}  // namespace gf
