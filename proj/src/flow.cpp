#include "gibbsflow/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/gibbs.hpp"
#include "gibbsflow/random.hpp"

namespace gf {

FlowPoint make_flow_point(const MarkovSystem& sys, double x, double u) {
  FlowPoint p{x, u, sys.element_of(x)};
  if (!(u >= 0 && u < sys.r(p.element, x))) throw PreconditionFailed("height outside [0, r(x))");
  return p;
}

FlowPoint evolve(const MarkovSystem& sys, FlowPoint p, double t) {
  if (!(t >= 0)) throw PreconditionFailed("evolve needs t >= 0");
  double s = p.u + t;
  for (double r = sys.r(p.element, p.x); s >= r; r = sys.r(p.element, p.x)) {
    s -= r;
    p.x = sys.T(p.element, p.x);
    p.element = sys.element_of(p.x);
  }
  p.u = s;
  return p;
}

namespace {

template <class Reduce>
double roof_extreme(const MarkovSystem& sys, int grid, double init, Reduce pick) {
  double best = init;
  for (int e = 0; e < sys.size(); ++e)
    for (int k = 0; k <= grid; ++k) {
      double x = sys.left(e) + sys.length(e) * k / grid;
      best = pick(best, sys.r(e, x));
    }
  return best;
}

struct Shard {
  std::size_t offset = 0, count = 0;
  std::uint64_t seed = 0;
};

std::vector<Shard> make_shards(std::size_t count, std::uint64_t seed, int shards) {
  std::vector<Shard> out;
  std::size_t offset = 0;
  for (int s = 0; s < shards; ++s) {
    std::size_t c = count / shards + (static_cast<std::size_t>(s) < count % shards ? 1 : 0);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::uint64_t words[2];
    seq.generate(std::begin(words), std::end(words));
    out.push_back({offset, c, words[0] ^ (words[1] << 32)});
    offset += c;
  }
  return out;
}

template <class Work>
void for_each_shard(const std::vector<Shard>& shards, int jobs, Work work) {
  jobs = std::clamp(jobs, 1, static_cast<int>(shards.size()));
  if (jobs == 1) {
    for (std::size_t s = 0; s < shards.size(); ++s) work(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t s; (s = next++) < shards.size();) work(s);
    });
  for (auto& th : pool) th.join();
}

struct ChainState {
  double y;
  int e;
};

// Runs the mu chain of one shard and calls visit(local_index, point, orbit)
// for each accepted point; orbit(k) is T^k of the base point for k < history.
template <class Visit>
void run_shard(const MuSampler& sampler, const MarkovSystem& sys, const Shard& shard, const FlowSampleOptions& opt,
               double sup_r, int history, Visit visit) {
  std::mt19937_64 rng(shard.seed);
  std::vector<ChainState> ring(history);
  std::size_t head = 0;
  ChainState cur{0.5, sys.element_of(0.5)};
  ring[0] = cur;
  auto step = [&] {
    auto t = sampler.transitions(cur.y, cur.e);
    double a = uniform53(rng), acc = 0;
    std::size_t k = 0;
    for (; k + 1 < t.size(); ++k) {
      acc += t[k].p;
      if (a < acc) break;
    }
    cur = {t[k].y, t[k].branch};
    head = (head + 1) % ring.size();
    ring[head] = cur;
  };
  for (int k = 0; k < std::max(opt.burn_in, history); ++k) step();
  auto orbit = [&](int k) -> const ChainState& { return ring[(head + ring.size() - k) % ring.size()]; };
  std::size_t got = 0;
  while (got < shard.count) {
    for (int k = 0; k < opt.thin; ++k) step();
    double r = sys.r(cur.e, cur.y);
    if (uniform53(rng) * sup_r >= r) continue;
    FlowPoint p{cur.y, uniform53(rng) * r, cur.e};
    visit(got++, p, orbit);
  }
}

}  // namespace

double sup_roof(const MarkovSystem& sys, int grid) {
  return 1.001 * roof_extreme(sys, grid, -HUGE_VAL, [](double a, double b) { return std::max(a, b); });
}

double inf_roof(const MarkovSystem& sys, int grid) {
  return roof_extreme(sys, grid, HUGE_VAL, [](double a, double b) { return std::min(a, b); });
}

std::vector<FlowPoint> sample_flow_measure(const TransferOperator& op, const EigenData& eig, std::size_t count,
                                           std::uint64_t seed, const FlowSampleOptions& opt) {
  if (count < 1) throw PreconditionFailed("count must be >= 1");
  const auto& sys = op.system();
  MuSampler sampler(op, eig);
  const double sup_r = sup_roof(sys);
  auto shards = make_shards(count, seed, opt.shards);
  std::vector<FlowPoint> out(count);
  for_each_shard(shards, opt.jobs, [&](std::size_t s) {
    run_shard(sampler, sys, shards[s], opt, sup_r, 1,
              [&](std::size_t i, const FlowPoint& p, auto&&) { out[shards[s].offset + i] = p; });
  });
  return out;
}

double batch_means_se(const std::vector<double>& values, int batches) {
  const std::size_t n = values.size();
  if (n < static_cast<std::size_t>(2 * batches)) throw PreconditionFailed("too few values for batch means");
  std::vector<double> means(batches, 0.0);
  std::vector<std::size_t> counts(batches, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t b = i * batches / n;
    means[b] += values[i];
    ++counts[b];
  }
  double mean = 0;
  for (int b = 0; b < batches; ++b) {
    means[b] /= counts[b];
    mean += means[b] / batches;
  }
  double var = 0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= batches - 1;
  return std::sqrt(var / batches);
}

CorrelationSeries correlation_series(const TransferOperator& op, const EigenData& eig, const Expr& v, const Expr& w,
                                     const std::vector<double>& t_grid, std::size_t samples, std::uint64_t seed,
                                     const CorrelationOptions& opt) {
  if (t_grid.empty()) throw PreconditionFailed("empty time grid");
  if (!(t_grid.front() >= 0)) throw PreconditionFailed("times must be >= 0");
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k - 1])) throw PreconditionFailed("time grid must be increasing");
  if (samples < static_cast<std::size_t>(2 * opt.batches)) throw PreconditionFailed("too few samples");

  const auto& sys = op.system();
  MuSampler sampler(op, eig);
  const double sup_r = sup_roof(sys);
  const double inf_r = inf_roof(sys) / 1.001;
  const int history = static_cast<int>(std::ceil((sup_r + t_grid.back()) / inf_r)) + 2;
  const int T = static_cast<int>(t_grid.size()), B = opt.batches;

  struct Acc {
    std::vector<double> n, sv, sw, svw;  // svw is B x T, row-major by batch
  };
  auto shards = make_shards(samples, seed, opt.sampling.shards);
  std::vector<Acc> acc(shards.size());
  for_each_shard(shards, opt.sampling.jobs, [&](std::size_t s) {
    Acc& a = acc[s];
    a.n.assign(B, 0);
    a.sv.assign(B, 0);
    a.sw.assign(B, 0);
    a.svw.assign(static_cast<std::size_t>(B) * T, 0);
    std::vector<double> roofs;
    run_shard(sampler, sys, shards[s], opt.sampling, sup_r, history,
              [&](std::size_t i, const FlowPoint& p, auto&& orbit) {
                const std::size_t b = (shards[s].offset + i) * B / samples;
                const double vp = v(p.x, p.u);
                a.n[b] += 1;
                a.sv[b] += vp;
                a.sw[b] += w(p.x, p.u);
                roofs.clear();
                double below = 0;  // S_n r at the current orbit index n
                int n = 0;
                for (int k = 0; k < T; ++k) {
                  const double level = p.u + t_grid[k];
                  for (;;) {
                    if (n >= history - 1) throw PreconditionFailed("orbit history exhausted");
                    const auto& q = orbit(n);
                    if (static_cast<int>(roofs.size()) <= n) roofs.push_back(sys.r(q.e, q.y));
                    if (level < below + roofs[n]) break;
                    below += roofs[n++];
                  }
                  const auto& q = orbit(n);
                  a.svw[b * T + k] += vp * w(q.y, level - below);
                }
              });
  });

  std::vector<double> n(B, 0), sv(B, 0), sw(B, 0), svw(static_cast<std::size_t>(B) * T, 0);
  for (const auto& a : acc)
    for (int b = 0; b < B; ++b) {
      n[b] += a.n[b];
      sv[b] += a.sv[b];
      sw[b] += a.sw[b];
      for (int k = 0; k < T; ++k) svw[b * T + k] += a.svw[b * T + k];
    }

  double N = 0, SV = 0, SW = 0;
  for (int b = 0; b < B; ++b) {
    N += n[b];
    SV += sv[b];
    SW += sw[b];
  }
  CorrelationSeries out;
  out.t = t_grid;
  out.samples = samples;
  out.batches = B;
  out.C.resize(T);
  out.se.resize(T);
  out.used_in_fit.assign(T, false);
  for (int k = 0; k < T; ++k) {
    double SVW = 0;
    std::vector<double> cb(B);
    double mean_cb = 0;
    for (int b = 0; b < B; ++b) {
      SVW += svw[b * T + k];
      cb[b] = svw[b * T + k] / n[b] - (sv[b] / n[b]) * (sw[b] / n[b]);
      mean_cb += cb[b] / B;
    }
    double var = 0;
    for (double c : cb) var += (c - mean_cb) * (c - mean_cb);
    out.C[k] = SVW / N - (SV / N) * (SW / N);
    out.se[k] = std::sqrt(var / (B - 1) / B);
  }
  return out;
}

void fit_decay(CorrelationSeries& s) {
  const std::size_t T = s.t.size();
  std::vector<std::size_t> window;
  for (std::size_t k = 0; k < T; ++k)
    if (std::abs(s.C[k]) > 3 * s.se[k] + 1e-12) window.push_back(k);  // floor for roundoff
  std::fill(s.used_in_fit.begin(), s.used_in_fit.end(), false);
  s.fitted = false;
  if (window.size() < 4)
    throw InsufficientSignal(std::to_string(window.size()) + " time points with |C| > 3 se (need 4)");
  const std::size_t last = window.back();
  s.t_star = last + 1 < T ? s.t[last + 1] : s.t.back();
  // Var(log|C|) ~ (se/|C|)^2.
  double W = 0, St = 0, Sy = 0, Stt = 0, Sty = 0;
  for (std::size_t k : window) {
    s.used_in_fit[k] = true;
    double wk = std::pow(std::abs(s.C[k]) / s.se[k], 2);
    double y = std::log(std::abs(s.C[k]));
    W += wk;
    St += wk * s.t[k];
    Sy += wk * y;
    Stt += wk * s.t[k] * s.t[k];
    Sty += wk * s.t[k] * y;
  }
  const double slope = (W * Sty - St * Sy) / (W * Stt - St * St);
  s.rate = -slope;
  s.rate_se = std::sqrt(W / (W * Stt - St * St));
  s.prefactor = std::exp((Sy - slope * St) / W);
  s.window_lo = s.t[window.front()];
  s.window_hi = s.t[last];
  s.fitted = true;
}

CorrelationSeries correlation(const TransferOperator& op, const EigenData& eig, const Expr& v, const Expr& w,
                              const std::vector<double>& t_grid, std::size_t samples, std::uint64_t seed,
                              const CorrelationOptions& opt) {
  auto s = correlation_series(op, eig, v, w, t_grid, samples, seed, opt);
  fit_decay(s);
  return s;
}

}  // namespace gf
