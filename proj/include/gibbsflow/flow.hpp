#pragma once

#include <cstdint>
#include <vector>

#include "gibbsflow/expr.hpp"
#include "gibbsflow/operator.hpp"
#include "gibbsflow/system.hpp"

namespace gf {

struct FlowPoint {
  double x = 0;
  double u = 0;  // height, 0 <= u < r(x)
  int element = 0;
};

FlowPoint make_flow_point(const MarkovSystem& sys, double x, double u);

// X_t(x, u): climb to height u + t, applying T each time the roof is crossed.
FlowPoint evolve(const MarkovSystem& sys, FlowPoint p, double t);

// Max / min of r over a uniform grid in every element; sup is inflated by 1.001.
double sup_roof(const MarkovSystem& sys, int grid = 8192);
double inf_roof(const MarkovSystem& sys, int grid = 8192);

struct FlowSampleOptions {
  int shards = 8;  // fixed, so results do not depend on jobs
  int jobs = 1;
  int thin = 10;
  int burn_in = 1000;
};

// mu^r samples: base points from the mu_sigma chain accepted with probability
// r(x)/sup r, heights uniform on [0, r(x)).
std::vector<FlowPoint> sample_flow_measure(const TransferOperator& op, const EigenData& eig, std::size_t count,
                                           std::uint64_t seed, const FlowSampleOptions& opt = {});

// Standard error of the mean from contiguous batch means.
double batch_means_se(const std::vector<double>& values, int batches = 32);

struct CorrelationSeries {
  std::vector<double> t, C, se;
  std::vector<bool> used_in_fit;
  std::size_t samples = 0;
  int batches = 32;
  // Weighted fit of log|C| = log A - c t over the points with |C| > 3 se
  // (correlations may oscillate, so the window need not be contiguous).
  double rate = 0;
  double rate_se = 0;
  double prefactor = 0;
  double window_lo = 0, window_hi = 0;
  double t_star = 0;  // first grid time after the last window point
  bool fitted = false;
};

struct CorrelationOptions {
  FlowSampleOptions sampling;
  int batches = 32;
};

// C(t) = mean v(p) w(X_t p) - mean v mean w, with batch-means errors. Forward
// orbits are read back from the sampling chain (each chain step is an inverse
// branch), so no forward iteration of T is done in floating point.
CorrelationSeries correlation_series(const TransferOperator& op, const EigenData& eig, const Expr& v, const Expr& w,
                                     const std::vector<double>& t_grid, std::size_t samples, std::uint64_t seed,
                                     const CorrelationOptions& opt = {});

// Throws InsufficientSignal with fewer than 4 points in the window.
void fit_decay(CorrelationSeries& s);

CorrelationSeries correlation(const TransferOperator& op, const EigenData& eig, const Expr& v, const Expr& w,
                              const std::vector<double>& t_grid, std::size_t samples, std::uint64_t seed,
                              const CorrelationOptions& opt = {});

}  // namespace gf
