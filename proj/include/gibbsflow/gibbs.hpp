#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gibbsflow/operator.hpp"
#include "gibbsflow/system.hpp"

namespace gf {

// Restricted path sums D_w g = P_{w_{n-1}} ... P_{w_0} g, so that
// mu_sigma([w]) = lambda^{-n} nu . D_w f. Appending a symbol is one sparse
// product, which keeps masses exactly additive over children.
class PathSums {
 public:
  PathSums(const TransferOperator& op, const EigenData& eig);
  Eigen::VectorXd start() const { return eig_->f; }
  Eigen::VectorXd extend(const Eigen::VectorXd& D, int symbol) const { return P_[symbol] * D; }
  Eigen::VectorXd along(const Word& w) const;
  double mass(const Eigen::VectorXd& D, int depth) const;

 private:
  const EigenData* eig_;
  std::vector<SpMat> P_;
};

struct CylinderMass {
  Word word;
  double left = 0, right = 0;
  double mass = 0;
};

struct CylinderMeasureTable {
  int depth = 0;
  double pressure = 0;  // log lambda_sigma
  std::vector<CylinderMass> rows;  // sorted by left endpoint
};

CylinderMeasureTable cylinder_masses(const TransferOperator& op, const EigenData& eig, int n,
                                     std::size_t cap = 2000000);

struct GibbsAudit {
  std::vector<double> lower, upper;  // min / max ratio per depth 1..max_depth
  std::vector<double> C5;            // running max of max(upper, 1/lower)
  double C5_lower = 0, C5_upper = 0;
};

// Ratio mass(w) / exp(-P n + S_n(phi - sigma r)(y)) with y the cylinder midpoint.
GibbsAudit gibbs_audit(const TransferOperator& op, const EigenData& eig, int max_depth,
                       std::size_t cap = 2000000);

struct Transition {
  int branch;
  double y;
  double p;
};

// Backward chain x -> h_i(x) with the kernel of L_sigma; mu_sigma is stationary.
class MuSampler {
 public:
  MuSampler(const TransferOperator& op, const EigenData& eig);
  std::vector<Transition> transitions(double x, int element) const;  // normalized
  double raw_weight_sum(double x, int element) const;

 private:
  const TransferOperator* op_;
  const EigenData* eig_;
  GridFunction f_;
};

struct SamplerOptions {
  int burn_in = 1000;
  int thin = 10;
  double x0 = 0.5;
};

std::vector<double> sample_mu(const TransferOperator& op, const EigenData& eig, std::size_t count,
                              std::uint64_t seed, const SamplerOptions& opt = {});

struct AdaptedPartition {
  double b = 0, Delta = 0;
  std::vector<Cylinder> elements;  // sorted by left endpoint
};

// Throws FrequencyTooSmall unless |b| > 2 Delta rho / min diam P_i.
AdaptedPartition adapted_partition(const MarkovSystem& sys, double b, double Delta);

struct FedererAudit {
  double gamma = 0;       // J centred in each Q
  double gamma_left = 0;  // J flush with the left edge of each Q
  double K_prime = 0;
  double delta_prime = 0;
  std::size_t count = 0;
};

FedererAudit federer_audit(const TransferOperator& op, const EigenData& eig, double b, double Delta, double delta,
                           double K);

struct NormalizedPotential {
  double P_star = 0;
  MarkovSystem system;
};

// P* with lambda_0(phi - P* r) = 1; the returned system carries phi - P* r.
// Throws BracketFailure if there is no sign change on [-50, 50].
NormalizedPotential normalize_flow_potential(const MarkovSystem& sys, int N = 1024);

}  // namespace gf
