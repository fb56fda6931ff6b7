#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gibbsflow/operator.hpp"
#include "gibbsflow/system.hpp"

namespace gf {

// max{2 C4 rho / (1 - 1/lambda), (1 - 1/lambda) C4}.
double c7(const MarkovSystem& sys);

// psi = S_n r o h_w - S_n r o h_wbar on the common domain of the two branches.
class PsiFunction {
 public:
  PsiFunction(const MarkovSystem& sys, Word w, Word wbar);  // throws EmptyDomain
  double operator()(double x) const;
  double derivative(double x) const;
  double domain_left() const { return left_; }
  double domain_right() const { return right_; }
  bool contains(double x) const { return x >= left_ && x <= right_; }
  const Word& word() const { return w_; }
  const Word& word_bar() const { return wbar_; }

 private:
  const MarkovSystem* sys_;
  Word w_, wbar_;
  double left_ = 0, right_ = 0;
};

// Sector {(a, c): c/a in [lo, hi]} of the plane.
struct ConeInterval {
  double lo = 0, hi = 0;
  bool intersects(const ConeInterval& o) const { return lo <= o.hi && o.lo <= hi; }
  bool contains(double p) const { return lo <= p && p <= hi; }
  double width() const { return hi - lo; }
};

// Image of the base cone [-C7, C7] under D^n at the preimage p.
ConeInterval cone_of(const Preimage& p, double C7);
// Same, from the forward orbit of x.
ConeInterval cone_image(const MarkovSystem& sys, double x, int n, double C7);
// Throws NotSiblings unless T^n x1 = T^n x2 within 1e-9.
bool transversal(const MarkovSystem& sys, double x1, double x2, int n, double C7);

struct UniWitness {
  double y = 0;
  Word w1, w2;
  double value = 0;
};

struct UniReport {
  double D_full = 0;
  double D_point = 0;
  std::vector<UniWitness> witnesses;  // best pair per grid point
};

UniReport check_uni(const MarkovSystem& sys, int n, double R, int grid = 200, int ball_grid = 21);

// Values at one base point y; weights are normalized to sum to one.
double a_at(const TransferOperator& op, const EigenData& eig0, double y, int n, double C7);
double b_at(const TransferOperator& op, const EigenData& eig0, double y, int n, double C7);

struct SequenceReport {
  std::vector<double> values;      // index n-1
  std::vector<double> argmax_y;
  double max_weight_defect = 0;    // max |sum of raw weights - 1| seen
};

// sup over a y grid (grid points plus up to max_midpoints depth-n cylinder midpoints).
SequenceReport a_sequence(const TransferOperator& op, const EigenData& eig0, int n_max, int grid = 512,
                          std::size_t max_midpoints = 1024, std::size_t cap = 2000000);
SequenceReport b_sequence(const TransferOperator& op, const EigenData& eig0, int n_max, int grid = 512,
                          std::size_t max_midpoints = 1024, std::size_t cap = 2000000);
// Both at once; they share the preimage enumeration.
std::pair<SequenceReport, SequenceReport> ab_sequences(const TransferOperator& op, const EigenData& eig0, int n_max,
                                                       int grid = 512, std::size_t max_midpoints = 1024,
                                                       std::size_t cap = 2000000);

struct CoboundaryReport {
  bool cohomologous = false;
  double residual = 0;
  std::vector<double> element_residuals;
  std::vector<double> chi;          // mean of r - theta o T + theta per element
  double theta_difference = 0;      // max |D theta| gap between two branch chains
  double tail_bound = 0;
  int truncation = 0;
};

CoboundaryReport coboundary_test(const MarkovSystem& sys, int J_trunc = 40, double tol = 1e-6, int grid = 257);
// Glued theta from the lowest-index chain, for inspection.
double coboundary_theta(const MarkovSystem& sys, double y, int J_trunc = 40);

struct PointwiseUniReport {
  int n1 = 0, n2 = 0, n = 0;
  double Delta = 0, D = 0, radius = 0;
  int points = 0;
  int points_with_pair = 0;
  int points_passing = 0;
  double pass_rate = 0;
  double worst_margin = 0;  // min over tested z of |D psi(z)| - D
  bool no_transversal_pair = false;
  std::vector<UniWitness> witnesses;
};

PointwiseUniReport uni_from_transversality(const MarkovSystem& sys, double delta, double b, double beta = 1.0,
                                           int min_n2 = 1, int y_grid = 128, int z_grid = 32);

}  // namespace gf
