#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "gibbsflow/system.hpp"

namespace gf {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SpMatC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

// Values at N equally spaced nodes (endpoints included) on each partition
// element. Node (e, k) has flat index e*N + k. Adjacent elements share an
// endpoint position but keep separate one-sided values.
class GridFunction {
 public:
  GridFunction(const MarkovSystem& sys, int N);

  template <class F>  // f(element, x) -> complex
  static GridFunction sample(const MarkovSystem& sys, int N, F&& f) {
    GridFunction g(sys, N);
    for (int i = 0; i < g.size(); ++i) g.v_[i] = f(g.element_of_node(i), g.node(i));
    return g;
  }

  const MarkovSystem& system() const { return *sys_; }
  int N() const { return N_; }
  int size() const { return static_cast<int>(v_.size()); }
  int element_of_node(int idx) const { return idx / N_; }
  double node(int idx) const;

  Eigen::VectorXcd& values() { return v_; }
  const Eigen::VectorXcd& values() const { return v_; }

  // Monotone cubic (PCHIP) interpolation inside one element.
  cplx eval(int element, double x) const;
  cplx eval(double x) const { return eval(sys_->element_of(x), x); }
  // Same stencil as the discrete operator.
  cplx eval_linear(int element, double x) const;

  double sup_abs() const { return v_.cwiseAbs().maxCoeff(); }
  void write_csv(std::ostream& os) const;

 private:
  const MarkovSystem* sys_;
  int N_;
  Eigen::VectorXcd v_;
};

double hoelder_seminorm(const GridFunction& v, double alpha, int random_pairs = 10000, std::uint64_t seed = 0x5eed);
double norm_b(const GridFunction& v, double alpha, double b);
// (sum_k w_k |v_k|^p)^{1/p} for quadrature weights w (e.g. mu weights).
double lp_norm(const Eigen::VectorXcd& v, const Eigen::VectorXd& w, double p);

// One preimage contribution to an output node: branch i sends y to the node,
// and values at y are read by linear interpolation between nodes j and j+1
// of element i with weight w on j+1.
struct BranchSample {
  int node;
  int branch;
  double y;
  int j;
  double w;
  double phi;
  double r;
};

// Nodal discretization of P_s. Linear interpolation at off-grid preimages
// keeps every matrix entry a positive multiple of exp((phi - sigma r)(y)), so
// the discrete operator is positive and |L_s v| <= L_sigma |v| holds exactly.
class TransferOperator {
 public:
  TransferOperator(const MarkovSystem& sys, int N = 1024);

  const MarkovSystem& system() const { return sys_; }
  int N() const { return N_; }
  int size() const { return sys_.size() * N_; }
  double node(int idx) const;
  const std::vector<BranchSample>& samples() const { return samples_; }

  SpMat P(double sigma) const;
  SpMatC P(cplx s) const;
  // P restricted to branch i, so that P(sigma) = sum_i branch_P(sigma)[i].
  std::vector<SpMat> branch_P(double sigma) const;

  GridFunction apply_P(cplx s, const GridFunction& v) const;

 private:
  MarkovSystem sys_;
  int N_;
  std::vector<BranchSample> samples_;
};

struct EigenData {
  double sigma = 0;
  double lambda = 0;
  Eigen::VectorXd f;   // P_sigma f = lambda f, positive, nu.f = 1
  Eigen::VectorXd nu;  // left eigenvector, probability weights
  Eigen::VectorXd mu;  // f * nu, probability weights
  int iterations = 0;
  GridFunction f_function(const TransferOperator& op) const;
};

// Power iteration for the leading eigentriple. Throws NoConvergence.
EigenData eigendata(const TransferOperator& op, double sigma, double tol = 1e-12, int max_iter = 100000);

// L_s = (lambda_sigma f_sigma)^{-1} P_s (f_sigma .), s = sigma + i b.
class NormalizedOperator {
 public:
  NormalizedOperator(const TransferOperator& op, const EigenData& eig, double b);
  const SpMatC& matrix() const { return L_; }
  double b() const { return b_; }
  Eigen::VectorXcd apply(Eigen::VectorXcd v, int n = 1) const;
  GridFunction apply(const GridFunction& v, int n = 1) const;

 private:
  const TransferOperator* op_;
  double b_;
  SpMatC L_;
};

GridFunction apply_L(const TransferOperator& op, const EigenData& eig, double b, const GridFunction& v, int n);

// exp(|phi - sigma r|_alpha diam^alpha / (1 - lambda^-alpha)) sup f sup 1/f.
double c6_bound(const TransferOperator& op, const EigenData& eig);

struct LasotaYorkeReport {
  std::vector<double> C8;  // smallest constant per n = 1..8
  double max_C8 = 0;
  bool constant_consistent = false;  // v = 1 satisfies the inequality with max_C8
};

LasotaYorkeReport lasota_yorke_audit(const TransferOperator& op, const EigenData& eig, double b, int trials,
                                     std::uint64_t seed, int max_n = 8);

// Relative shift of lambda_sigma when the grid is refined from N to 2N.
double resolution_shift(const MarkovSystem& sys, int N, double sigma);

}  // namespace gf
