#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gibbsflow/operator.hpp"
#include "gibbsflow/system.hpp"

namespace gf {

// (sqrt(7) - 1) / 2
double eta0();

enum class C0Variant { Printed, Divided };

struct C0Report {
  double f_term = 0;          // 4 |1/f0|_inf |f0|_alpha
  double potential_term = 0;  // 2 (|phi|_alpha + |r|_alpha), before the (1 - lambda^-alpha) factor
  double raw = 0;
  double value = 0;           // max(raw, floor)
  bool floored = false;
  C0Variant variant = C0Variant::Printed;
};

C0Report c0(const TransferOperator& op, const EigenData& eig0, C0Variant variant = C0Variant::Printed,
            double floor = 0.1);

// Relative margins; every one is >= 0 exactly when (u, v) lies in C_b.
struct ConeMargins {
  double positivity = 0;   // min u / max u
  double domination = 0;   // min (u - |v|) / u
  double log_hoelder = 0;  // 1 - |log u|_alpha / (C0 |b|^alpha)
  double v_hoelder = 0;    // min over pairs of 1 - |v(x) - v(y)| / (C0 |b|^alpha u(y) d^alpha)
  double worst() const;
  bool inside(double tol = 1e-8) const { return worst() >= -tol; }
};

ConeMargins cone_margins(const GridFunction& u, const GridFunction& v, double b, double C0, int random_pairs = 10000,
                         std::uint64_t seed = 0xc0e);
bool in_cone_b(const GridFunction& u, const GridFunction& v, double b, double C0);

struct DolgopyatParams {
  double b = 0;
  double delta = 0.05;
  double Delta = 0;
  std::string Delta_source;
  double C0 = 0, C7 = 0;
  double alpha = 1, lambda = 0, rho = 0;
  double beta = 1;
  int n1 = 0, n2 = 0, n = 0;
};

// n2 = floor(log(1/delta)/log rho), n1 = floor(beta log|b|), Delta = 4 pi/(C7 delta)
// (Delta = 1 when C7 = 0, where no cancellation can exist anyway).
DolgopyatParams dolgopyat_params(const MarkovSystem& sys, double C0, double delta, double b, double beta = 1.0);

// C0 delta^alpha < 1/6, (2/3) exp(C0 delta^alpha) < eta0, C7 delta < pi/6.
std::vector<std::string> delta_constraint_violations(const DolgopyatParams& p);
void check_delta_constraints(const DolgopyatParams& p);  // throws PreconditionFailed
// lambda^(alpha k/16) <= C0 |b|^alpha with k = floor(beta log|b|).
bool beta_consistent(double lambda, double alpha, double C0, double beta, double b);

// chi = 1 off the winning branches; on the branch of winner j it is
// 1 - (1 - eta) S(|T^n z - c_j|) with S = 1 on [0, delta/6|b|], 0 beyond
// delta/2|b| and a smoothstep in between.
class BumpFunction {
 public:
  struct Piece {
    Word winner;
    double center = 0;  // x_j
    int q_index = 0;
  };

  BumpFunction() = default;
  BumpFunction(const MarkovSystem& sys, double b, double delta, double eta, int n, double M);

  void add(Piece p) { pieces_.push_back(std::move(p)); }
  const std::vector<Piece>& pieces() const { return pieces_; }
  double eta() const { return eta_; }
  double M() const { return M_; }
  int depth() const { return n_; }
  double plateau_radius() const;
  double support_radius() const;

  // Value of chi at h_winner(y) for piece j, as a function of y.
  double on_branch(std::size_t j, double y) const;
  double on_branch_derivative(std::size_t j, double y) const;  // d/dy
  double operator()(double z) const;
  double derivative(double z) const;
  // Supports h_winner(B(c_j, delta/2|b|)) in z coordinates.
  std::vector<std::pair<double, double>> supports() const;
  std::vector<std::pair<double, double>> plateaus() const;

 private:
  const MarkovSystem* sys_ = nullptr;
  double b_ = 0, delta_ = 0, eta_ = 1, M_ = 1;
  int n_ = 0;
  std::vector<Piece> pieces_;
};

struct CaseResult {
  double margin_a = 0, margin_b = 0;  // min over the ball, in units of L^n
  bool a_holds = false, b_holds = false;
  char label = 0;  // 'a', 'b' or 0 when neither holds
};

// Cases (a)/(b) for the pair (w, wbar) on B(x1, radius) intersected with Dom psi.
CaseResult classify_case(const TransferOperator& op, const EigenData& eig, double b, const GridFunction& u,
                         const GridFunction& v, const Word& w, const Word& wbar, double x1, double radius,
                         int subgrid = 32);

struct Witness {
  int q_index = 0;
  Cylinder Q;
  double x0 = 0, x1 = 0;
  Word w, wbar, winner;
  char label = 0;
  double margin = 0;
};

struct BumpOptions {
  int scan = 64;
  int subgrid = 32;
  int max_pairs = 16;
  bool allow_failures = false;
};

struct BumpResult {
  BumpFunction chi;
  std::vector<Witness> winners;
  std::vector<int> failed;  // Q indices without a witness
  std::size_t q_count = 0;
};

// Throws NoCancellationWitness (listing the Q indices) unless allow_failures.
BumpResult build_bump(const TransferOperator& op, const EigenData& eig, double b, const GridFunction& u,
                      const GridFunction& v, const DolgopyatParams& p, const BumpOptions& opt = {});

struct ChiAudit {
  double min_value = 1, max_value = 1;
  double max_derivative = 0;
  double derivative_bound = 0;  // min{6 (1 - eta)|b|/(delta M), |b|}
  bool ok = false;
};

ChiAudit audit_chi(const BumpFunction& chi, double b, double delta, int grid = 8192);

struct CancellationReport {
  double worst_margin = 0;
  std::size_t nodes_checked = 0;
  bool holds = false;
};

// |L^n_s v| <= L^n_sigma(chi u) at grid nodes, both sides by exact preimage
// sums; chi == nullptr means chi = 1. Nodes inside supports are all checked,
// the rest are subsampled.
CancellationReport cancellation_check(const TransferOperator& op, const EigenData& eig, double b,
                                      const GridFunction& u, const GridFunction& v, const BumpFunction* chi, int n,
                                      int subsample = 1024, double slack = 1e-9);

// L^n_sigma(chi u) on the grid: discrete L^n_sigma u minus the exact deficit at
// nodes inside the supports.
GridFunction apply_bumped(const TransferOperator& op, const EigenData& eig, const GridFunction& u,
                          const BumpFunction& chi, int n);

struct IterationStep {
  int m = 0;
  double u2 = 0;       // int u_m^2 dmu
  double v2 = 0;       // int |v_m|^2 dmu
  double tau_hat = 0;  // int u_{m+1}^2 / int u_m^2
  ConeMargins cone;
  double cancellation_margin = 0;
  std::size_t witnesses = 0, failed = 0;
  double eta = 0;
};

struct IterationTrace {
  DolgopyatParams params;
  std::vector<IterationStep> steps;
  double tau_max = 0;
  double worst_cone = 0;
  double worst_cancellation = 0;
};

// u_0 = 1, v_0 = v / |v|_inf; u_{m+1} = L^n_sigma(chi_m u_m), v_{m+1} = L^n_s v_m.
IterationTrace cone_iteration(const TransferOperator& op, const EigenData& eig, const DolgopyatParams& p, int m_max,
                              const GridFunction& v, const BumpOptions& opt = {});

struct GridPolicy {
  int N_min = 1024;
  double per_b = 64;  // nodes per element per unit |b|
  int N_max = 1 << 20;
  int nodes(double b) const;
};

struct ContractionRow {
  double b = 0;
  int k = 0;  // k for the L1 sweep, ell for the norm sweep
  int N = 0;
  double ratio = 0;
  double zeta_hat = 0;
  double xi_hat = 0;
  double c6 = 0;
  double envelope = 0;
  int family_size = 0;
  int witnesses_failed = -1;  // -1 when not attempted
  bool beta_ok = true;        // lambda^(alpha k/16) <= C0 |b|^alpha
};

struct ContractionOptions {
  GridPolicy grid;
  int random_family = 12;
  std::uint64_t seed = 7;
  double delta = 0.05;
  bool witness_diagnostic = true;
};

struct ContractionReport {
  std::vector<ContractionRow> rows;
  double xi_hat = 0;  // least squares through the origin of -log_lambda(ratio) on k
  double C0 = 0;
};

// Test functions with |v|_(b) < lambda^(alpha k/16) |v|_inf on the op grid.
std::vector<GridFunction> hypothesis_family(const TransferOperator& op, double b, int k, int random_count,
                                            std::uint64_t seed);

ContractionReport l1_contraction(const MarkovSystem& sys, double sigma, const std::vector<double>& b_list,
                                 double beta = 1.0, const ContractionOptions& opt = {});

struct SweepOptions {
  GridPolicy grid;
  int random_functions = 200;
  int power_steps = 20;
  std::uint64_t seed = 11;
};

ContractionReport norm_contraction_sweep(const MarkovSystem& sys, double sigma, const std::vector<double>& b_list,
                                         double B = 2.0, const SweepOptions& opt = {});

// 20 log-spaced values from 2^7 to 2^12.
std::vector<double> default_b_sweep();

}  // namespace gf
