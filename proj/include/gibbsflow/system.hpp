#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gibbsflow/expr.hpp"

namespace gf {

using Word = std::vector<int>;

// Textual system definition, as read from a config file.
struct SystemSpec {
  std::string name = "custom";
  std::vector<double> partition;
  std::vector<std::string> branches;
  std::vector<std::pair<int, int>> images;  // half-open element index ranges
  std::vector<std::string> roof;
  std::vector<std::string> potential;
  double alpha = 1.0;
};

// Built-in systems: SYS-A, SYS-B, SYS-C, DOUBLING-LINEAR-ROOF, BERNOULLI-0.3.
SystemSpec preset(std::string_view name);
std::vector<std::string> preset_names();

class MarkovSystem {
 public:
  explicit MarkovSystem(SystemSpec spec);

  const SystemSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int size() const { return m_; }
  double alpha() const { return spec_.alpha; }
  const std::vector<double>& partition() const { return spec_.partition; }
  double left(int i) const { return spec_.partition[i]; }
  double right(int i) const { return spec_.partition[i + 1]; }
  double length(int i) const { return right(i) - left(i); }
  int image_lo(int i) const { return spec_.images[i].first; }
  int image_hi(int i) const { return spec_.images[i].second; }
  bool admissible(int i, int j) const { return image_lo(i) <= j && j < image_hi(i); }
  bool increasing(int i) const { return increasing_[i]; }

  // Element containing x, ties broken to the left-closed element [a_{i-1}, a_i).
  int element_of(double x) const;

  double T(int i, double y) const { return T_[i](y); }
  double dT(int i, double y) const { return dT_[i](y); }
  double d2T(int i, double y) const { return d2T_[i](y); }
  double r(int i, double y) const { return r_[i](y); }
  double dr(int i, double y) const { return dr_[i](y); }
  double phi(int i, double y) const { return phi_[i](y); }
  double dphi(int i, double y) const { return dphi_[i](y); }
  double T(double x) const { return T(element_of(x), x); }
  double r(double x) const { return r(element_of(x), x); }
  double phi(double x) const { return phi(element_of(x), x); }

  const std::vector<Expr>& roof_exprs() const { return r_; }
  const std::vector<Expr>& potential_exprs() const { return phi_; }

  // h_i(x): the point of closure(P_i) mapped to x by branch i. x is clamped
  // into closure(T(P_i)).
  double inverse(int i, double x) const;

  MarkovSystem with_potential(const std::vector<Expr>& phi, std::string name) const;

 private:
  SystemSpec spec_;
  int m_ = 0;
  std::vector<Expr> T_, dT_, d2T_, r_, dr_, phi_, dphi_;
  std::vector<bool> increasing_;
  std::vector<double> img_left_, img_right_;  // T_i at the element endpoints, sorted
};

struct ValidationReport {
  double lambda = 0, rho = 0;
  double C4 = 0, C2 = 0;
  double inf_r = 0, sup_r = 0;
  bool covering = false;
  int primitive_power = 0;
  double markov_residual = 0;
  std::vector<double> image_residuals;
};

// Throws NotMarkov, NotExpanding, RoofOutOfRange, NotCovering.
ValidationReport validate(const MarkovSystem& sys, int grid = 2048);

struct Cylinder {
  Word word;
  double left = 0, right = 0;
  int depth() const { return static_cast<int>(word.size()); }
  double diam() const { return right - left; }
  double mid() const { return 0.5 * (left + right); }
};

// Number of admissible words of length n (as a real, may be huge).
long double count_words(const MarkovSystem& sys, int n);

std::vector<Cylinder> cylinders(const MarkovSystem& sys, int n, std::size_t cap = 2000000);

// Endpoints of the cylinder of a word, via nested inverse-branch images.
Cylinder make_cylinder(const MarkovSystem& sys, const Word& word);

struct BranchPoint {
  double x;   // h_w(y)
  double dh;  // Dh_w(y)
};

class InverseBranch {
 public:
  InverseBranch(const MarkovSystem& sys, Word word);
  const Word& word() const { return word_; }
  int domain_lo() const { return sys_->image_lo(word_.back()); }
  int domain_hi() const { return sys_->image_hi(word_.back()); }
  double domain_left() const { return sys_->left(domain_lo()); }
  double domain_right() const { return sys_->right(domain_hi() - 1); }
  BranchPoint operator()(double y) const;

 private:
  const MarkovSystem* sys_;
  Word word_;
};

// Everything about a depth-n preimage x of y that the cocycle and operator
// code needs, accumulated while composing inverse branches.
struct Preimage {
  Word word;         // itinerary of x
  double x = 0;      // h_word(y)
  double dTn = 1;    // (T^n)'(x)
  double Sr = 0;     // S_n r(x)
  double dSr = 0;    // (S_n r)'(x)
  double Sphi = 0;   // S_n phi(x)
  double dSphi = 0;  // (S_n phi)'(x)
};

// Extend a preimage record by one more inverse branch i: the result is
// h_i(p.x) with the word (i, p.word...).
Preimage prepend(const MarkovSystem& sys, const Preimage& p, int i);

// All depth-n preimages of y (n >= 0), grouped by itinerary.
std::vector<Preimage> preimages(const MarkovSystem& sys, double y, int n, std::size_t cap = 2000000);
// Preimages of y starting from a known element (avoids breakpoint ambiguity).
std::vector<Preimage> preimages_from(const MarkovSystem& sys, double y, int element, int n,
                                     std::size_t cap = 2000000);
// The depth-|word| preimage of y along a fixed word.
Preimage along(const MarkovSystem& sys, const Word& word, double y);

double birkhoff_sum(const MarkovSystem& sys, const std::vector<Expr>& g, double x, int n);
// S_n g at x with the itinerary fixed by word (orbit never re-located).
double birkhoff_along(const MarkovSystem& sys, const std::vector<Expr>& g, const Word& word, double x);

}  // namespace gf
