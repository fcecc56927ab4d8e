#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "kpzlab/measures.hpp"
#include "kpzlab/model.hpp"

namespace kpzlab {

// Ring of `sites` sites, or the segment Lambda_ell = {-ell..ell} with a frozen outside.
struct Geometry {
  enum class Kind { Ring, Segment };
  Kind kind = Kind::Ring;
  int sites = 0;
  int particles = 0;
  int ell = 0;
  std::vector<int> left;   // sites -ell-|left| .. -ell-1
  std::vector<int> right;  // sites ell+1 .. ell+|right|

  static Geometry ring(int L, int k);
  // Missing boundary sites read as empty.
  static Geometry segment(int ell, int k, std::vector<int> left = {}, std::vector<int> right = {});
  std::string describe() const;
};

// All configurations with the geometry's particle number: colex-ranked k-subsets for exclusion,
// weak compositions (lexicographic, looked up by map) for zero-range.
class FiniteStateSpace {
 public:
  FiniteStateSpace(const Geometry& geometry, bool exclusion);

  std::size_t size() const noexcept { return states_.size(); }
  const std::vector<int>& state(std::size_t i) const { return states_.at(i); }
  std::size_t index(const std::vector<int>& occ) const;
  bool exclusion() const noexcept { return exclusion_; }

 private:
  bool exclusion_;
  int sites_;
  std::vector<std::vector<int>> states_;
  std::map<std::vector<int>, std::size_t> lookup_;
};

struct FiniteGenerator {
  Geometry geometry;
  FiniteStateSpace space;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q;  // Q(i, j) rate i -> j, rows sum to 0
  std::vector<double> nu;                          // normalized reference measure on the space
  std::vector<double> log_weight;                  // unnormalized log nu
};

// Full generator n^2 [p_n b^R grad_{x,x+1} + q_n b^L grad_{x+1,x}] on a ring.
FiniteGenerator ring_generator(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& measure,
                               const Geometry& geometry);
// Canonical symmetric generator on a segment: rates b^R/2 and b^L/2 on internal bonds, no n^2.
FiniteGenerator segment_generator(const ModelSpec& spec, int n, const MeasureSpec& measure, const Geometry& geometry);

double stationarity_residual(const FiniteGenerator& gen);    // max_j |sum_i nu_i Q_ij|
double detailed_balance_residual(const FiniteGenerator& gen);  // max |nu_i Q_ij - nu_j Q_ji|
double row_sum_residual(const FiniteGenerator& gen);
// max entry of |D^{-1} Q(a)^T D - Q(-a)| on a ring.
double adjoint_residual(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& measure,
                        const Geometry& geometry);

enum class GapMethod { Auto, Dense, Lanczos, Power };
struct GapResult {
  double gap = 0.0;
  double W = 0.0;  // 1/gap; 0 for a single-state hyperplane
  std::string method;
  std::size_t states = 0;
};
inline constexpr std::size_t kDenseLimit = 1500;
GapResult spectral_gap(const FiniteGenerator& gen, GapMethod method = GapMethod::Auto);

// sum_i nu_i f_i (-Q f)_i scaled by n^2, i.e. ||f||^2_{1,n}.
double h1_norm_sq(const FiniteGenerator& gen, std::span<const double> f, int n);
// (-n^2 Q)^+ r on the nu-orthogonal complement of constants; throws if r has nonzero nu-mean.
std::vector<double> h_minus1_solve(const FiniteGenerator& gen, std::span<const double> r, int n);
double h_minus1_norm_sq(const FiniteGenerator& gen, std::span<const double> r, int n);

struct EeRow {
  int n = 0;
  double error = 0.0;   // L^4 norm of the conditional-expectation error
  double scaled = 0.0;  // error * n^{3/2} (second order) or error * n (first order)
};
// Block of n sites around f's support; product measures condition on the block sum, Markov
// measures on the block sum and the two neighbouring outside states.
std::vector<EeRow> ee_error_curve(const MeasureSpec& measure, const LocalFunction& f, std::span<const int> ns,
                                  bool first_order = false);

}  // namespace kpzlab
