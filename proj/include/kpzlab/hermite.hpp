#pragma once

#include <span>
#include <vector>

namespace kpzlab {

// Orthonormal Hermite functions h_z(u) = (2^z z! sqrt(pi))^{-1/2} H_z(u) e^{-u^2/2}.
class HermiteBasis {
 public:
  explicit HermiteBasis(int max_degree);

  int max_degree() const noexcept { return Z_; }
  static double eigenvalue(int z) noexcept { return 2.0 * z + 1.0; }

  // h_0(u), ..., h_Z(u); zero where e^{-u^2/2} underflows.
  std::vector<double> eval_all(double u) const;
  double eval(int z, double u) const;
  // k-th derivative of h_z via the ladder relation h_j' = sqrt(j/2) h_{j-1} - sqrt((j+1)/2) h_{j+1}.
  double derivative(int z, int k, double u) const;

  // ||h_z||_{L^1} for z <= Z, by composite quadrature between sign changes.
  const std::vector<double>& l1_norms() const;
  static double derivative_l2_norm(int z) noexcept;  // sqrt((2z+1)/2)
  // |u| beyond which |h_z(u)| < 1e-17.
  static double support_radius(int z);

 private:
  int Z_;
  mutable std::vector<double> l1_;
};

// Values h_z(u) e^{u^2/2} (polynomial part), for Gauss-Hermite quadrature.
std::vector<double> hermite_scaled_all(int Z, double u);

struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;  // for weight e^{-u^2}
};
GaussHermite gauss_hermite(int points);

struct L1BoundRow {
  int z = 0;
  double l1 = 0.0;
  double ratio = 0.0;  // l1 / (1+z)^{1/4}
};
struct L1BoundTable {
  std::vector<L1BoundRow> rows;
  bool under_resolved = false;
};
L1BoundTable l1_bound_check(int Z);

// sqrt(sum_z c_z^2 (2z+1)^{-k})
double h_minus_k_norm(std::span<const double> coeffs, double k);

}  // namespace kpzlab
