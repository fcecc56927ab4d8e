#include "kpzlab/hermite.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace kpzlab {

namespace {

// Scaled recurrence: returns h_z(u) e^{u^2/2} e^{-logscale} so large degrees stay finite.
void scaled_recurrence(int Z, double u, std::vector<double>& out, std::vector<double>& logscale) {
  out.assign(static_cast<std::size_t>(Z + 1), 0.0);
  logscale.assign(static_cast<std::size_t>(Z + 1), 0.0);
  double prev = 0.0, cur = std::pow(M_PI, -0.25), ls = 0.0;
  out[0] = cur;
  for (int k = 0; k < Z; ++k) {
    double next = std::sqrt(2.0 / (k + 1)) * u * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e150) {
      cur *= 1e-150;
      prev *= 1e-150;
      ls += 150.0 * std::log(10.0);
    }
    out[static_cast<std::size_t>(k + 1)] = cur;
    logscale[static_cast<std::size_t>(k + 1)] = ls;
  }
}

}  // namespace

HermiteBasis::HermiteBasis(int max_degree) : Z_(max_degree) {
  if (max_degree < 0) throw std::invalid_argument("negative Hermite degree");
}

std::vector<double> HermiteBasis::eval_all(double u) const {
  std::vector<double> v, ls;
  scaled_recurrence(Z_, u, v, ls);
  const double g = -0.5 * u * u;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double e = g + ls[k];
    v[k] = e < -745.0 ? 0.0 : v[k] * std::exp(e);
  }
  return v;
}

double HermiteBasis::eval(int z, double u) const {
  if (z < 0 || z > Z_) throw std::out_of_range("Hermite degree beyond basis");
  std::vector<double> v, ls;
  scaled_recurrence(z, u, v, ls);
  const double e = -0.5 * u * u + ls.back();
  return e < -745.0 ? 0.0 : v.back() * std::exp(e);
}

double HermiteBasis::derivative(int z, int k, double u) const {
  if (z + k > Z_) throw std::out_of_range("derivative needs degree z + k within the basis");
  std::vector<double> coef(static_cast<std::size_t>(Z_ + 2), 0.0);
  coef[static_cast<std::size_t>(z)] = 1.0;
  for (int step = 0; step < k; ++step) {
    std::vector<double> next(coef.size(), 0.0);
    for (int j = 0; j <= Z_; ++j) {
      const double c = coef[static_cast<std::size_t>(j)];
      if (c == 0.0) continue;
      if (j > 0) next[static_cast<std::size_t>(j - 1)] += c * std::sqrt(j / 2.0);
      next[static_cast<std::size_t>(j + 1)] -= c * std::sqrt((j + 1) / 2.0);
    }
    coef.swap(next);
  }
  const auto h = eval_all(u);
  double s = 0.0;
  for (int j = 0; j <= Z_; ++j) s += coef[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
  return s;
}

double HermiteBasis::derivative_l2_norm(int z) noexcept { return std::sqrt((2.0 * z + 1.0) / 2.0); }

double HermiteBasis::support_radius(int z) {
  HermiteBasis b(z);
  double u = std::sqrt(2.0 * z + 1.0);
  while (std::abs(b.eval(z, u)) > 1e-17 || std::abs(b.eval(z, u + 0.5)) > 1e-17) u += 0.25;
  return u;
}

namespace {

// sum_k w_k |f| on [a, b] with composite Simpson, h = step.
std::vector<double> l1_scan(int Z, double step) {
  const double R = std::sqrt(2.0 * Z + 1.0) + 12.0;
  const int N = 2 * static_cast<int>(std::ceil(R / step / 2.0));
  const double h = R / N;
  HermiteBasis b(Z);
  std::vector<double> acc(static_cast<std::size_t>(Z + 1), 0.0);
  // Symmetric |h_z|: integrate over [0, R] and double.
  for (int i = 0; i <= N; ++i) {
    const double w = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const auto v = b.eval_all(i * h);
    for (int z = 0; z <= Z; ++z) acc[static_cast<std::size_t>(z)] += w * std::abs(v[static_cast<std::size_t>(z)]);
  }
  for (double& a : acc) a *= 2.0 * h / 3.0;
  return acc;
}

}  // namespace

const std::vector<double>& HermiteBasis::l1_norms() const {
  if (l1_.empty()) l1_ = l1_scan(Z_, 2e-4);
  return l1_;
}

std::vector<double> hermite_scaled_all(int Z, double u) {
  std::vector<double> v, ls;
  scaled_recurrence(Z, u, v, ls);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] *= std::exp(ls[k]);
  return v;
}

GaussHermite gauss_hermite(int points) {
  // Golub-Welsch on the Jacobi matrix of the physicists' Hermite polynomials.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(points, points);
  for (int i = 0; i + 1 < points; ++i) J(i, i + 1) = J(i + 1, i) = std::sqrt((i + 1) / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  // Weights from the Christoffel function 1 / sum_j p_j(u)^2; the eigenvector formula loses
  // relative accuracy on the outer nodes.
  GaussHermite gh;
  for (int i = 0; i < points; ++i) {
    const double u = es.eigenvalues()(i);
    const auto p = hermite_scaled_all(points - 1, u);
    double s = 0.0;
    for (double v : p) s += v * v;
    gh.nodes.push_back(u);
    gh.weights.push_back(1.0 / s);
  }
  return gh;
}

L1BoundTable l1_bound_check(int Z) {
  const auto fine = l1_scan(Z, 2e-4);
  const auto coarse = l1_scan(Z, 4e-4);
  L1BoundTable t;
  for (int z = 0; z <= Z; ++z) {
    const double l1 = fine[static_cast<std::size_t>(z)];
    if (std::abs(l1 - coarse[static_cast<std::size_t>(z)]) > 1e-4 * l1) t.under_resolved = true;
    t.rows.push_back({z, l1, l1 / std::pow(1.0 + z, 0.25)});
  }
  return t;
}

double h_minus_k_norm(std::span<const double> coeffs, double k) {
  if (k < 0.0) throw std::invalid_argument("h_minus_k_norm: k must be non-negative");
  double s = 0.0;
  for (std::size_t z = 0; z < coeffs.size(); ++z) s += coeffs[z] * coeffs[z] * std::pow(2.0 * z + 1.0, -k);
  return std::sqrt(s);
}

}  // namespace kpzlab
