#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "kpzlab/fields.hpp"
#include "kpzlab/hermite.hpp"

using namespace kpzlab;

TEST_CASE("hermite functions are orthonormal up to degree 50") {
  const auto gh = gauss_hermite(128);
  const int Z = 50;
  std::vector<std::vector<double>> vals;
  for (double u : gh.nodes) vals.push_back(hermite_scaled_all(Z, u));
  double worst = 0.0;
  for (int i = 0; i <= Z; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < gh.nodes.size(); ++k)
        s += gh.weights[k] * vals[k][static_cast<std::size_t>(i)] * vals[k][static_cast<std::size_t>(j)];
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  CHECK(worst < 1e-8);
}

TEST_CASE("eigen identity and ladder derivative") {
  HermiteBasis b(40);
  double eig = 0.0, lad = 0.0;
  for (int z = 0; z <= 30; ++z)
    for (double u = -8.0; u <= 8.0; u += 0.37) {
      const double h = b.eval(z, u);
      eig = std::max(eig, std::abs(u * u * h - b.derivative(z, 2, u) - (2.0 * z + 1.0) * h));
      const double step = 1e-5;
      const double fd = (b.eval(z, u + step) - b.eval(z, u - step)) / (2.0 * step);
      lad = std::max(lad, std::abs(b.derivative(z, 1, u) - fd));
    }
  CHECK(eig < 1e-6);
  CHECK(lad < 1e-8);
}

TEST_CASE("hermite evaluation underflows to zero far out") {
  HermiteBasis b(200);
  for (int z : {0, 10, 200}) {
    CHECK(b.eval(z, 60.0) == 0.0);
    CHECK(std::isfinite(b.eval(z, 19.0)));
  }
  CHECK_THROWS_AS(b.eval(201, 0.0), std::out_of_range);
}

TEST_CASE("l1 norms") {
  HermiteBasis b(60);
  const auto& l1 = b.l1_norms();
  CHECK(l1[0] == doctest::Approx(std::sqrt(2.0) * std::pow(M_PI, 0.25)).epsilon(1e-8));
  const auto tab = l1_bound_check(60);
  CHECK_FALSE(tab.under_resolved);
  for (const auto& row : tab.rows) CHECK(row.ratio < 2.0);
  CHECK(HermiteBasis::derivative_l2_norm(3) == doctest::Approx(std::sqrt(3.5)));
}

TEST_CASE("negative sobolev norm") {
  std::vector<double> e(10, 0.0);
  e[4] = 1.0;
  CHECK(h_minus_k_norm(e, 4.0) == doctest::Approx(std::pow(9.0, -2.0)));
  const std::vector<double> c = {3.0, 4.0};
  CHECK(h_minus_k_norm(c, 0.0) == doctest::Approx(5.0));
  CHECK_THROWS(h_minus_k_norm(c, -1.0));
}

TEST_CASE("gaussian bump is resolved by 65 hermite functions") {
  const auto H = TestFunction::gaussian_bump(0.3, 0.7);
  HermiteBasis b(64);
  const double R = 14.0;
  const int N = 14000;
  const double h = 2.0 * R / N;
  std::vector<double> coef(65, 0.0);
  for (int i = 0; i <= N; ++i) {
    const double u = -R + i * h;
    const auto v = b.eval_all(u);
    for (int z = 0; z <= 64; ++z) coef[static_cast<std::size_t>(z)] += h * H(u) * v[static_cast<std::size_t>(z)];
  }
  double res = 0.0;
  for (int i = 0; i <= N; ++i) {
    const double u = -R + i * h;
    const auto v = b.eval_all(u);
    double p = 0.0;
    for (int z = 0; z <= 64; ++z) p += coef[static_cast<std::size_t>(z)] * v[static_cast<std::size_t>(z)];
    res += h * (H(u) - p) * (H(u) - p);
  }
  CHECK(std::sqrt(res) / H.l2_norm() < 1e-6);
}
