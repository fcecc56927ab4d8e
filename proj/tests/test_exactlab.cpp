#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "kpzlab/exactlab.hpp"

using namespace kpzlab;

TEST_CASE("colex ranking round trip") {
  const FiniteStateSpace space(Geometry::ring(9, 4), true);
  CHECK(space.size() == 126);
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(space.index(space.state(i)) == i);
  const FiniteStateSpace zrp(Geometry::ring(4, 5), false);
  CHECK(zrp.size() == 56);
  for (std::size_t i = 0; i < zrp.size(); ++i) CHECK(zrp.index(zrp.state(i)) == i);
  CHECK_THROWS_AS(space.index(std::vector<int>{1, 1, 0, 0, 0, 0, 0, 0, 0}), std::out_of_range);
}

TEST_CASE("ring generators are stationary for their reference measures") {
  const auto asym = Asymmetry::make(2.0, 1.0, 4);
  const auto ssep = ring_generator(ModelSpec::simple_exclusion(), asym, MeasureSpec::bernoulli(0.5), Geometry::ring(6, 3));
  CHECK(ssep.space.size() == 20);
  CHECK(row_sum_residual(ssep) < 1e-12);
  CHECK(stationarity_residual(ssep) < 1e-10);
  for (const auto& g : {RateFunction::linear(), RateFunction::constant(), RateFunction::affine(0.5, 1.0)}) {
    const auto m = MeasureSpec::zrp_fugacity(g, 0.5);
    for (int k = 0; k <= 5; ++k) {
      const auto gen = ring_generator(ModelSpec::zero_range(g), asym, m, Geometry::ring(4, k));
      CHECK(stationarity_residual(gen) < 1e-10);
    }
  }
  const auto sc = ModelSpec::speed_change(0.7, {std::exp(0.7) - 1.0, std::exp(0.7), 1.0, 2.0});
  for (int k = 1; k < 7; ++k) {
    const auto gen = ring_generator(sc, asym, MeasureSpec::markov_gibbs(0.7, 0.2), Geometry::ring(7, k));
    CHECK(stationarity_residual(gen) < 1e-10);
  }
}

TEST_CASE("adjoint reverses the asymmetry") {
  const auto asym = Asymmetry::make(1.5, 0.5, 9);
  for (int k = 0; k <= 7; ++k)
    CHECK(adjoint_residual(ModelSpec::kclg(2, 0.3), asym, MeasureSpec::bernoulli(0.4), Geometry::ring(7, k)) < 1e-10);
  CHECK(adjoint_residual(ModelSpec::zero_range(RateFunction::linear()), asym,
                         MeasureSpec::zrp_fugacity(RateFunction::linear(), 1.0), Geometry::ring(4, 5)) < 1e-10);
}

TEST_CASE("segment generators") {
  const auto m = MeasureSpec::bernoulli(0.5);
  const auto one = segment_generator(ModelSpec::simple_exclusion(), 1, m, Geometry::segment(1, 1));
  CHECK(detailed_balance_residual(one) < 1e-14);
  CHECK(spectral_gap(one).gap == doctest::Approx(0.5).epsilon(1e-12));
  // single particle on 2l+1 sites: rate-1/2 random walk, gap 1 - cos(pi/N)
  for (int ell = 1; ell <= 6; ++ell) {
    const auto gen = segment_generator(ModelSpec::simple_exclusion(), 1, m, Geometry::segment(ell, 1));
    const double N = 2 * ell + 1;
    CHECK(spectral_gap(gen).gap == doctest::Approx(1.0 - std::cos(M_PI / N)).epsilon(1e-10));
  }
  CHECK(spectral_gap(segment_generator(ModelSpec::simple_exclusion(), 1, m, Geometry::segment(2, 0))).W == 0.0);
  const auto mk = MeasureSpec::markov_gibbs(0.8, -0.3);
  const auto sc = ModelSpec::speed_change(0.8, {std::exp(0.8) - 1.0, std::exp(0.8), 1.0, 2.0});
  const auto gen = segment_generator(sc, 1, mk, Geometry::segment(3, 3, {1, 0}, {1, 1}));
  CHECK(detailed_balance_residual(gen) < 1e-12);
}

TEST_CASE("gap solvers agree") {
  const auto m = MeasureSpec::bernoulli(0.5);
  const auto gen = segment_generator(ModelSpec::kclg(2, 0.5), 8, m, Geometry::segment(4, 4, {1}, {0}));
  const double dense = spectral_gap(gen, GapMethod::Dense).gap;
  CHECK(std::abs(spectral_gap(gen, GapMethod::Power).gap - dense) < 1e-8);
  CHECK(std::abs(spectral_gap(gen, GapMethod::Lanczos).gap - dense) < 1e-8);
  const auto ssep = segment_generator(ModelSpec::simple_exclusion(), 1, m, Geometry::segment(5, 5));
  CHECK(std::abs(spectral_gap(ssep, GapMethod::Lanczos).gap - spectral_gap(ssep, GapMethod::Dense).gap) < 1e-8);
}

TEST_CASE("kclg gap grows with theta") {
  double prev = -1.0;
  for (double theta : {0.01, 0.1, 1.0, 10.0}) {
    const auto gen = segment_generator(ModelSpec::kclg(2, theta), 4, MeasureSpec::bernoulli(0.5), Geometry::segment(3, 3));
    const double gap = spectral_gap(gen).gap;
    CHECK(gap > prev);
    prev = gap;
  }
}

TEST_CASE("H^-1 norm") {
  const int n = 3;
  const auto gen = segment_generator(ModelSpec::simple_exclusion(), n, MeasureSpec::bernoulli(0.5), Geometry::segment(2, 2));
  const std::size_t S = gen.space.size();
  // r = position of the leftmost particle minus its mean
  std::vector<double> r(S);
  for (std::size_t i = 0; i < S; ++i) {
    const auto& occ = gen.space.state(i);
    r[i] = static_cast<double>(std::find(occ.begin(), occ.end(), 1) - occ.begin());
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < S; ++i) mean += gen.nu[i] * r[i];
  for (double& v : r) v -= mean;
  const auto f = h_minus1_solve(gen, r, n);
  // -n^2 Q f = r
  Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(S));
  const Eigen::VectorXd back = -static_cast<double>(n * n) * (gen.Q * fv);
  for (std::size_t i = 0; i < S; ++i) CHECK(back(static_cast<Eigen::Index>(i)) == doctest::Approx(r[i]).epsilon(1e-9));
  // duality: <r, g> <= |r|_{-1} |g|_1 with equality at g = f
  const double hm = h_minus1_norm_sq(gen, r, n);
  CHECK(h1_norm_sq(gen, f, n) == doctest::Approx(hm).epsilon(1e-9));
  std::vector<double> g(S);
  for (std::size_t i = 0; i < S; ++i) g[i] = std::sin(1.0 + 3.0 * static_cast<double>(i));
  double pair = 0.0;
  for (std::size_t i = 0; i < S; ++i) pair += gen.nu[i] * r[i] * g[i];
  CHECK(std::abs(pair) <= std::sqrt(hm * h1_norm_sq(gen, g, n)) * (1.0 + 1e-12));
  std::vector<double> off = r;
  off[0] += 1.0;
  CHECK_THROWS_AS(h_minus1_solve(gen, off, n), std::invalid_argument);
}

TEST_CASE("H^-1 norm of an eigenvector") {
  const int n = 2;
  const auto gen = segment_generator(ModelSpec::simple_exclusion(), n, MeasureSpec::bernoulli(0.5), Geometry::segment(3, 1));
  const int N = 7;
  // eigenfunctions of the walk with reflecting ends: cos(pi j (x + 1/2) / N), eigenvalue 1 - cos(pi j / N)
  for (int j = 1; j < N; ++j) {
    std::vector<double> r(gen.space.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const auto& occ = gen.space.state(i);
      const int x = static_cast<int>(std::find(occ.begin(), occ.end(), 1) - occ.begin());
      r[i] = std::cos(M_PI * j * (x + 0.5) / N);
      sq += gen.nu[i] * r[i] * r[i];
    }
    const double mu = 1.0 - std::cos(M_PI * j / N);
    CHECK(h_minus1_norm_sq(gen, r, n) == doctest::Approx(sq / (n * n * mu)).epsilon(1e-9));
  }
}

namespace {

// Closed form for f = (eta1 - rho)(eta2 - rho) under Bernoulli(rho): condition on the block sum.
double bernoulli_pair_scaled(double rho, int n) {
  double l4 = 0.0, logp = 0.0;
  for (int k = 0; k <= n; ++k) {
    logp = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(rho) +
           (n - k) * std::log1p(-rho);
    const double y = static_cast<double>(k) / n - rho;
    const double e = (y * y - (1.0 - 2.0 * rho) * y - rho * (1.0 - rho) / n) / (n - 1);
    l4 += std::exp(logp) * std::pow(e, 4);
  }
  return std::pow(l4, 0.25) * std::pow(static_cast<double>(n), 1.5);
}

}  // namespace

TEST_CASE("equivalence of ensembles matches the Bernoulli closed form") {
  for (double rho : {0.4, 0.25}) {
    const auto m = MeasureSpec::bernoulli(rho);
    const std::vector<int> ns = {4, 8, 16, 64, 256};
    const auto rows = ee_error_curve(m, pair_product_fn(1, 2, rho), ns);
    for (const auto& row : rows) CHECK(row.scaled == doctest::Approx(bernoulli_pair_scaled(rho, row.n)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(ee_error_curve(MeasureSpec::bernoulli(0.4), pair_product_fn(1, 2, 0.3), std::vector<int>{8}),
                  std::invalid_argument);
}

TEST_CASE("markov equivalence of ensembles reduces to the product case at beta = 0") {
  const auto mk = MeasureSpec::markov_gibbs(0.0, 0.0);
  const auto b = MeasureSpec::bernoulli(0.5);
  const std::vector<int> ns = {5, 9, 17};
  const auto f = pair_product_fn(1, 2, 0.5);
  const auto a = ee_error_curve(mk, f, ns);
  const auto c = ee_error_curve(b, f, ns);
  for (std::size_t i = 0; i < ns.size(); ++i) CHECK(a[i].error == doctest::Approx(c[i].error).epsilon(1e-9));
}
