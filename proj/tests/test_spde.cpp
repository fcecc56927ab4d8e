#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "kpzlab/spde.hpp"
#include "kpzlab/stats.hpp"

using namespace kpzlab;

namespace {

std::vector<double> grid_times(double t0, double t1, double step) {
  std::vector<double> ts;
  for (int k = 0; t0 + k * step <= t1 + 1e-12; ++k) ts.push_back(t0 + k * step);
  return ts;
}

}  // namespace

TEST_CASE("ou zero noise and zero data stays zero") {
  const auto g = SpdeGrid::make(1.0, 16, 0.5);
  auto rng = replica_stream(1, 0);
  const std::vector<double> ts = {0.1, 0.2};
  for (const auto& s : ou_solve(g, 1.0, 0.0, std::vector<double>(16, 0.0), ts, rng))
    for (double v : s.values) CHECK(v == 0.0);
  auto bad = g;
  bad.dt *= 1.2;
  CHECK_THROWS_AS(ou_solve(bad, 1.0, 0.5, std::vector<double>(16, 0.0), ts, rng), std::invalid_argument);
}

TEST_CASE("ou noiseless mode decay") {
  const double phi_c1 = 1.0;
  const auto g = SpdeGrid::make(1.0, 32, 0.5 * phi_c1);
  auto rng = replica_stream(2, 0);
  for (int mode : {1, 3, 7}) {
    std::vector<double> y(32);
    for (int j = 0; j < 32; ++j) y[static_cast<std::size_t>(j)] = std::cos(2.0 * M_PI * mode * j * g.dx());
    const int steps = 200;
    const std::vector<double> ts = {steps * g.dt};
    const auto out = ou_solve(g, phi_c1, 0.0, y, ts, rng);
    const double f = std::pow(ou_mode_factor(g, phi_c1, mode), steps);
    for (int j = 0; j < 32; ++j)
      CHECK(out[0].values[static_cast<std::size_t>(j)] == doctest::Approx(f * y[static_cast<std::size_t>(j)]).epsilon(1e-9).scale(1.0));
    // per unit time rate (phi_c1/2) lambda, up to O(dt)
    const double rate = -std::log(ou_mode_factor(g, phi_c1, mode)) / g.dt;
    const double lam = 0.5 * phi_c1 * discrete_laplacian_symbol(g, mode);
    const double x = lam * g.dt;
    CHECK(std::abs(rate - lam) / lam <= x / (1.0 - x));
  }
}

TEST_CASE("ou noise conserves the spatial sum") {
  const auto g = SpdeGrid::make(2.0, 40, 0.5);
  auto rng = replica_stream(3, 0);
  std::vector<double> y(40);
  for (int j = 0; j < 40; ++j) y[static_cast<std::size_t>(j)] = std::sin(0.3 * j) + 0.25;
  const double s0 = std::accumulate(y.begin(), y.end(), 0.0);
  const auto out = ou_solve(g, 1.0, 0.5, y, grid_times(0.05, 1.0, 0.05), rng);
  for (const auto& s : out) CHECK(std::accumulate(s.values.begin(), s.values.end(), 0.0) == doctest::Approx(s0).epsilon(1e-10));
}

TEST_CASE("ou stationary variance matches the lyapunov fixed point") {
  const double phi_c1 = 1.0, phi_b = 0.5;
  std::vector<double> scaled;
  for (int M : {16, 32}) {
    const auto g = SpdeGrid::make(1.0, M, 0.5 * phi_c1);
    auto rng = replica_stream(4, static_cast<std::uint64_t>(M));
    // snapshot spacing is a whole number of steps so the fixed-dt chain is sampled
    const auto out = ou_solve(g, phi_c1, phi_b, std::vector<double>(static_cast<std::size_t>(M), 0.0),
                              grid_times(200.0 * g.dt, 150.0, 8.0 * g.dt), rng);
    std::vector<double> point;
    std::vector<double> mode1;
    for (const auto& s : out) {
      double c = 0.0, sn = 0.0;
      for (int j = 0; j < M; ++j) {
        point.push_back(s.values[static_cast<std::size_t>(j)]);
        c += s.values[static_cast<std::size_t>(j)] * std::cos(2.0 * M_PI * j / M);
        sn += s.values[static_cast<std::size_t>(j)] * std::sin(2.0 * M_PI * j / M);
      }
      mode1.push_back((c * c + sn * sn) / M);
    }
    double sq = 0.0;
    for (double v : point) sq += v * v;
    const double var = sq / static_cast<double>(point.size());
    CHECK(std::abs(var / ou_stationary_point_variance(g, phi_c1, phi_b) - 1.0) < 0.03);
    const double m1 = std::accumulate(mode1.begin(), mode1.end(), 0.0) / static_cast<double>(mode1.size());
    CHECK(std::abs(m1 / ou_stationary_mode_variance(g, phi_c1, phi_b, 1) - 1.0) < 0.05);
    scaled.push_back(g.dx() * var);
  }
  // halving dx with dt / 4
  CHECK(std::abs(scaled[1] / scaled[0] - 1.0) < 0.02);
}

TEST_CASE("she noiseless gaussian spreads with variance 2Dt") {
  const double D = 1.0, L = 20.0;
  const int M = 400;
  const auto g = SpdeGrid::make(L, M, D);
  std::vector<double> z(M);
  for (int j = 0; j < M; ++j) {
    const double x = j * g.dx() - 10.0;
    z[static_cast<std::size_t>(j)] = std::exp(-x * x / 0.5);
  }
  auto rng = replica_stream(5, 0);
  const std::vector<double> ts = {1.0};
  const auto out = she_cole_hopf(g, D, 1.0, 0.0, z, ts, rng);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int j = 0; j < M; ++j) {
    const double x = j * g.dx() - 10.0, w = out.z[0].values[static_cast<std::size_t>(j)];
    m0 += w;
    m1 += w * x;
    m2 += w * x * x;
  }
  const double var = m2 / m0 - (m1 / m0) * (m1 / m0);
  CHECK(var == doctest::Approx(0.25 + 2.0 * D).epsilon(1e-3));
  CHECK_THROWS_AS(she_cole_hopf(g, D, 1.0, 1.0, std::vector<double>(M, 0.0), ts, rng), std::invalid_argument);
}

TEST_CASE("she ito mean solves the heat equation") {
  const double D = 1.0;
  const int M = 24;
  const auto g = SpdeGrid::make(1.0, M, D);
  std::vector<double> z0(M);
  for (int j = 0; j < M; ++j) z0[static_cast<std::size_t>(j)] = 1.0 + 0.5 * std::cos(2.0 * M_PI * j / M);
  const std::vector<double> ts = {0.02};
  const auto ref = heat_solve(g, D, z0, ts);
  const int R = 1000;
  std::vector<double> at0(R), total(R);
  for (int r = 0; r < R; ++r) {
    auto rng = replica_stream(6, static_cast<std::uint64_t>(r));
    const auto out = she_cole_hopf(g, D, 1.0, 1.0, z0, ts, rng);
    at0[static_cast<std::size_t>(r)] = out.z[0].values[0];
    total[static_cast<std::size_t>(r)] = std::accumulate(out.z[0].values.begin(), out.z[0].values.end(), 0.0);
  }
  const auto s0 = stats::summarize(at0), st = stats::summarize(total);
  CHECK(std::abs(s0.mean - ref[0].values[0]) < 3.0 * s0.se);
  CHECK(std::abs(st.mean - std::accumulate(ref[0].values.begin(), ref[0].values.end(), 0.0)) < 3.0 * st.se);
}

TEST_CASE("she small asymmetry gradient matches the ou law") {
  const double D = 0.5, sigma = 0.5;
  const int M = 32;
  const auto g = SpdeGrid::make(1.0, M, D);
  const std::vector<double> ts = {0.05};
  std::vector<double> she, lin, ou;
  for (int r = 0; r < 1500; ++r) {
    auto rng = replica_stream(7, static_cast<std::uint64_t>(r));
    she.push_back(she_cole_hopf(g, D, 1e-3, sigma, std::vector<double>(M, 1.0), ts, rng).burgers[0].values[5]);
    auto rng2 = replica_stream(8, static_cast<std::uint64_t>(r));
    lin.push_back(she_cole_hopf(g, D, 0.0, sigma, std::vector<double>(M, 1.0), ts, rng2).burgers[0].values[5]);
    auto rng3 = replica_stream(9, static_cast<std::uint64_t>(r));
    ou.push_back(ou_solve(g, 2.0 * D, 2.0 * sigma * sigma, std::vector<double>(M, 0.0), ts, rng3)[0].values[5]);
  }
  CHECK(stats::ks_two_sample(she, ou).p_value > 0.05);
  CHECK(stats::ks_two_sample(lin, ou).p_value > 0.05);
}

TEST_CASE("she gradient one-point law is reflection symmetric") {
  // x -> -x maps the gradient to its negative, so its one-point skewness vanishes for every a
  const double D = 1.0, sigma = 1.0;
  const int M = 32;
  const auto g = SpdeGrid::make(1.0, M, D);
  const std::vector<double> ts = {0.1};
  for (double a : {2.0, -2.0}) {
    std::vector<double> y;
    for (int r = 0; r < 2000; ++r) {
      auto rng = replica_stream(10, static_cast<std::uint64_t>(r));
      y.push_back(she_cole_hopf(g, D, a, sigma, std::vector<double>(M, 1.0), ts, rng).burgers[0].values[0]);
    }
    const auto s = stats::skewness(y);
    CHECK(std::abs(s.value) < 3.0 * s.se);
  }
}
