#include "kpzlab/spde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kpzlab {

SpdeGrid SpdeGrid::make(double length, int points, double diffusion, double safety) {
  if (!(length > 0.0) || points < 4) throw std::invalid_argument("spde grid needs length > 0 and at least 4 points");
  if (!(diffusion > 0.0)) throw std::invalid_argument("spde grid needs a positive diffusion coefficient");
  SpdeGrid g;
  g.length = length;
  g.points = points;
  g.safety = safety;
  g.dt = g.stable_dt(diffusion);
  return g;
}

void SpdeGrid::check(double diffusion) const {
  if (!(dt > 0.0)) throw std::invalid_argument("spde grid: dt must be positive");
  if (dt > stable_dt(diffusion) * (1.0 + 1e-12))
    throw std::invalid_argument("spde grid: dt " + std::to_string(dt) + " violates the stability bound " +
                                std::to_string(stable_dt(diffusion)));
}

namespace {

void validate_times(std::span<const double> times) {
  double prev = 0.0;
  for (double t : times) {
    if (t < prev) throw std::invalid_argument("spde: snapshot times must be non-decreasing and >= 0");
    prev = t;
  }
}

void laplacian(const std::vector<double>& y, std::vector<double>& out, double inv_dx2) {
  const std::size_t M = y.size();
  for (std::size_t j = 0; j < M; ++j) {
    const double l = y[j == 0 ? M - 1 : j - 1], r = y[j + 1 == M ? 0 : j + 1];
    out[j] = (l + r - 2.0 * y[j]) * inv_dx2;
  }
}

void guard(const std::vector<double>& y, const char* who) {
  for (double v : y)
    if (!std::isfinite(v) || std::abs(v) > 1e150) throw std::runtime_error(std::string(who) + ": field blow-up");
}

// Drives `step(h)` across the snapshot times with nominal step dt.
template <class Step, class Snap>
void march(double dt, std::span<const double> times, Step&& step, Snap&& snap) {
  double t = 0.0;
  for (double target : times) {
    while (target - t > 1e-12 * dt) {
      const double h = std::min(dt, target - t);
      step(h);
      t = target - t <= dt ? target : t + h;
    }
    snap(target);
  }
}

}  // namespace

std::vector<FieldSnapshot> ou_solve(const SpdeGrid& grid, double phi_c1, double phi_b, std::vector<double> y,
                                    std::span<const double> times, CounterRng& rng) {
  const double D = 0.5 * phi_c1;
  grid.check(D);
  if (phi_b < 0.0) throw std::invalid_argument("ou_solve: phi_b must be non-negative");
  if (static_cast<int>(y.size()) != grid.points) throw std::invalid_argument("ou_solve: initial field size mismatch");
  validate_times(times);
  const std::size_t M = y.size();
  const double dx = grid.dx(), inv_dx2 = 1.0 / (dx * dx), amp = std::sqrt(0.5 * phi_b);
  std::vector<double> lap(M), xi(M);
  std::vector<FieldSnapshot> out;
  march(
      grid.dt, times,
      [&](double h) {
        laplacian(y, lap, inv_dx2);
        const double s = std::sqrt(h / dx);
        if (amp > 0.0)
          for (double& v : xi) v = s * rng.normal();
        for (std::size_t j = 0; j < M; ++j) {
          const double grad = amp > 0.0 ? amp * (xi[j] - xi[j == 0 ? M - 1 : j - 1]) / dx : 0.0;
          y[j] += D * lap[j] * h + grad;
        }
        guard(y, "ou_solve");
      },
      [&](double t) { out.push_back({t, y}); });
  return out;
}

double discrete_laplacian_symbol(const SpdeGrid& grid, int mode) {
  const double k = 2.0 * M_PI * mode / grid.length, dx = grid.dx();
  return (2.0 - 2.0 * std::cos(k * dx)) / (dx * dx);
}

double ou_mode_factor(const SpdeGrid& grid, double phi_c1, int mode) {
  return 1.0 - 0.5 * phi_c1 * discrete_laplacian_symbol(grid, mode) * grid.dt;
}

double ou_stationary_mode_variance(const SpdeGrid& grid, double phi_c1, double phi_b, int mode) {
  const double lam = discrete_laplacian_symbol(grid, mode);
  const double r = ou_mode_factor(grid, phi_c1, mode);
  if (lam == 0.0) throw std::invalid_argument("the zero mode is conserved and has no stationary law");
  return 0.5 * phi_b * lam * (grid.dt / grid.dx()) / (1.0 - r * r);
}

double ou_stationary_point_variance(const SpdeGrid& grid, double phi_c1, double phi_b) {
  double s = 0.0;
  for (int m = 1; m < grid.points; ++m) s += ou_stationary_mode_variance(grid, phi_c1, phi_b, m);
  return s / grid.points;
}

SheResult she_cole_hopf(const SpdeGrid& grid, double D, double a, double sigma, std::vector<double> z,
                        std::span<const double> times, CounterRng& rng) {
  grid.check(D);
  if (static_cast<int>(z.size()) != grid.points) throw std::invalid_argument("she_cole_hopf: initial field size mismatch");
  for (double v : z)
    if (!(v > 0.0)) throw std::invalid_argument("she_cole_hopf: initial data must be strictly positive");
  validate_times(times);
  const std::size_t M = z.size();
  const double dx = grid.dx(), inv_dx2 = 1.0 / (dx * dx);
  SheResult res;
  std::vector<double> lap(M), xi(M), trial(M);

  if (a == 0.0) {
    std::vector<double> u(M);
    for (std::size_t j = 0; j < M; ++j) u[j] = 0.0;
    march(
        grid.dt, times,
        [&](double h) {
          laplacian(u, lap, inv_dx2);
          const double s = sigma * std::sqrt(h / dx);
          for (std::size_t j = 0; j < M; ++j) u[j] += D * lap[j] * h + s * rng.normal();
          guard(u, "she_cole_hopf");
        },
        [&](double t) {
          std::vector<double> y(M);
          for (std::size_t j = 0; j < M; ++j) y[j] = (u[j + 1 == M ? 0 : j + 1] - u[j]) / dx;
          res.z.push_back({t, z});
          res.burgers.push_back({t, std::move(y)});
        });
    return res;
  }

  const double kappa = a * sigma / D;
  // One attempt over h with given increments; recursive bridge split on non-positivity.
  auto attempt = [&](auto&& self, std::vector<double>& f, const std::vector<double>& dw, double h, int depth) -> void {
    laplacian(f, lap, inv_dx2);
    bool ok = true;
    for (std::size_t j = 0; j < M; ++j) {
      trial[j] = f[j] + D * lap[j] * h + kappa * f[j] * dw[j];
      if (!(trial[j] > 0.0)) ok = false;
    }
    if (ok) {
      f.swap(trial);
      return;
    }
    if (depth >= 30) throw std::runtime_error("she_cole_hopf: persistent positivity failure");
    ++res.halvings;
    std::vector<double> w1(M), w2(M);
    const double s = std::sqrt(h / (4.0 * dx));
    for (std::size_t j = 0; j < M; ++j) {
      w1[j] = 0.5 * dw[j] + s * rng.normal();
      w2[j] = dw[j] - w1[j];
    }
    self(self, f, w1, 0.5 * h, depth + 1);
    self(self, f, w2, 0.5 * h, depth + 1);
  };
  march(
      grid.dt, times,
      [&](double h) {
        const double s = std::sqrt(h / dx);
        for (double& v : xi) v = s * rng.normal();
        attempt(attempt, z, xi, h, 0);
        guard(z, "she_cole_hopf");
      },
      [&](double t) {
        std::vector<double> y(M);
        for (std::size_t j = 0; j < M; ++j) y[j] = (D / a) * (std::log(z[j + 1 == M ? 0 : j + 1]) - std::log(z[j])) / dx;
        res.z.push_back({t, z});
        res.burgers.push_back({t, std::move(y)});
      });
  return res;
}

std::vector<FieldSnapshot> heat_solve(const SpdeGrid& grid, double D, std::vector<double> z,
                                      std::span<const double> times) {
  grid.check(D);
  validate_times(times);
  std::vector<double> lap(z.size());
  const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
  std::vector<FieldSnapshot> out;
  march(
      grid.dt, times,
      [&](double h) {
        laplacian(z, lap, inv_dx2);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += D * lap[j] * h;
      },
      [&](double t) { out.push_back({t, z}); });
  return out;
}

}  // namespace kpzlab
