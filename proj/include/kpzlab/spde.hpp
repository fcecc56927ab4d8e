#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kpzlab/rng.hpp"

namespace kpzlab {

// Periodic grid x_j = j dx on [0, length) stepped by explicit Euler-Maruyama.
struct SpdeGrid {
  double length = 1.0;
  int points = 64;
  double dt = 0.0;
  double safety = 0.9;

  double dx() const noexcept { return length / points; }
  double stable_dt(double diffusion) const noexcept { return safety * dx() * dx() / (2.0 * diffusion); }
  // dt = safety dx^2 / (2 diffusion)
  static SpdeGrid make(double length, int points, double diffusion, double safety = 0.9);
  // Throws std::invalid_argument if dt exceeds dx^2 / (2 diffusion) * safety.
  void check(double diffusion) const;
};

struct FieldSnapshot {
  double t = 0.0;
  std::vector<double> values;
};

// dY = (phi_c1/2) Lap_h Y dt + sqrt(phi_b/2) Grad_h dW with cell noise N(0, dt/dx).
// Grad_h is the backward difference, so the spatial sum of Y is conserved exactly.
std::vector<FieldSnapshot> ou_solve(const SpdeGrid& grid, double phi_c1, double phi_b, std::vector<double> y0,
                                    std::span<const double> times, CounterRng& rng);

double discrete_laplacian_symbol(const SpdeGrid& grid, int mode);  // (2 - 2 cos(kappa dx)) / dx^2
// Per-step amplification 1 - (phi_c1/2) lambda dt of a Fourier mode.
double ou_mode_factor(const SpdeGrid& grid, double phi_c1, int mode);
// Stationary E|Y_hat(kappa)|^2 for the unitary DFT, from the scalar Lyapunov equation.
double ou_stationary_mode_variance(const SpdeGrid& grid, double phi_c1, double phi_b, int mode);
// One-point stationary variance of a mean-zero field: (1/M) sum over nonzero modes.
double ou_stationary_point_variance(const SpdeGrid& grid, double phi_c1, double phi_b);

struct SheResult {
  std::vector<FieldSnapshot> z;
  std::vector<FieldSnapshot> burgers;  // (D/a) Grad_h log z, forward difference
  std::size_t halvings = 0;
};

// Ito scheme z <- z + D Lap_h z dt + (a sigma / D) z dW. A step producing z <= 0 is retried
// as two half steps sharing the same Brownian increment (bridge split).
// a = 0 evolves the linearization u = lim (D/a) log z: du = D Lap_h u dt + sigma dW; z stays at z0.
SheResult she_cole_hopf(const SpdeGrid& grid, double D, double a, double sigma, std::vector<double> z0,
                        std::span<const double> times, CounterRng& rng);

// Noiseless reference: the deterministic part of the scheme on the same time grid.
std::vector<FieldSnapshot> heat_solve(const SpdeGrid& grid, double D, std::vector<double> z0,
                                      std::span<const double> times);

}  // namespace kpzlab
