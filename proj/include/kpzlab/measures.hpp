#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kpzlab/model.hpp"
#include "kpzlab/rng.hpp"

namespace kpzlab {

enum class MeasureKind { Bernoulli, ProductZrp, MarkovGibbs };

// Stationary Markov chain on occupancy values 0..states-1. Product measures are chains
// whose rows all equal the marginal.
struct SiteChain {
  int states = 0;
  std::vector<double> pi;
  std::vector<double> P;  // row-major
  bool product = true;

  double p(int i, int j) const { return P[static_cast<std::size_t>(i * states + j)]; }
  double mean() const;
  // Largest modulus among the non-unit eigenvalues (0 for product chains, exact for 2 states).
  double mixing_rate() const;
};

struct MeasureSpec {
  MeasureKind kind = MeasureKind::Bernoulli;
  double rho = 0.5;
  // zero-range
  double alpha = 0.0;
  RateFunction g;
  double tail = 1e-12;
  double discarded_mass = 0.0;
  // Markov Gibbs
  double beta = 0.0;
  double lambda = 0.0;

  SiteChain chain;

  static MeasureSpec bernoulli(double rho);
  static MeasureSpec zrp_fugacity(RateFunction g, double alpha, double tail = 1e-12);
  static MeasureSpec zrp_density(RateFunction g, double rho, double tail = 1e-12);
  static MeasureSpec markov_gibbs(double beta, double lambda);
  static MeasureSpec markov_gibbs_density(double beta, double rho);

  // Member of the tilted family with the same structural parameters and density z.
  MeasureSpec at_density(double z) const;
  bool product() const noexcept { return kind != MeasureKind::MarkovGibbs; }
  std::string describe() const;
};

// Gibbs pair weight of neighbouring occupancies, exp(beta (e - 1/2)(e' - 1/2)).
double gibbs_pair_weight(double beta, int e, int e2);

// Zero-range partition function helpers (radius of convergence estimated on the tabulated range).
double zrp_alpha_star(const RateFunction& g, int kmax = 2000);
double zrp_density(const RateFunction& g, double alpha);
double zrp_fugacity(const RateFunction& g, double rho);
// Marginal alpha^k / (g(1)...g(k) Z(alpha)) truncated where the remaining tail mass is below tail;
// the kept part is renormalized and the discarded mass is reported.
std::vector<double> zrp_marginal(const RateFunction& g, double alpha, double tail, double* discarded = nullptr);

Configuration sample_configuration(const MeasureSpec& measure, int L, CounterRng& rng);

struct PerturbedSample {
  Configuration config;
  std::vector<double> kappa;       // kappa(x/n) per ring site, centred coordinates
  std::vector<double> site_means;  // rho + kappa/sqrt(n)
};

// Independent sites with means rho + kappa(x/n)/sqrt(n); x is the centred ring coordinate.
PerturbedSample sample_perturbed_initial(const MeasureSpec& measure, const std::function<double(double)>& kappa,
                                         int n, int L, CounterRng& rng);
// Exact relative entropy H(mu^n ; nu_rho) for a product initial law with given site means.
double perturbed_relative_entropy(const MeasureSpec& measure, const std::vector<double>& site_means);

struct LocalFunction {
  std::string name;
  Window support;
  std::function<double(std::span<const int>)> eval;  // occupancies on support.lo..support.hi

  double operator()(const Configuration& config, int x) const;
  double on_pattern(std::span<const int> pattern) const { return eval(pattern); }
};

LocalFunction zero_fn();
LocalFunction density_fn(double rho);                          // eta(0) - rho
LocalFunction pair_product_fn(int x1, int x2, double rho);      // (eta(x1)-rho)(eta(x2)-rho)
LocalFunction rate_sum_fn(const ModelSpec& spec, int n);        // b = bR + bL at bond 0
LocalFunction c_fn(const ModelSpec& spec, int n);
// V_b = b - phi_b - phi1_b (eta(0) - rho)
LocalFunction centered_rate_fn(const ModelSpec& spec, int n, double rho, double phi_b, double phi1_b);

double expectation(const LocalFunction& f, const MeasureSpec& measure);
double lp_norm(const LocalFunction& f, const MeasureSpec& measure, double p);

struct TiltedMeans {
  double phi = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  std::string method;
};

// Exact: phi' = Cov(f,S)/chi, phi'' from the third joint cumulant with S = sum(eta - z),
// truncated exactly (product) or at correlation decay 1e-13 (Markov).
TiltedMeans phi_derivatives(const LocalFunction& f, const MeasureSpec& measure);
// Centered finite differences of z -> E_{nu_z}[f] with lambda(z) solved by bisection.
TiltedMeans phi_derivatives_fd(const LocalFunction& f, const MeasureSpec& measure, double h = 1e-3);

// (2 ell + 1) times the variance of the block density average over Lambda_ell.
double sigma2(const MeasureSpec& measure, int ell);
double sigma2_infinity(const MeasureSpec& measure);

}  // namespace kpzlab
