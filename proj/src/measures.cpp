#include "kpzlab/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kpzlab {

namespace {

constexpr int kMaxSupport = 32;

SiteChain product_chain(std::vector<double> marginal) {
  SiteChain ch;
  ch.states = static_cast<int>(marginal.size());
  ch.pi = marginal;
  ch.P.resize(marginal.size() * marginal.size());
  for (int i = 0; i < ch.states; ++i)
    for (int j = 0; j < ch.states; ++j) ch.P[static_cast<std::size_t>(i * ch.states + j)] = marginal[static_cast<std::size_t>(j)];
  ch.product = true;
  return ch;
}

// P_lambda for the nearest-neighbour Gibbs measure with coupling beta.
SiteChain gibbs_chain(double beta, double lambda) {
  const double p1 = std::exp(beta / 4 - lambda / 2) + std::exp(-beta / 4 + lambda / 2);
  const double p2 = std::exp(-beta / 4 - lambda / 2) + std::exp(beta / 4 + lambda / 2);
  SiteChain ch;
  ch.states = 2;
  ch.product = false;
  ch.P = {std::exp(beta / 4 - lambda / 2) / p1, std::exp(-beta / 4 + lambda / 2) / p1,
          std::exp(-beta / 4 - lambda / 2) / p2, std::exp(beta / 4 + lambda / 2) / p2};
  const double a = ch.P[1], b = ch.P[2];
  ch.pi = {b / (a + b), a / (a + b)};
  return ch;
}

// Depth-first enumeration of patterns of given width with their chain weights.
template <class F>
void enumerate_patterns(const SiteChain& ch, int width, F&& f) {
  std::array<int, kMaxSupport> pat{};
  if (width > kMaxSupport) throw std::invalid_argument("local function support too wide");
  auto rec = [&](auto&& self, int i, double w) -> void {
    if (i == width) {
      f(std::span<const int>(pat.data(), static_cast<std::size_t>(width)), w);
      return;
    }
    for (int s = 0; s < ch.states; ++s) {
      const double w2 = i == 0 ? ch.pi[static_cast<std::size_t>(s)] : w * ch.p(pat[static_cast<std::size_t>(i - 1)], s);
      if (w2 == 0.0) continue;
      pat[static_cast<std::size_t>(i)] = s;
      self(self, i + 1, w2);
    }
  };
  rec(rec, 0, 1.0);
}

// Raw ZRP weights alpha^k / g(1)..g(k) until they underflow.
std::vector<double> zrp_weights(const RateFunction& g, double alpha) {
  std::vector<double> w{1.0};
  double cur = 1.0, total = 1.0;
  for (int k = 1; k < 200000; ++k) {
    cur *= alpha / g(k);
    if (!std::isfinite(cur)) throw std::invalid_argument("ZRP partition function diverges: alpha >= alpha*");
    w.push_back(cur);
    total += cur;
    if (cur < 1e-300 || (k > 10 && cur < 1e-19 * total && alpha / g(k + 1) < 0.999)) return w;
  }
  throw std::invalid_argument("ZRP partition function does not converge: alpha too close to alpha*");
}

}  // namespace

double SiteChain::mean() const {
  double m = 0.0;
  for (int s = 0; s < states; ++s) m += s * pi[static_cast<std::size_t>(s)];
  return m;
}

double SiteChain::mixing_rate() const {
  if (product) return 0.0;
  if (states != 2) throw std::logic_error("mixing_rate only implemented for two-state chains");
  return std::abs(P[0] + P[3] - 1.0);
}

double gibbs_pair_weight(double beta, int e, int e2) { return std::exp(beta * (e - 0.5) * (e2 - 0.5)); }

double zrp_alpha_star(const RateFunction& g, int kmax) {
  double s = 0.0;
  for (int k = 1; k <= kmax; ++k) s += std::log(g(k));
  return std::exp(s / kmax);
}

double zrp_density(const RateFunction& g, double alpha) {
  if (alpha <= 0.0) return 0.0;
  const auto w = zrp_weights(g, alpha);
  double z = 0.0, m = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    z += w[k];
    m += static_cast<double>(k) * w[k];
  }
  return m / z;
}

double zrp_fugacity(const RateFunction& g, double rho) {
  if (rho < 0.0) throw std::invalid_argument("negative density");
  if (rho == 0.0) return 0.0;
  const double astar = zrp_alpha_star(g);
  double lo = 0.0, hi = std::min(1.0, astar * 0.5);
  while (zrp_density(g, hi) < rho) {
    lo = hi;
    hi = std::min(2.0 * hi, 0.5 * (hi + astar));
    if (astar - hi < 1e-12 * astar) throw std::invalid_argument("density not reachable below alpha*");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (zrp_density(g, mid) < rho ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> zrp_marginal(const RateFunction& g, double alpha, double tail, double* discarded) {
  auto w = zrp_weights(g, alpha);
  double z = 0.0;
  for (double v : w) z += v;
  // Drop the largest tail with mass below `tail`.
  double acc = 0.0;
  std::size_t keep = w.size();
  while (keep > 1 && acc + w[keep - 1] / z < tail) acc += w[--keep] / z;
  w.resize(keep);
  double kept = 0.0;
  for (double v : w) kept += v;
  for (double& v : w) v /= kept;
  if (discarded) *discarded = acc;
  return w;
}

MeasureSpec MeasureSpec::bernoulli(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("Bernoulli density outside [0,1]");
  MeasureSpec m;
  m.kind = MeasureKind::Bernoulli;
  m.rho = rho;
  m.chain = product_chain({1.0 - rho, rho});
  return m;
}

MeasureSpec MeasureSpec::zrp_fugacity(RateFunction g, double alpha, double tail) {
  if (alpha < 0.0) throw std::invalid_argument("negative fugacity");
  const double astar = zrp_alpha_star(g);
  if (alpha >= astar) throw std::invalid_argument("fugacity at or beyond alpha*");
  MeasureSpec m;
  m.kind = MeasureKind::ProductZrp;
  m.alpha = alpha;
  m.tail = tail;
  m.chain = product_chain(zrp_marginal(g, alpha, tail, &m.discarded_mass));
  m.g = std::move(g);
  m.rho = m.chain.mean();
  return m;
}

MeasureSpec MeasureSpec::zrp_density(RateFunction g, double rho, double tail) {
  const double alpha = kpzlab::zrp_fugacity(g, rho);
  return zrp_fugacity(std::move(g), alpha, tail);
}

MeasureSpec MeasureSpec::markov_gibbs(double beta, double lambda) {
  MeasureSpec m;
  m.kind = MeasureKind::MarkovGibbs;
  m.beta = beta;
  m.lambda = lambda;
  m.chain = gibbs_chain(beta, lambda);
  m.rho = m.chain.pi[1];
  return m;
}

MeasureSpec MeasureSpec::markov_gibbs_density(double beta, double rho) {
  constexpr double lam_max = 4.0;
  const double lo_rho = gibbs_chain(beta, -lam_max).pi[1], hi_rho = gibbs_chain(beta, lam_max).pi[1];
  if (!(rho >= lo_rho && rho <= hi_rho)) throw std::invalid_argument("density requires tilt outside |lambda| <= 4");
  double lo = -lam_max, hi = lam_max;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gibbs_chain(beta, mid).pi[1] < rho ? lo : hi) = mid;
  }
  return markov_gibbs(beta, 0.5 * (lo + hi));
}

MeasureSpec MeasureSpec::at_density(double z) const {
  switch (kind) {
    case MeasureKind::Bernoulli: return bernoulli(z);
    case MeasureKind::ProductZrp: return zrp_density(g, z, tail);
    case MeasureKind::MarkovGibbs: return markov_gibbs_density(beta, z);
  }
  return *this;
}

std::string MeasureSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case MeasureKind::Bernoulli: os << "bernoulli(rho=" << rho << ")"; break;
    case MeasureKind::ProductZrp: os << "zrp(g=" << g.name() << ",alpha=" << alpha << ",rho=" << rho << ")"; break;
    case MeasureKind::MarkovGibbs: os << "markov_gibbs(beta=" << beta << ",lambda=" << lambda << ",rho=" << rho << ")"; break;
  }
  return os.str();
}

namespace {

int sample_from(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c[i] = (acc += p[i]);
  for (double& v : c) v /= acc;
  return c;
}

}  // namespace

Configuration sample_configuration(const MeasureSpec& measure, int L, CounterRng& rng) {
  if (L < 2) throw std::invalid_argument("ring size must be at least 2");
  std::vector<int> occ(static_cast<std::size_t>(L));
  const SiteChain& ch = measure.chain;
  if (ch.product) {
    const auto cdf = cumulative(ch.pi);
    for (int& v : occ) v = sample_from(cdf, rng.uniform());
    return Configuration(std::move(occ));
  }
  // Ring Gibbs measure prop. to prod P(eta_x, eta_{x+1}) with eta_L = eta_0: draw eta_0 from
  // diag(P^L)/tr(P^L), then bridge P(eta_x = j | eta_{x-1} = i) prop. to P(i,j) P^{L-x}(j, eta_0).
  const int K = ch.states;
  std::vector<std::vector<double>> pw(static_cast<std::size_t>(L + 1), std::vector<double>(static_cast<std::size_t>(K * K)));
  for (int i = 0; i < K; ++i) pw[0][static_cast<std::size_t>(i * K + i)] = 1.0;
  for (int m = 1; m <= L; ++m)
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += pw[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i * K + k)] * ch.p(k, j);
        pw[static_cast<std::size_t>(m)][static_cast<std::size_t>(i * K + j)] = s;
      }
  std::vector<double> w0(static_cast<std::size_t>(K));
  for (int s = 0; s < K; ++s) w0[static_cast<std::size_t>(s)] = pw[static_cast<std::size_t>(L)][static_cast<std::size_t>(s * K + s)];
  const int s0 = sample_from(cumulative(w0), rng.uniform());
  occ[0] = s0;
  std::vector<double> w(static_cast<std::size_t>(K));
  for (int x = 1; x < L; ++x) {
    const int i = occ[static_cast<std::size_t>(x - 1)];
    for (int j = 0; j < K; ++j)
      w[static_cast<std::size_t>(j)] = ch.p(i, j) * pw[static_cast<std::size_t>(L - x)][static_cast<std::size_t>(j * K + s0)];
    occ[static_cast<std::size_t>(x)] = sample_from(cumulative(w), rng.uniform());
  }
  return Configuration(std::move(occ));
}

PerturbedSample sample_perturbed_initial(const MeasureSpec& measure, const std::function<double(double)>& kappa,
                                         int n, int L, CounterRng& rng) {
  if (!measure.product()) throw std::invalid_argument("perturbed initial laws are product laws");
  PerturbedSample out;
  out.kappa.resize(static_cast<std::size_t>(L));
  out.site_means.resize(static_cast<std::size_t>(L));
  std::vector<int> occ(static_cast<std::size_t>(L));
  const double sn = std::sqrt(static_cast<double>(n));
  for (int x = 0; x < L; ++x) {
    const int xc = x < L - L / 2 ? x : x - L;
    const double k = kappa(static_cast<double>(xc) / n);
    const double mean = measure.rho + k / sn;
    out.kappa[static_cast<std::size_t>(x)] = k;
    out.site_means[static_cast<std::size_t>(x)] = mean;
    std::vector<double> marg;
    if (measure.kind == MeasureKind::Bernoulli) {
      if (mean < 0.0 || mean > 1.0) throw std::invalid_argument("perturbed site probability outside [0,1]");
      marg = {1.0 - mean, mean};
    } else {
      if (mean < 0.0) throw std::invalid_argument("perturbed site density negative");
      marg = k == 0.0 ? measure.chain.pi : measure.at_density(mean).chain.pi;
    }
    occ[static_cast<std::size_t>(x)] = sample_from(cumulative(marg), rng.uniform());
  }
  out.config = Configuration(std::move(occ));
  return out;
}

double perturbed_relative_entropy(const MeasureSpec& measure, const std::vector<double>& site_means) {
  double h = 0.0;
  for (double mean : site_means) {
    if (mean == measure.rho) continue;
    const auto& q = measure.chain.pi;
    const auto p = measure.at_density(mean).chain.pi;
    for (std::size_t k = 0; k < p.size() && k < q.size(); ++k)
      if (p[k] > 0.0) h += p[k] * std::log(p[k] / q[k]);
  }
  return h;
}

double LocalFunction::operator()(const Configuration& config, int x) const {
  std::array<int, kMaxSupport> pat{};
  const int w = support.width();
  for (int j = 0; j < w; ++j) pat[static_cast<std::size_t>(j)] = config[static_cast<long long>(x) + support.lo + j];
  return eval(std::span<const int>(pat.data(), static_cast<std::size_t>(w)));
}

LocalFunction zero_fn() {
  return {"zero", {0, 0}, [](std::span<const int>) { return 0.0; }};
}

LocalFunction density_fn(double rho) {
  return {"density", {0, 0}, [rho](std::span<const int> p) { return p[0] - rho; }};
}

LocalFunction pair_product_fn(int x1, int x2, double rho) {
  const int lo = std::min(x1, x2), hi = std::max(x1, x2);
  return {"pair_product", {lo, hi}, [=](std::span<const int> p) {
            return (p[static_cast<std::size_t>(x1 - lo)] - rho) * (p[static_cast<std::size_t>(x2 - lo)] - rho);
          }};
}

LocalFunction rate_sum_fn(const ModelSpec& spec, int n) {
  const Window w = spec.bond_window();
  return {"b", w, [spec, n, lo = w.lo](std::span<const int> p) {
            const BondRates r = local_rates(spec, n, [&](int j) { return p[static_cast<std::size_t>(j - lo)]; });
            return r.right + r.left;
          }};
}

LocalFunction c_fn(const ModelSpec& spec, int n) {
  const Window w = spec.c_window();
  return {"c", w, [spec, n, lo = w.lo](std::span<const int> p) {
            return local_c(spec, n, [&](int j) { return p[static_cast<std::size_t>(j - lo)]; });
          }};
}

LocalFunction centered_rate_fn(const ModelSpec& spec, int n, double rho, double phi_b, double phi1_b) {
  const Window w = spec.bond_window();
  return {"V_b", w, [spec, n, lo = w.lo, rho, phi_b, phi1_b](std::span<const int> p) {
            const BondRates r = local_rates(spec, n, [&](int j) { return p[static_cast<std::size_t>(j - lo)]; });
            return r.right + r.left - phi_b - phi1_b * (p[static_cast<std::size_t>(-lo)] - rho);
          }};
}

double expectation(const LocalFunction& f, const MeasureSpec& measure) {
  double e = 0.0;
  enumerate_patterns(measure.chain, f.support.width(), [&](std::span<const int> p, double w) { e += w * f.eval(p); });
  return e;
}

double lp_norm(const LocalFunction& f, const MeasureSpec& measure, double p) {
  double e = 0.0;
  enumerate_patterns(measure.chain, f.support.width(),
                     [&](std::span<const int> pat, double w) { e += w * std::pow(std::abs(f.eval(pat)), p); });
  return std::pow(e, 1.0 / p);
}

namespace {

struct SMoments {
  double e1 = 0.0;  // E[(g - Eg) S]
  double e2 = 0.0;  // E[(g - Eg) S^2]
};

// Joint moments of a centred local function with S = sum_x (eta_x - z), summed over the support
// plus W sites each side (W = 0 is exact for product chains).
SMoments moments_with_sum(const LocalFunction& f, const SiteChain& ch) {
  const int K = ch.states;
  const double z = ch.mean();
  double Ef = 0.0;
  const int width = f.support.width();
  enumerate_patterns(ch, width, [&](std::span<const int> p, double w) { Ef += w * f.eval(p); });
  int W = 0;
  if (!ch.product) {
    const double r = ch.mixing_rate();
    W = r > 0.0 ? static_cast<int>(std::ceil(std::log(1e-13) / std::log(r))) + 5 : 0;
  }
  // Conditional moments of the outside sums given the boundary state of the support.
  std::vector<double> A1(static_cast<std::size_t>(K), 0.0), A2(A1), B1(A1), B2(A1);
  auto zeta = [z](int s) { return s - z; };
  for (int d = 0; d < W; ++d) {
    std::vector<double> nA1(A1.size(), 0.0), nA2(A1.size(), 0.0), nB1(A1.size(), 0.0), nB2(A1.size(), 0.0);
    for (int s = 0; s < K; ++s)
      for (int t = 0; t < K; ++t) {
        const double back = ch.pi[static_cast<std::size_t>(t)] * ch.p(t, s) / ch.pi[static_cast<std::size_t>(s)];
        const double fwd = ch.p(s, t);
        const double zt = zeta(t);
        const auto tt = static_cast<std::size_t>(t), ss = static_cast<std::size_t>(s);
        nA1[ss] += back * (zt + A1[tt]);
        nA2[ss] += back * (zt * zt + 2 * zt * A1[tt] + A2[tt]);
        nB1[ss] += fwd * (zt + B1[tt]);
        nB2[ss] += fwd * (zt * zt + 2 * zt * B1[tt] + B2[tt]);
      }
    A1.swap(nA1);
    A2.swap(nA2);
    B1.swap(nB1);
    B2.swap(nB2);
  }
  SMoments out;
  enumerate_patterns(ch, width, [&](std::span<const int> p, double w) {
    if (p.empty()) return;
    const double g = f.eval(p) - Ef;
    double M = 0.0;
    for (int s : p) M += zeta(s);
    const auto l = static_cast<std::size_t>(p.front()), r = static_cast<std::size_t>(p.back());
    out.e1 += w * g * (A1[l] + M + B1[r]);
    out.e2 += w * g * (A2[l] + B2[r] + M * M + 2 * A1[l] * M + 2 * B1[r] * M + 2 * A1[l] * B1[r]);
  });
  return out;
}

}  // namespace

TiltedMeans phi_derivatives(const LocalFunction& f, const MeasureSpec& measure) {
  const SiteChain& ch = measure.chain;
  const double z = ch.mean();
  const SMoments mf = moments_with_sum(f, ch);
  const SMoments md = moments_with_sum(density_fn(z), ch);
  const double chi = md.e1;
  if (!(chi > 0.0)) throw std::runtime_error("phi_derivatives: degenerate compressibility");
  const double l1 = 1.0 / chi;
  const double l2 = -md.e2 / (chi * chi * chi);
  TiltedMeans out;
  out.phi = expectation(f, measure);
  out.phi1 = mf.e1 * l1;
  out.phi2 = l1 * l1 * mf.e2 + l2 * mf.e1;
  out.method = "exact-enumeration";
  return out;
}

TiltedMeans phi_derivatives_fd(const LocalFunction& f, const MeasureSpec& measure, double h) {
  MeasureSpec base = measure;
  if (base.kind == MeasureKind::ProductZrp) base = MeasureSpec::zrp_fugacity(measure.g, measure.alpha, 1e-20);
  const double z = base.rho;
  auto phi = [&](double zz) { return expectation(f, base.at_density(zz)); };
  const double fp2 = phi(z + 2 * h), fp1 = phi(z + h), f0 = expectation(f, base), fm1 = phi(z - h), fm2 = phi(z - 2 * h);
  TiltedMeans out;
  out.phi = f0;
  out.phi1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
  out.phi2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h);
  out.method = "lambda-finite-difference";
  return out;
}

namespace {

// Covariances Cov(eta_0, eta_d) for d = 0..dmax.
std::vector<double> covariances(const SiteChain& ch, int dmax) {
  const int K = ch.states;
  const double z = ch.mean();
  std::vector<double> v(static_cast<std::size_t>(K)), out;
  for (int s = 0; s < K; ++s) v[static_cast<std::size_t>(s)] = s - z;
  for (int d = 0; d <= dmax; ++d) {
    double c = 0.0;
    for (int s = 0; s < K; ++s) c += ch.pi[static_cast<std::size_t>(s)] * (s - z) * v[static_cast<std::size_t>(s)];
    out.push_back(c);
    if (ch.product && d == 0) {
      out.resize(static_cast<std::size_t>(dmax + 1), 0.0);
      return out;
    }
    std::vector<double> nv(static_cast<std::size_t>(K), 0.0);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) nv[static_cast<std::size_t>(i)] += ch.p(i, j) * v[static_cast<std::size_t>(j)];
    v.swap(nv);
  }
  return out;
}

}  // namespace

double sigma2(const MeasureSpec& measure, int ell) {
  if (ell < 0) throw std::invalid_argument("sigma2: negative block radius");
  const int N = 2 * ell + 1;
  const auto c = covariances(measure.chain, N - 1);
  double var = N * c[0];
  for (int d = 1; d < N; ++d) var += 2.0 * (N - d) * c[static_cast<std::size_t>(d)];
  return var / N;
}

double sigma2_infinity(const MeasureSpec& measure) {
  if (measure.chain.product) return covariances(measure.chain, 0)[0];
  const auto c = covariances(measure.chain, 400);
  double s = c[0];
  for (std::size_t d = 1; d < c.size(); ++d) s += 2.0 * c[d];
  return s;
}

}  // namespace kpzlab
