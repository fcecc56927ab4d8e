#include "kpzlab/exactlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "kpzlab/rng.hpp"

namespace kpzlab {

Geometry Geometry::ring(int L, int k) {
  if (L < 2 || k < 0) throw std::invalid_argument("ring geometry needs L >= 2 and k >= 0");
  Geometry g;
  g.kind = Kind::Ring;
  g.sites = L;
  g.particles = k;
  return g;
}

Geometry Geometry::segment(int ell, int k, std::vector<int> left, std::vector<int> right) {
  if (ell < 1 || k < 0) throw std::invalid_argument("segment geometry needs ell >= 1 and k >= 0");
  Geometry g;
  g.kind = Kind::Segment;
  g.ell = ell;
  g.sites = 2 * ell + 1;
  g.particles = k;
  g.left = std::move(left);
  g.right = std::move(right);
  return g;
}

std::string Geometry::describe() const {
  std::ostringstream os;
  if (kind == Kind::Ring) {
    os << "ring(L=" << sites << ", k=" << particles << ")";
  } else {
    os << "segment(ell=" << ell << ", k=" << particles << ", xi=";
    for (int v : left) os << v;
    os << "|";
    for (int v : right) os << v;
    os << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------------

namespace {

std::uint64_t binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

void compositions(int sites, int k, std::vector<int>& cur, int pos, std::vector<std::vector<int>>& out) {
  if (pos == sites - 1) {
    cur[static_cast<std::size_t>(pos)] = k;
    out.push_back(cur);
    return;
  }
  for (int v = k; v >= 0; --v) {
    cur[static_cast<std::size_t>(pos)] = v;
    compositions(sites, k - v, cur, pos + 1, out);
  }
}

}  // namespace

FiniteStateSpace::FiniteStateSpace(const Geometry& g, bool exclusion) : exclusion_(exclusion), sites_(g.sites) {
  const int N = g.sites, k = g.particles;
  if (exclusion) {
    if (k > N) throw std::invalid_argument("more particles than sites for an exclusion state space");
    if (N > 62) throw std::invalid_argument("exclusion state space limited to 62 sites");
    const std::uint64_t count = binom(N, k);
    if (count > 5000000) throw std::length_error("state space too large: " + std::to_string(count));
    // k-subsets in colex order; rank(c) = sum_i C(c_i, i+1)
    std::vector<int> c(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = i;
    for (std::uint64_t r = 0; r < count; ++r) {
      std::vector<int> occ(static_cast<std::size_t>(N), 0);
      for (int p : c) occ[static_cast<std::size_t>(p)] = 1;
      states_.push_back(std::move(occ));
      int i = 0;
      while (i < k && c[static_cast<std::size_t>(i)] + 1 == (i + 1 < k ? c[static_cast<std::size_t>(i + 1)] : N)) ++i;
      if (i == k) break;
      ++c[static_cast<std::size_t>(i)];
      for (int j = 0; j < i; ++j) c[static_cast<std::size_t>(j)] = j;
    }
  } else {
    if (binom(N + k - 1, k) > 5000000) throw std::length_error("zero-range state space too large");
    std::vector<int> cur(static_cast<std::size_t>(N), 0);
    compositions(N, k, cur, 0, states_);
    for (std::size_t i = 0; i < states_.size(); ++i) lookup_.emplace(states_[i], i);
  }
}

std::size_t FiniteStateSpace::index(const std::vector<int>& occ) const {
  if (static_cast<int>(occ.size()) != sites_) throw std::invalid_argument("state has the wrong number of sites");
  if (exclusion_) {
    std::uint64_t r = 0;
    int i = 0;
    for (int p = 0; p < sites_; ++p) {
      if (occ[static_cast<std::size_t>(p)] == 1) r += binom(p, ++i);
      else if (occ[static_cast<std::size_t>(p)] != 0) throw std::out_of_range("not an exclusion state");
    }
    if (r >= states_.size() || states_[r] != occ) throw std::out_of_range("state outside the hyperplane");
    return static_cast<std::size_t>(r);
  }
  const auto it = lookup_.find(occ);
  if (it == lookup_.end()) throw std::out_of_range("state outside the hyperplane");
  return it->second;
}

// ---------------------------------------------------------------------------------------------

namespace {

double log_weight(const MeasureSpec& m, const Geometry& g, const std::vector<int>& occ) {
  switch (m.kind) {
    case MeasureKind::Bernoulli:
      return 0.0;
    case MeasureKind::ProductZrp: {
      double s = 0.0;
      for (int v : occ)
        for (int j = 1; j <= v; ++j) s -= std::log(m.g(j));
      return s;
    }
    case MeasureKind::MarkovGibbs: {
      const auto lp = [&](int i, int j) { return std::log(m.chain.p(i, j)); };
      double s = 0.0;
      const int N = static_cast<int>(occ.size());
      for (int x = 0; x + 1 < N; ++x) s += lp(occ[static_cast<std::size_t>(x)], occ[static_cast<std::size_t>(x + 1)]);
      if (g.kind == Geometry::Kind::Ring) {
        s += lp(occ.back(), occ.front());
      } else {
        s += lp(g.left.empty() ? 0 : g.left.back(), occ.front());
        s += lp(occ.back(), g.right.empty() ? 0 : g.right.front());
      }
      return s;
    }
  }
  return 0.0;
}

struct Builder {
  const ModelSpec& spec;
  const Geometry& geo;
  int n;

  template <class Emit>
  void bonds(const std::vector<int>& occ, double wr, double wl, Emit&& emit) const {
    const int N = geo.sites;
    const bool ring = geo.kind == Geometry::Kind::Ring;
    const int nb = ring ? N : N - 1;
    for (int x = 0; x < nb; ++x) {
      const auto eta = [&](int j) {
        int p = x + j;
        if (ring) return occ[static_cast<std::size_t>(((p % N) + N) % N)];
        if (p < 0) {
          const int i = static_cast<int>(geo.left.size()) + p;
          return i >= 0 ? geo.left[static_cast<std::size_t>(i)] : 0;
        }
        if (p >= N) {
          const int i = p - N;
          return i < static_cast<int>(geo.right.size()) ? geo.right[static_cast<std::size_t>(i)] : 0;
        }
        return occ[static_cast<std::size_t>(p)];
      };
      const BondRates r = local_rates(spec, n, eta);
      const int x1 = (x + 1) % N;
      if (r.right > 0.0) emit(x, x1, wr * r.right);
      if (r.left > 0.0) emit(x1, x, wl * r.left);
    }
  }
};

FiniteGenerator build(const ModelSpec& spec, int n, double wr, double wl, const MeasureSpec& measure,
                      const Geometry& geo) {
  spec.validate();
  if (spec.exclusion() != (measure.kind != MeasureKind::ProductZrp))
    throw std::invalid_argument("measure does not match the model family");
  FiniteGenerator gen{geo, FiniteStateSpace(geo, spec.exclusion()), {}, {}, {}};
  const std::size_t S = gen.space.size();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(S, 0.0);
  Builder b{spec, geo, n};
  for (std::size_t i = 0; i < S; ++i) {
    const auto& occ = gen.space.state(i);
    b.bonds(occ, wr, wl, [&](int from, int to, double rate) {
      auto next = occ;
      --next[static_cast<std::size_t>(from)];
      ++next[static_cast<std::size_t>(to)];
      const std::size_t j = gen.space.index(next);
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), rate);
      diag[i] -= rate;
    });
  }
  for (std::size_t i = 0; i < S; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);
  gen.Q.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  gen.Q.setFromTriplets(trip.begin(), trip.end());
  gen.Q.makeCompressed();
  gen.log_weight.resize(S);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < S; ++i) mx = std::max(mx, gen.log_weight[i] = log_weight(measure, geo, gen.space.state(i)));
  gen.nu.resize(S);
  double z = 0.0;
  for (std::size_t i = 0; i < S; ++i) z += gen.nu[i] = std::exp(gen.log_weight[i] - mx);
  for (double& v : gen.nu) v /= z;
  return gen;
}

}  // namespace

FiniteGenerator ring_generator(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& measure,
                               const Geometry& geometry) {
  if (geometry.kind != Geometry::Kind::Ring) throw std::invalid_argument("ring_generator needs a ring geometry");
  const double n2 = static_cast<double>(asym.n) * asym.n;
  return build(spec, asym.n, n2 * asym.p(), n2 * asym.q(), measure, geometry);
}

FiniteGenerator segment_generator(const ModelSpec& spec, int n, const MeasureSpec& measure, const Geometry& geometry) {
  if (geometry.kind != Geometry::Kind::Segment) throw std::invalid_argument("segment_generator needs a segment");
  return build(spec, n, 0.5, 0.5, measure, geometry);
}

double stationarity_residual(const FiniteGenerator& gen) {
  if (gen.geometry.kind != Geometry::Kind::Ring)
    throw std::invalid_argument("stationarity is exact only on rings; use the detailed-balance residual on segments");
  Eigen::VectorXd nu = Eigen::Map<const Eigen::VectorXd>(gen.nu.data(), static_cast<Eigen::Index>(gen.nu.size()));
  const Eigen::VectorXd r = gen.Q.transpose() * nu;
  return r.cwiseAbs().maxCoeff();
}

double detailed_balance_residual(const FiniteGenerator& gen) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < gen.Q.outerSize(); ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen.Q, i); it; ++it) {
      const auto j = it.col();
      if (j == i) continue;
      const double back = gen.Q.coeff(j, i);
      worst = std::max(worst, std::abs(gen.nu[static_cast<std::size_t>(i)] * it.value() -
                                       gen.nu[static_cast<std::size_t>(j)] * back));
    }
  return worst;
}

double row_sum_residual(const FiniteGenerator& gen) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(gen.Q.cols());
  const Eigen::VectorXd r = gen.Q * ones;
  return r.cwiseAbs().maxCoeff();
}

double adjoint_residual(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& measure,
                        const Geometry& geometry) {
  const auto fwd = ring_generator(spec, asym, measure, geometry);
  Asymmetry rev = asym;
  rev.a = -asym.a;
  const auto bwd = ring_generator(spec, rev, measure, geometry);
  const Eigen::MatrixXd A = Eigen::MatrixXd(fwd.Q), B = Eigen::MatrixXd(bwd.Q);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      const double ratio = std::exp(fwd.log_weight[static_cast<std::size_t>(j)] - fwd.log_weight[static_cast<std::size_t>(i)]);
      const double adj = i == j ? A(i, i) : ratio * A(j, i);
      worst = std::max(worst, std::abs(adj - B(i, j)));
    }
  return worst;
}

// ---------------------------------------------------------------------------------------------

namespace {

// A = -D^{1/2} Q D^{-1/2}, symmetric for reversible generators.
Eigen::SparseMatrix<double> symmetrized(const FiniteGenerator& gen) {
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < gen.Q.outerSize(); ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen.Q, i); it; ++it) {
      const auto j = it.col();
      const double s = std::sqrt(gen.nu[static_cast<std::size_t>(i)] / gen.nu[static_cast<std::size_t>(j)]);
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), -0.5 * s * it.value());
      trip.emplace_back(static_cast<int>(j), static_cast<int>(i), -0.5 * s * it.value());
    }
  Eigen::SparseMatrix<double> A(gen.Q.rows(), gen.Q.cols());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::VectorXd ground(const FiniteGenerator& gen) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(gen.nu.size()));
  for (std::size_t i = 0; i < gen.nu.size(); ++i) v(static_cast<Eigen::Index>(i)) = std::sqrt(gen.nu[i]);
  return v.normalized();
}

double dense_gap(const Eigen::SparseMatrix<double>& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(1);
}

double lanczos_gap(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& v0) {
  const Eigen::Index N = A.rows();
  const int m = static_cast<int>(std::min<Eigen::Index>(N - 1, 250));
  auto rng = replica_stream(0x5eed, 0);
  Eigen::VectorXd start(N);
  for (Eigen::Index i = 0; i < N; ++i) start(i) = rng.uniform() - 0.5;
  double norm_A = 0.0;
  for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) s += std::abs(it.value());
    norm_A = std::max(norm_A, s);
  }
  double best = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 40; ++restart) {
    std::vector<Eigen::VectorXd> basis;
    std::vector<double> alpha, beta;
    Eigen::VectorXd q = start - v0 * v0.dot(start);
    q.normalize();
    basis.push_back(q);
    double resid = 0.0;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd w = A * basis[static_cast<std::size_t>(j)];
      w -= v0 * v0.dot(w);
      alpha.push_back(basis[static_cast<std::size_t>(j)].dot(w));
      for (int pass = 0; pass < 2; ++pass) {
        w -= v0 * v0.dot(w);
        for (const auto& b : basis) w -= b * b.dot(w);
      }
      const double bnorm = w.norm();
      if (bnorm < 1e-13 * norm_A || j + 1 == m) break;
      beta.push_back(bnorm);
      basis.push_back(w / bnorm);
    }
    const int k = static_cast<int>(alpha.size());
    Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), k);
    Eigen::VectorXd e(std::max(k - 1, 0));
    for (int i = 0; i + 1 < k; ++i) e(i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    const double theta = es.eigenvalues()(0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
    for (int i = 0; i < k; ++i) x += es.eigenvectors()(i, 0) * basis[static_cast<std::size_t>(i)];
    x -= v0 * v0.dot(x);
    x.normalize();
    Eigen::VectorXd r = A * x - theta * x;
    r -= v0 * v0.dot(r);
    resid = r.norm();
    best = theta;
    if (resid < 1e-10 * std::max(1.0, norm_A)) return theta;
    start = x;
  }
  return best;
}

double power_gap(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& v0) {
  const Eigen::Index N = A.rows();
  double sigma = 0.0;
  for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) s += std::abs(it.value());
    sigma = std::max(sigma, s);
  }
  auto rng = replica_stream(0xbead, 0);
  Eigen::VectorXd v(N);
  for (Eigen::Index i = 0; i < N; ++i) v(i) = rng.uniform() - 0.5;
  v -= v0 * v0.dot(v);
  v.normalize();
  double lam = 0.0, prev = -1.0;
  for (long it = 0; it < 20000000; ++it) {
    Eigen::VectorXd w = sigma * v - A * v;
    w -= v0 * v0.dot(w);
    lam = v.dot(w);
    v = w.normalized();
    if (it % 64 == 0) {
      if (std::abs(lam - prev) < 1e-15 * sigma) break;
      prev = lam;
    }
  }
  const Eigen::VectorXd Av = A * v;
  return v.dot(Av);
}

}  // namespace

GapResult spectral_gap(const FiniteGenerator& gen, GapMethod method) {
  GapResult r;
  r.states = gen.space.size();
  if (r.states <= 1) {
    r.method = "trivial";
    return r;
  }
  const auto A = symmetrized(gen);
  if (method == GapMethod::Auto) method = r.states <= kDenseLimit ? GapMethod::Dense : GapMethod::Lanczos;
  switch (method) {
    case GapMethod::Dense: r.gap = dense_gap(A); r.method = "dense"; break;
    case GapMethod::Lanczos: r.gap = lanczos_gap(A, ground(gen)); r.method = "lanczos"; break;
    case GapMethod::Power: r.gap = power_gap(A, ground(gen)); r.method = "power"; break;
    case GapMethod::Auto: break;
  }
  r.W = r.gap > 0.0 ? 1.0 / r.gap : std::numeric_limits<double>::infinity();
  return r;
}

double h1_norm_sq(const FiniteGenerator& gen, std::span<const double> f, int n) {
  Eigen::Map<const Eigen::VectorXd> v(f.data(), static_cast<Eigen::Index>(f.size()));
  const Eigen::VectorXd Qf = gen.Q * v;
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s -= gen.nu[i] * f[i] * Qf(static_cast<Eigen::Index>(i));
  return static_cast<double>(n) * n * s;
}

std::vector<double> h_minus1_solve(const FiniteGenerator& gen, std::span<const double> r, int n) {
  const std::size_t S = gen.nu.size();
  if (r.size() != S) throw std::invalid_argument("h_minus1: vector size does not match the state space");
  double mean = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < S; ++i) {
    mean += gen.nu[i] * r[i];
    mass += gen.nu[i] * std::abs(r[i]);
  }
  if (std::abs(mean) > 1e-10 * std::max(mass, 1e-300) || mass == 0.0)
    throw std::invalid_argument("h_minus1: r must be nonzero with zero nu-mean on the sector");
  const auto A = symmetrized(gen);
  Eigen::VectorXd u(static_cast<Eigen::Index>(S));
  for (std::size_t i = 0; i < S; ++i) u(static_cast<Eigen::Index>(i)) = std::sqrt(gen.nu[i]) * r[i];
  const Eigen::VectorXd v0 = ground(gen);
  Eigen::VectorXd x;
  if (S <= kDenseLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(A)};
    const double tol = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    const Eigen::VectorXd c = es.eigenvectors().transpose() * u;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S));
    for (Eigen::Index k = 0; k < c.size(); ++k)
      if (es.eigenvalues()(k) > tol) y(k) = c(k) / es.eigenvalues()(k);
    x = es.eigenvectors() * y;
  } else {
    // conjugate gradients on the orthogonal complement of the ground state
    x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S));
    Eigen::VectorXd res = u - v0 * v0.dot(u), p = res;
    double rr = res.squaredNorm();
    const double stop = 1e-26 * rr;
    for (int it = 0; it < 20 * static_cast<int>(S) && rr > stop; ++it) {
      Eigen::VectorXd Ap = A * p;
      Ap -= v0 * v0.dot(Ap);
      const double step = rr / p.dot(Ap);
      x += step * p;
      res -= step * Ap;
      const double rr2 = res.squaredNorm();
      p = res + (rr2 / rr) * p;
      rr = rr2;
    }
    x -= v0 * v0.dot(x);
  }
  std::vector<double> f(S);
  const double n2 = static_cast<double>(n) * n;
  for (std::size_t i = 0; i < S; ++i) f[i] = x(static_cast<Eigen::Index>(i)) / std::sqrt(gen.nu[i]) / n2;
  return f;
}

double h_minus1_norm_sq(const FiniteGenerator& gen, std::span<const double> r, int n) {
  const auto f = h_minus1_solve(gen, r, n);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += gen.nu[i] * r[i] * f[i];
  return s;
}

// ---------------------------------------------------------------------------------------------

namespace {

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != 0.0)
      for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

// Patterns over the support window: every word in {0..S-1}^w.
template <class Fn>
void for_patterns(int S, int w, Fn&& fn) {
  std::vector<int> pat(static_cast<std::size_t>(w), 0);
  for (;;) {
    fn(pat);
    int i = w - 1;
    while (i >= 0 && ++pat[static_cast<std::size_t>(i)] == S) pat[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) return;
  }
}

struct CondTable {
  // weight and f-weighted weight for each conditioning value
  std::vector<double> prob, num;
  std::vector<double> y;  // block density minus rho
};

CondTable product_table(const MeasureSpec& m, const LocalFunction& f, int n) {
  const auto& pi = m.chain.pi;
  const int S = m.chain.states, w = f.support.width();
  std::vector<double> rest = {1.0};
  for (int i = 0; i < n - w; ++i) rest = convolve(rest, pi);
  const std::size_t K = static_cast<std::size_t>((S - 1) * n + 1);
  CondTable t{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
  for_patterns(S, w, [&](const std::vector<int>& pat) {
    double p = 1.0;
    int cnt = 0;
    for (int v : pat) {
      p *= pi[static_cast<std::size_t>(v)];
      cnt += v;
    }
    if (p == 0.0) return;
    const double fv = f.on_pattern(pat);
    for (std::size_t c = 0; c < rest.size(); ++c) {
      t.prob[c + static_cast<std::size_t>(cnt)] += p * rest[c];
      t.num[c + static_cast<std::size_t>(cnt)] += p * rest[c] * fv;
    }
  });
  for (std::size_t k = 0; k < K; ++k) t.y[k] = static_cast<double>(k) / n - m.rho;
  return t;
}

// Markov chain: condition on (left outside state, block count, right outside state).
CondTable markov_table(const MeasureSpec& m, const LocalFunction& f, int n) {
  const auto& ch = m.chain;
  const int S = ch.states, w = f.support.width();
  const int o = (n - w) / 2;
  const int K = (S - 1) * n + 1;
  using Grid = std::vector<std::vector<double>>;  // [state][count]
  CondTable t;
  t.prob.assign(static_cast<std::size_t>(S * S * K), 0.0);
  t.num.assign(t.prob.size(), 0.0);
  t.y.assign(t.prob.size(), 0.0);
  // suffix[s][b][c]: paths over sites o+w..n-1 from previous state s, ending into outside state b
  std::vector<Grid> suffix(static_cast<std::size_t>(S), Grid(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(K), 0.0)));
  for (int s = 0; s < S; ++s) {
    Grid cur(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(K), 0.0));
    // cur[state at last visited site][count]
    std::vector<std::vector<double>> init(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(K), 0.0));
    init[static_cast<std::size_t>(s)][0] = 1.0;
    cur = init;
    for (int site = o + w; site < n; ++site) {
      Grid nxt(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(K), 0.0));
      for (int a = 0; a < S; ++a)
        for (int c = 0; c < K; ++c) {
          const double v = cur[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)];
          if (v == 0.0) continue;
          for (int e = 0; e < S && c + e < K; ++e)
            nxt[static_cast<std::size_t>(e)][static_cast<std::size_t>(c + e)] += v * ch.p(a, e);
        }
      cur.swap(nxt);
    }
    for (int a = 0; a < S; ++a)
      for (int b = 0; b < S; ++b)
        for (int c = 0; c < K; ++c)
          suffix[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)][static_cast<std::size_t>(c)] +=
              cur[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] * ch.p(a, b);
  }
  for (int left = 0; left < S; ++left) {
    // prefix over sites 0..o-1 starting from the outside state
    Grid cur(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(K), 0.0));
    cur[static_cast<std::size_t>(left)][0] = ch.pi[static_cast<std::size_t>(left)];
    for (int site = 0; site < o; ++site) {
      Grid nxt(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(K), 0.0));
      for (int a = 0; a < S; ++a)
        for (int c = 0; c < K; ++c) {
          const double v = cur[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)];
          if (v == 0.0) continue;
          for (int e = 0; e < S && c + e < K; ++e)
            nxt[static_cast<std::size_t>(e)][static_cast<std::size_t>(c + e)] += v * ch.p(a, e);
        }
      cur.swap(nxt);
    }
    for_patterns(S, w, [&](const std::vector<int>& pat) {
      double inner = 1.0;
      int cnt = 0;
      for (int i = 0; i < w; ++i) {
        cnt += pat[static_cast<std::size_t>(i)];
        if (i > 0) inner *= ch.p(pat[static_cast<std::size_t>(i - 1)], pat[static_cast<std::size_t>(i)]);
      }
      const double fv = f.on_pattern(pat);
      const auto& suf = suffix[static_cast<std::size_t>(pat.back())];
      for (int s = 0; s < S; ++s) {
        const double link = ch.p(s, pat.front()) * inner;
        if (link == 0.0) continue;
        for (int c1 = 0; c1 < K; ++c1) {
          const double pre = cur[static_cast<std::size_t>(s)][static_cast<std::size_t>(c1)];
          if (pre == 0.0) continue;
          for (int b = 0; b < S; ++b)
            for (int c2 = 0; c1 + cnt + c2 < K; ++c2) {
              const double v = pre * link * suf[static_cast<std::size_t>(b)][static_cast<std::size_t>(c2)];
              if (v == 0.0) continue;
              const std::size_t idx = static_cast<std::size_t>((left * S + b) * K + c1 + cnt + c2);
              t.prob[idx] += v;
              t.num[idx] += v * fv;
            }
        }
      }
    });
  }
  for (std::size_t i = 0; i < t.y.size(); ++i) t.y[i] = static_cast<double>(i % static_cast<std::size_t>(K)) / n - m.rho;
  return t;
}

}  // namespace

std::vector<EeRow> ee_error_curve(const MeasureSpec& measure, const LocalFunction& f, std::span<const int> ns,
                                  bool first_order) {
  const auto tm = phi_derivatives(f, measure);
  if (std::abs(tm.phi) > 1e-8) throw std::invalid_argument("ee_error_curve: centering violated (phi_f != 0)");
  if (!first_order && std::abs(tm.phi1) > 1e-8)
    throw std::invalid_argument("ee_error_curve: centering violated (phi'_f != 0)");
  std::vector<EeRow> rows;
  for (int n : ns) {
    if (n < f.support.width()) throw std::invalid_argument("ee_error_curve: block narrower than the support");
    const CondTable t = measure.product() ? product_table(measure, f, n) : markov_table(measure, f, n);
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < t.prob.size(); ++i) {
      total += t.prob[i];
      m1 += t.prob[i] * t.y[i];
      m2 += t.prob[i] * t.y[i] * t.y[i];
    }
    const double var_avg = m2 / total - (m1 / total) * (m1 / total);  // Var(block average) = sigma2_n / n
    double l4 = 0.0;
    for (std::size_t i = 0; i < t.prob.size(); ++i) {
      if (t.prob[i] <= 0.0) continue;
      const double cond = t.num[i] / t.prob[i];
      const double approx = first_order ? tm.phi1 * t.y[i] : 0.5 * tm.phi2 * (t.y[i] * t.y[i] - var_avg);
      const double e = cond - approx;
      l4 += t.prob[i] / total * e * e * e * e;
    }
    EeRow row;
    row.n = n;
    row.error = std::pow(l4, 0.25);
    row.scaled = row.error * (first_order ? n : std::pow(static_cast<double>(n), 1.5));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace kpzlab
