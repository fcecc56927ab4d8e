#include "kpzlab/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kpzlab/stats.hpp"

namespace kpzlab {

Centering centering(const ModelSpec& spec, int n, const MeasureSpec& measure) {
  const auto b = phi_derivatives(rate_sum_fn(spec, n), measure);
  const auto c = phi_derivatives(c_fn(spec, n), measure);
  Centering r;
  r.rho = measure.rho;
  r.phi_b = b.phi;
  r.phi1_b = b.phi1;
  r.phi2_b = b.phi2;
  r.phi_c = c.phi;
  r.phi1_c = c.phi1;
  return r;
}

namespace {

long long ring_index(long long x, int L) {
  long long r = x % L;
  return r < 0 ? r + L : r;
}

}  // namespace

std::vector<double> lattice_gradient(const TestFunction& H, int n, int L) {
  std::vector<double> w(static_cast<std::size_t>(L), 0.0);
  const double R = n * H.support_radius() + 1.0;
  if (2.0 * R + 1.0 >= L) throw std::invalid_argument("lattice_gradient: support wraps the ring");
  const double c = n * H.center();
  for (long long x = static_cast<long long>(std::ceil(c - R)); x <= static_cast<long long>(std::floor(c + R)); ++x)
    w[static_cast<std::size_t>(ring_index(x, L))] =
        n * (H(static_cast<double>(x + 1) / n) - H(static_cast<double>(x) / n));
  return w;
}

std::vector<double> lattice_samples(const TestFunction& H, int n, int L, double scale) {
  std::vector<double> w(static_cast<std::size_t>(L), 0.0);
  const double R = n * H.support_radius();
  if (2.0 * R + 1.0 >= L) throw std::invalid_argument("lattice_samples: support wraps the ring");
  const double c = n * H.center();
  for (long long x = static_cast<long long>(std::ceil(c - R)); x <= static_cast<long long>(std::floor(c + R)); ++x)
    w[static_cast<std::size_t>(ring_index(x, L))] = scale * H(static_cast<double>(x) / n);
  return w;
}

// ---------------------------------------------------------------------------------------------

DecompositionObserver::DecompositionObserver(std::string prefix, TestFunction H, const Centering& cen,
                                             const Asymmetry& asym)
    : prefix_(std::move(prefix)),
      H_(std::move(H)),
      cen_(cen),
      asym_(asym),
      frame_(asym, cen.phi1_b, Frame::Mode::Floor),
      A_(asym.a / (2.0 * std::pow(static_cast<double>(asym.n), asym.gamma - 0.5))) {}

void DecompositionObserver::set_shift(long long k, const KmcEngine& engine) {
  const int L = engine.size();
  const int n = asym_.n;
  shift_ = k;
  h_.assign(static_cast<std::size_t>(L), 0.0);
  const double c = static_cast<double>(k) + n * H_.center();
  const double R = n * H_.support_radius() + 2.0;
  if (2.0 * R + 1.0 >= L) throw std::invalid_argument("DecompositionObserver: test function support wraps the ring");
  for (long long x = static_cast<long long>(std::ceil(c - R)); x <= static_cast<long long>(std::floor(c + R)); ++x)
    h_[static_cast<std::size_t>(ring_index(x, L))] = H_(static_cast<double>(x - k) / n);
  grad_.assign(static_cast<std::size_t>(L), 0.0);
  lap_.assign(static_cast<std::size_t>(L), 0.0);
  g2_.assign(static_cast<std::size_t>(L), 0.0);
  dg2_.assign(static_cast<std::size_t>(L), 0.0);
  const double n2 = static_cast<double>(n) * n;
  for (int x = 0; x < L; ++x) {
    const double hp = h_[static_cast<std::size_t>(x + 1 == L ? 0 : x + 1)];
    const double hm = h_[static_cast<std::size_t>(x == 0 ? L - 1 : x - 1)];
    const double h0 = h_[static_cast<std::size_t>(x)];
    grad_[static_cast<std::size_t>(x)] = n * (hp - h0);
    lap_[static_cast<std::size_t>(x)] = n2 * (hp + hm - 2.0 * h0);
    g2_[static_cast<std::size_t>(x)] = grad_[static_cast<std::size_t>(x)] * grad_[static_cast<std::size_t>(x)];
  }
  for (int x = 0; x < L; ++x)
    dg2_[static_cast<std::size_t>(x)] = g2_[static_cast<std::size_t>(x)] - g2_[static_cast<std::size_t>(x == 0 ? L - 1 : x - 1)];
  sum_lap_ = sum_grad_ = 0.0;
  for (int x = 0; x < L; ++x) {
    sum_lap_ += lap_[static_cast<std::size_t>(x)];
    sum_grad_ += grad_[static_cast<std::size_t>(x)];
  }
  recompute_sums(engine);
}

void DecompositionObserver::recompute_sums(const KmcEngine& engine) {
  const auto& occ = engine.occupancy();
  const int L = engine.size();
  S_c_ = S_b_ = S_eta_ = S_F_ = Q_b_ = Q_c_ = 0.0;
  for (int x = 0; x < L; ++x) {
    const auto i = static_cast<std::size_t>(x);
    S_c_ += c_[i] * lap_[i];
    S_b_ += b_[i] * grad_[i];
    S_eta_ += occ[i] * grad_[i];
    S_F_ += h_[i] * (occ[i] - cen_.rho);
    Q_b_ += b_[i] * g2_[i];
    Q_c_ += c_[i] * dg2_[i];
  }
  since_refresh_ = 0;
}

void DecompositionObserver::start(const KmcEngine& engine) {
  const int L = engine.size();
  const auto& occ = engine.occupancy();
  const auto& ker = engine.kernel();
  b_.resize(static_cast<std::size_t>(L));
  c_.resize(static_cast<std::size_t>(L));
  for (int x = 0; x < L; ++x) {
    b_[static_cast<std::size_t>(x)] = ker.b(occ, x);
    c_[static_cast<std::size_t>(x)] = ker.c(occ, x);
  }
  t_last_ = engine.time();
  const double v = frame_.velocity();
  set_shift(v == 0.0 ? 0 : static_cast<long long>(std::floor(v * t_last_)), engine);
  Y0_ = S_F_ / std::sqrt(static_cast<double>(asym_.n));
  I_ = B_ = Kd_ = steps_ = LF_ = jumps_ = QV_ = QV_path_ = 0.0;
}

double DecompositionObserver::lf() const {
  return 0.5 / std::sqrt(static_cast<double>(asym_.n)) * S_c_ + A_ * S_b_;
}
double DecompositionObserver::i_int() const {
  return 0.5 / std::sqrt(static_cast<double>(asym_.n)) * (S_c_ - cen_.phi_c * sum_lap_);
}
double DecompositionObserver::b_int() const {
  return A_ * (S_b_ - cen_.phi_b * sum_grad_ - cen_.phi1_b * (S_eta_ - cen_.rho * sum_grad_));
}

double DecompositionObserver::qv_integrand() const {
  const double n = asym_.n;
  return Q_b_ / (2.0 * n) + asym_.a / (2.0 * std::pow(n, 1.0 + asym_.gamma)) * Q_c_;
}

double DecompositionObserver::qv_direct(const KmcEngine& engine) const {
  const auto& occ = engine.occupancy();
  const auto& ker = engine.kernel();
  const int L = engine.size();
  const double sn = std::sqrt(static_cast<double>(asym_.n));
  double s = 0.0;
  for (int x = 0; x < L; ++x) {
    const double dF = (h_[static_cast<std::size_t>(x + 1 == L ? 0 : x + 1)] - h_[static_cast<std::size_t>(x)]) / sn;
    if (dF == 0.0) continue;
    const BondRates r = ker.rates(occ, x);
    s += (ker.right_weight() * r.right + ker.left_weight() * r.left) * dF * dF;
  }
  return s;
}

void DecompositionObserver::integrate_to(double t, const KmcEngine& engine) {
  const auto accumulate = [&](double dt) {
    if (dt <= 0.0) return;
    const double l = lf(), i = i_int(), b = b_int();
    I_ += i * dt;
    B_ += b * dt;
    Kd_ += (l - i - b) * dt;
    LF_ += l * dt;
    QV_ += qv_integrand() * dt;
  };
  for (;;) {
    const auto [tb, next] = frame_.next_floor_break(shift_);
    if (!(tb <= t)) break;
    accumulate(tb - t_last_);
    t_last_ = std::max(t_last_, tb);
    const double before = S_F_;
    set_shift(next, engine);
    steps_ += (S_F_ - before) / std::sqrt(static_cast<double>(asym_.n));
  }
  accumulate(t - t_last_);
  t_last_ = t;
}

void DecompositionObserver::on_jump(const Jump& jump, const KmcEngine& engine) {
  integrate_to(jump.time, engine);
  const auto from = static_cast<std::size_t>(jump.from), to = static_cast<std::size_t>(jump.to);
  const double dF = (h_[to] - h_[from]) / std::sqrt(static_cast<double>(asym_.n));
  jumps_ += dF;
  QV_path_ += dF * dF;
  S_F_ += h_[to] - h_[from];
  S_eta_ += grad_[to] - grad_[from];

  const auto& occ = engine.occupancy();
  const auto& ker = engine.kernel();
  const auto& cfg = engine.config();
  const Window bw = ker.bond_window(), cw = ker.c_window();
  for (int y = jump.bond - bw.hi; y <= jump.bond + 1 - bw.lo; ++y) {
    const auto x = static_cast<std::size_t>(cfg.wrap(y));
    const double nb = ker.b(occ, static_cast<int>(x));
    const double d = nb - b_[x];
    S_b_ += d * grad_[x];
    Q_b_ += d * g2_[x];
    b_[x] = nb;
  }
  for (int y = jump.bond - cw.hi; y <= jump.bond + 1 - cw.lo; ++y) {
    const auto x = static_cast<std::size_t>(cfg.wrap(y));
    const double nc = ker.c(occ, static_cast<int>(x));
    const double d = nc - c_[x];
    S_c_ += d * lap_[x];
    Q_c_ += d * dg2_[x];
    c_[x] = nc;
  }
  if (++since_refresh_ >= (1u << 20)) recompute_sums(engine);
}

void DecompositionObserver::advance(double t, const KmcEngine& engine) { integrate_to(t, engine); }

DecompositionObserver::Terms DecompositionObserver::terms() const {
  Terms r;
  r.Y = S_F_ / std::sqrt(static_cast<double>(asym_.n));
  r.Y0 = Y0_;
  r.I = I_;
  r.B = B_;
  r.K = steps_ + Kd_;
  r.M = r.Y - r.Y0 - r.I - r.B - r.K;
  r.M_direct = jumps_ - LF_;
  r.QV = QV_;
  r.QV_path = QV_path_;
  return r;
}

void DecompositionObserver::record(double t, const KmcEngine&, std::vector<ProbeRecord>& out) {
  const Terms r = terms();
  const std::pair<const char*, double> items[] = {{"Y", r.Y},         {"Y0", r.Y0}, {"I", r.I},
                                                   {"B", r.B},         {"K", r.K},   {"M", r.M},
                                                   {"M_direct", r.M_direct}, {"QV", r.QV}, {"QV_path", r.QV_path}};
  for (const auto& [name, value] : items) out.push_back({0, t, prefix_ + "/" + name, value});
}

// ---------------------------------------------------------------------------------------------

BgObserver::BgObserver(std::string prefix, LocalFunction f, std::vector<double> h, double rho, double phi1,
                       double phi2, std::vector<int> ells, std::vector<double> sigma2_ell)
    : prefix_(std::move(prefix)),
      f_(std::move(f)),
      h_(std::move(h)),
      rho_(rho),
      phi1_(phi1),
      phi2_(phi2),
      ells_(std::move(ells)),
      sigma2_(std::move(sigma2_ell)) {
  if (ells_.size() != sigma2_.size()) throw std::invalid_argument("BgObserver: ell/sigma2 size mismatch");
  for (double v : h_) sum_h_ += v;
}

void BgObserver::start(const KmcEngine& engine) {
  L_ = engine.size();
  if (static_cast<int>(h_.size()) != L_) throw std::invalid_argument("BgObserver: weights must cover the ring");
  const auto& cfg = engine.config();
  fval_.assign(static_cast<std::size_t>(L_), 0.0);
  F_ = 0.0;
  for (int x = 0; x < L_; ++x) {
    if (h_[static_cast<std::size_t>(x)] == 0.0) continue;
    fval_[static_cast<std::size_t>(x)] = f_(cfg, x);
    F_ += h_[static_cast<std::size_t>(x)] * fval_[static_cast<std::size_t>(x)];
  }
  block_.assign(ells_.size(), {});
  Q1_.assign(ells_.size(), 0.0);
  Q2_.assign(ells_.size(), 0.0);
  for (std::size_t k = 0; k < ells_.size(); ++k) {
    const int ell = ells_[k];
    if (2 * ell + 1 > L_) throw std::invalid_argument("BgObserver: block wider than the ring");
    auto& blk = block_[k];
    blk.assign(static_cast<std::size_t>(L_), 0);
    int s = 0;
    for (int y = -ell; y <= ell; ++y) s += cfg[y];
    for (int x = 0; x < L_; ++x) {
      blk[static_cast<std::size_t>(x)] = s;
      s += cfg[x + ell + 1] - cfg[x - ell];
    }
    const double m = 2.0 * ell + 1.0;
    for (int x = 0; x < L_; ++x) {
      const double hx = h_[static_cast<std::size_t>(x)];
      if (hx == 0.0) continue;
      const double d = blk[static_cast<std::size_t>(x)] / m - rho_;
      Q1_[k] += hx * d;
      Q2_[k] += hx * d * d;
    }
  }
  raw_ = 0.0;
  first_.assign(ells_.size(), 0.0);
  second_.assign(ells_.size(), 0.0);
  t_last_ = engine.time();
}

void BgObserver::integrate_to(double t) {
  const double dt = t - t_last_;
  if (dt <= 0.0) return;
  raw_ += F_ * dt;
  for (std::size_t k = 0; k < ells_.size(); ++k) {
    const double m = 2.0 * ells_[k] + 1.0;
    second_[k] += (F_ - 0.5 * phi2_ * (Q2_[k] - sigma2_[k] / m * sum_h_)) * dt;
    first_[k] += (F_ - phi1_ * Q1_[k]) * dt;
  }
  t_last_ = t;
}

void BgObserver::move_block(std::size_t k, int x, int delta) {
  const auto i = static_cast<std::size_t>(x);
  int& b = block_[k][i];
  const double hx = h_[i];
  const double m = 2.0 * ells_[k] + 1.0;
  const double d0 = b / m - rho_;
  b += delta;
  const double d1 = b / m - rho_;
  if (hx != 0.0) {
    Q1_[k] += hx * (d1 - d0);
    Q2_[k] += hx * (d1 * d1 - d0 * d0);
  }
}

void BgObserver::on_jump(const Jump& jump, const KmcEngine& engine) {
  integrate_to(jump.time);
  const auto& cfg = engine.config();
  const int a = jump.bond;
  const int span = std::min(1 + f_.support.hi - f_.support.lo + 1, L_);
  for (int k = 0; k < span; ++k) {
    const int x = cfg.wrap(static_cast<long long>(a) - f_.support.hi + k);
    const double hx = h_[static_cast<std::size_t>(x)];
    if (hx == 0.0) continue;
    double& v = fval_[static_cast<std::size_t>(x)];
    const double nv = f_(cfg, x);
    F_ += hx * (nv - v);
    v = nv;
  }
  const bool right = jump.from == jump.bond;
  for (std::size_t k = 0; k < ells_.size(); ++k) {
    const int ell = ells_[k];
    // Rightward i -> i+1: the block at i - ell loses, the block at i + 1 + ell gains.
    const long long i = jump.from;
    const long long lose = right ? i - ell : i + ell;
    const long long gain = right ? i + 1 + ell : i - 1 - ell;
    move_block(k, cfg.wrap(lose), -1);
    move_block(k, cfg.wrap(gain), +1);
  }
}

void BgObserver::advance(double t, const KmcEngine&) { integrate_to(t); }

void BgObserver::record(double t, const KmcEngine&, std::vector<ProbeRecord>& out) {
  out.push_back({0, t, prefix_ + "/raw", raw_});
  for (std::size_t k = 0; k < ells_.size(); ++k) {
    out.push_back({0, t, prefix_ + "/second/" + std::to_string(ells_[k]), second_[k]});
    out.push_back({0, t, prefix_ + "/first/" + std::to_string(ells_[k]), first_[k]});
  }
}

BgBound bg_bound(std::span<const double> h, int n, int ell, double t, double alpha0, bool first_order) {
  double s2 = 0.0, s1 = 0.0;
  for (double v : h) {
    s2 += v * v;
    s1 += std::abs(v);
  }
  s2 /= n;
  s1 /= n;
  BgBound b;
  const double l = ell;
  b.first_term = (first_order ? t * l * l : t * l) / n * s2;
  b.second_term = t * t * static_cast<double>(n) * n / std::pow(l, (first_order ? 1.0 : 2.0) + alpha0) * s1 * s1;
  return b;
}

BgVariance bg_variance(std::span<const double> integrals, std::span<const double> h, int n, int ell, double t,
                       double alpha0, bool first_order) {
  std::vector<double> sq(integrals.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = integrals[i] * integrals[i];
  const stats::Summary s = stats::summarize(sq);
  return {s.mean, s.se, bg_bound(h, n, ell, t, alpha0, first_order).total()};
}

}  // namespace kpzlab
