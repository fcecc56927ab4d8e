#include "kpzlab/kmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kpzlab {

RateKernel::RateKernel(const ModelSpec& spec, const Asymmetry& asym)
    : spec_(spec), bw_(spec.bond_window()), cw_(spec.c_window()) {
  spec.validate();
  const double n2 = static_cast<double>(asym.n) * asym.n;
  wr_ = n2 * asym.p();
  wl_ = n2 * asym.q();
  if (spec.exclusion()) {
    const int wb = bw_.width(), wc = cw_.width();
    rate_table_.resize(std::size_t{1} << wb);
    for (std::size_t mask = 0; mask < rate_table_.size(); ++mask)
      rate_table_[mask] = local_rates(spec, asym.n, [&](int j) { return static_cast<int>((mask >> (j - bw_.lo)) & 1u); });
    c_table_.resize(std::size_t{1} << wc);
    for (std::size_t mask = 0; mask < c_table_.size(); ++mask)
      c_table_[mask] = local_c(spec, asym.n, [&](int j) { return static_cast<int>((mask >> (j - cw_.lo)) & 1u); });
  } else {
    gcache_.resize(4096);
    for (int k = 0; k < 4096; ++k) gcache_[static_cast<std::size_t>(k)] = spec.g(k);
  }
}

int RateKernel::pattern(const std::vector<int>& occ, int x, const Window& w) const {
  const int L = static_cast<int>(occ.size());
  int mask = 0;
  int y = x + w.lo;
  if (y < 0) y += L;
  for (int j = 0; j < w.width(); ++j) {
    mask |= occ[static_cast<std::size_t>(y)] << j;
    if (++y == L) y = 0;
  }
  return mask;
}

BondRates RateKernel::rates(const std::vector<int>& occ, int x) const {
  if (!rate_table_.empty()) return rate_table_[static_cast<std::size_t>(pattern(occ, x, bw_))];
  const int L = static_cast<int>(occ.size());
  const int x1 = x + 1 == L ? 0 : x + 1;
  return {g(occ[static_cast<std::size_t>(x)]), g(occ[static_cast<std::size_t>(x1)])};
}

double RateKernel::c(const std::vector<int>& occ, int x) const {
  if (!c_table_.empty()) return c_table_[static_cast<std::size_t>(pattern(occ, x, cw_))];
  return g(occ[static_cast<std::size_t>(x)]);
}

FenwickTree::FenwickTree(std::size_t n) : n_(n), top_(1), tree_(n + 1, 0.0), leaf_(n, 0.0) {
  while (top_ * 2 <= n_) top_ *= 2;
}

void FenwickTree::set(std::size_t i, double v) {
  const double d = v - leaf_[i];
  if (d == 0.0) return;
  leaf_[i] = v;
  for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += d;
}

double FenwickTree::total() const {
  double s = 0.0;
  for (std::size_t j = n_; j > 0; j -= j & (~j + 1)) s += tree_[j];
  return s;
}

std::size_t FenwickTree::find(double u) const {
  std::size_t pos = 0;
  for (std::size_t step = top_; step > 0; step >>= 1) {
    if (pos + step <= n_ && tree_[pos + step] <= u) {
      pos += step;
      u -= tree_[pos];
    }
  }
  return pos < n_ ? pos : n_ - 1;
}

void FenwickTree::rebuild() {
  for (std::size_t i = 1; i <= n_; ++i) tree_[i] = leaf_[i - 1];
  for (std::size_t i = 1; i <= n_; ++i) {
    const std::size_t j = i + (i & (~i + 1));
    if (j <= n_) tree_[j] += tree_[i];
  }
}

KmcEngine::KmcEngine(const ModelSpec& spec, const Asymmetry& asym, Configuration initial, CounterRng rng,
                     EngineOptions opts)
    : spec_(spec),
      asym_(asym),
      kernel_(spec, asym),
      config_(std::move(initial)),
      rng_(rng),
      opts_(opts),
      tree_(2 * static_cast<std::size_t>(config_.size())),
      current_(static_cast<std::size_t>(config_.size()), 0) {
  const int L = config_.size();
  const Window w = spec.bond_window();
  if (L < w.width()) throw std::invalid_argument("ring too small for the rate support");
  for (int v : config_.occupancy) {
    if (v < 0 || (spec.exclusion() && v > 1)) throw std::invalid_argument("invalid initial occupancy");
  }
  for (int x = 0; x < L; ++x) refresh_bond(x);
  tree_.rebuild();
}

void KmcEngine::refresh_bond(int x) {
  const BondRates r = kernel_.rates(config_.occupancy, x);
  tree_.set(2 * static_cast<std::size_t>(x), kernel_.right_weight() * r.right);
  tree_.set(2 * static_cast<std::size_t>(x) + 1, kernel_.left_weight() * r.left);
}

void KmcEngine::apply(int bond, bool rightward) {
  const int L = config_.size();
  const int x1 = bond + 1 == L ? 0 : bond + 1;
  const int from = rightward ? bond : x1, to = rightward ? x1 : bond;
  --config_.occupancy[static_cast<std::size_t>(from)];
  ++config_.occupancy[static_cast<std::size_t>(to)];
  current_[static_cast<std::size_t>(bond)] += rightward ? 1 : -1;
  const Window w = kernel_.bond_window();
  for (int y = bond - w.hi; y <= bond + 1 - w.lo; ++y) refresh_bond(config_.wrap(y));
}

std::optional<Jump> KmcEngine::step_until(double t_limit) {
  const double R = tree_.total();
  if (!(R > 0.0)) throw std::runtime_error("absorbing configuration: total jump rate is zero");
  const double dt = rng_.exponential(R);
  if (t_ + dt > t_limit) {
    t_ = t_limit;
    return std::nullopt;
  }
  t_ += dt;
  std::size_t idx = tree_.find(rng_.uniform() * R);
  while (tree_.value(idx) <= 0.0) idx = tree_.find(rng_.uniform() * R);
  const int bond = static_cast<int>(idx / 2);
  const bool rightward = idx % 2 == 0;
  apply(bond, rightward);
  ++events_;
  if (events_ % opts_.rebuild_every == 0) tree_.rebuild();
  if (opts_.debug_checks) {
    const double direct = direct_total_rate();
    if (std::abs(direct - tree_.total()) > 1e-9 * std::max(1.0, direct))
      throw std::logic_error("rate index total drifted from the direct sum");
    if (events_ % opts_.revalidate_every == 0) validate_rates();
  }
  const int L = config_.size();
  const int x1 = bond + 1 == L ? 0 : bond + 1;
  return Jump{bond, rightward ? bond : x1, rightward ? x1 : bond, t_};
}

Jump KmcEngine::step() {
  auto j = step_until(std::numeric_limits<double>::infinity());
  return *j;
}

double KmcEngine::direct_total_rate() const {
  double s = 0.0;
  for (std::size_t i = 0; i < tree_.size(); ++i) s += tree_.value(i);
  return s;
}

void KmcEngine::validate_rates() const {
  for (int x = 0; x < config_.size(); ++x) {
    const BondRates r = kernel_.rates(config_.occupancy, x);
    const double er = kernel_.right_weight() * r.right, el = kernel_.left_weight() * r.left;
    if (er != tree_.value(2 * static_cast<std::size_t>(x)) || el != tree_.value(2 * static_cast<std::size_t>(x) + 1))
      throw std::logic_error("stale bond rate at bond " + std::to_string(x));
  }
}

}  // namespace kpzlab
