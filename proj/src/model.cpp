#include "kpzlab/model.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kpzlab/measures.hpp"

namespace kpzlab {

Asymmetry Asymmetry::make(double a, double gamma, int n) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (n < 1) throw std::invalid_argument("n must be positive");
  Asymmetry as{a, gamma, n};
  if (as.p() < 0.0 || as.p() > 1.0) throw std::invalid_argument("p_n outside [0, 1]: increase n or reduce |a|");
  return as;
}

RateFunction RateFunction::linear() {
  return RateFunction("linear", [](int k) { return static_cast<double>(std::max(k, 0)); });
}

RateFunction RateFunction::constant() {
  return RateFunction("constant", [](int k) { return k >= 1 ? 1.0 : 0.0; });
}

RateFunction RateFunction::affine(double slope, double offset) {
  return RateFunction("affine", [slope, offset](int k) { return k >= 1 ? offset + slope * k : 0.0; });
}

RateFunction RateFunction::tabulated(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("empty g table");
  const double last = values.back();
  return RateFunction("table", [last](int) { return last; }, std::move(values));
}

double RateFunction::lipschitz(int kmax) const {
  const int top = table_.empty() ? kmax : static_cast<int>(table_.size()) - 1;
  double lip = 0.0;
  for (int k = 0; k < top; ++k) lip = std::max(lip, std::abs((*this)(k + 1) - (*this)(k)));
  return lip;
}

std::string family_name(Family f) {
  switch (f) {
    case Family::SimpleExclusion: return "simple_exclusion";
    case Family::ZeroRange: return "zero_range";
    case Family::Kclg: return "kclg";
    case Family::SpeedChange: return "speed_change";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "simple_exclusion" || s == "ssep") return Family::SimpleExclusion;
  if (s == "zero_range" || s == "zrp") return Family::ZeroRange;
  if (s == "kclg") return Family::Kclg;
  if (s == "speed_change") return Family::SpeedChange;
  throw std::invalid_argument("unknown model family: " + s);
}

ModelSpec ModelSpec::simple_exclusion() { return ModelSpec{}; }

ModelSpec ModelSpec::zero_range(RateFunction g) {
  ModelSpec s;
  s.family = Family::ZeroRange;
  s.g = std::move(g);
  s.validate();
  return s;
}

ModelSpec ModelSpec::kclg(int m, double theta) {
  ModelSpec s;
  s.family = Family::Kclg;
  s.m = m;
  s.theta = theta;
  s.validate();
  return s;
}

ModelSpec ModelSpec::speed_change(double beta, std::array<double, 4> alpha) {
  ModelSpec s;
  s.family = Family::SpeedChange;
  s.beta = beta;
  s.alpha = alpha;
  s.validate();
  return s;
}

void ModelSpec::validate() const {
  switch (family) {
    case Family::SimpleExclusion:
      break;
    case Family::ZeroRange: {
      if (!g.valid()) throw std::invalid_argument("zero_range: missing g");
      if (g(0) != 0.0) throw std::invalid_argument("zero_range: g(0) must be 0");
      for (int k = 1; k <= 256; ++k)
        if (!(g(k) > 0.0)) throw std::invalid_argument("zero_range: g(k) must be positive for k >= 1");
      break;
    }
    case Family::Kclg:
      if (m < 2) throw std::invalid_argument("kclg: m must be >= 2");
      if (!(theta > 0.0)) throw std::invalid_argument("kclg: theta must be positive");
      break;
    case Family::SpeedChange: {
      for (double a : alpha)
        if (!(a > 0.0)) throw std::invalid_argument("speed_change: alpha entries must be positive");
      const double scale = *std::max_element(alpha.begin(), alpha.end());
      if (std::abs(alpha[1] - std::exp(beta) * alpha[2]) > 1e-12 * scale)
        throw std::invalid_argument("speed_change: need alpha2 = e^beta alpha3");
      if (std::abs(alpha[0] - alpha[1] - alpha[2] + alpha[3]) > 1e-12 * scale)
        throw std::invalid_argument("speed_change: need alpha1 - alpha2 - alpha3 + alpha4 = 0");
      break;
    }
  }
}

Window ModelSpec::bond_window() const noexcept {
  switch (family) {
    case Family::SimpleExclusion:
    case Family::ZeroRange: return {0, 1};
    case Family::Kclg: return {-(m - 1), m};
    case Family::SpeedChange: return {-1, 2};
  }
  return {0, 1};
}

Window ModelSpec::c_window() const noexcept {
  switch (family) {
    case Family::SimpleExclusion:
    case Family::ZeroRange: return {0, 0};
    case Family::Kclg: return {-(m - 1), m - 1};
    case Family::SpeedChange: return {-1, 1};
  }
  return {0, 0};
}

int ModelSpec::range() const noexcept {
  const Window w = bond_window();
  return std::max(-w.lo, w.hi);
}

std::string ModelSpec::describe() const {
  std::ostringstream os;
  os << family_name(family);
  if (family == Family::ZeroRange) os << "(g=" << g.name() << ")";
  if (family == Family::Kclg) os << "(m=" << m << ",theta=" << theta << ")";
  if (family == Family::SpeedChange)
    os << "(beta=" << beta << ",alpha=" << alpha[0] << "," << alpha[1] << "," << alpha[2] << "," << alpha[3] << ")";
  return os.str();
}

namespace {

void check_occupancy(const ModelSpec& spec, int v) {
  if (v < 0) throw std::invalid_argument("negative occupancy");
  if (spec.exclusion() && v > 1) throw std::invalid_argument("occupancy outside {0,1} for exclusion family");
}

template <class F>
void for_each_pattern(int width, int cap, F&& f) {
  std::vector<int> pat(static_cast<std::size_t>(width), 0);
  while (true) {
    f(pat);
    int i = 0;
    while (i < width && pat[static_cast<std::size_t>(i)] == cap) pat[static_cast<std::size_t>(i++)] = 0;
    if (i == width) break;
    ++pat[static_cast<std::size_t>(i)];
  }
}

}  // namespace

BondRates eval_rates(const ModelSpec& spec, const Asymmetry& asym, const Configuration& config, int x) {
  const Window w = spec.bond_window();
  for (int j = w.lo; j <= w.hi; ++j) check_occupancy(spec, config[x + j]);
  return local_rates(spec, asym.n, [&](int j) { return config[static_cast<long long>(x) + j]; });
}

double eval_c(const ModelSpec& spec, const Asymmetry& asym, const Configuration& config, int x) {
  const Window w = spec.c_window();
  for (int j = w.lo; j <= w.hi; ++j) check_occupancy(spec, config[x + j]);
  return local_c(spec, asym.n, [&](int j) { return config[static_cast<long long>(x) + j]; });
}

double eval_b(const ModelSpec& spec, const Asymmetry& asym, const Configuration& config, int x) {
  const BondRates r = eval_rates(spec, asym, config, x);
  return r.right + r.left;
}

CheckReport gradient_identity_check(const ModelSpec& spec, const Asymmetry& asym, int zrp_cap) {
  const Window bw = spec.bond_window(), cw = spec.c_window();
  const int lo = std::min(bw.lo, cw.lo);
  const int hi = std::max(bw.hi, cw.hi + 1);
  const int cap = spec.exclusion() ? 1 : zrp_cap;
  CheckReport rep;
  for_each_pattern(hi - lo + 1, cap, [&](const std::vector<int>& pat) {
    auto eta = [&](int j) { return pat[static_cast<std::size_t>(j - lo)]; };
    auto eta1 = [&](int j) { return pat[static_cast<std::size_t>(j + 1 - lo)]; };
    const BondRates r = local_rates(spec, asym.n, eta);
    const double lhs = r.right - r.left;
    const double rhs = local_c(spec, asym.n, eta) - local_c(spec, asym.n, eta1);
    rep.max_violation = std::max(rep.max_violation, std::abs(lhs - rhs));
    ++rep.patterns;
  });
  return rep;
}

CheckReport detailed_balance_check(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& measure,
                                   int zrp_cap) {
  if (spec.exclusion() != (measure.kind != MeasureKind::ProductZrp))
    throw std::invalid_argument("detailed_balance_check: measure does not match model family");
  const Window bw = spec.bond_window();
  const int pad = measure.product() ? 0 : 1;
  const int lo = bw.lo - pad, hi = bw.hi + pad;
  const int cap = spec.exclusion() ? 1 : zrp_cap;
  const SiteChain& ch = measure.chain;
  if (!spec.exclusion() && cap + 1 >= ch.states) throw std::invalid_argument("detailed_balance_check: occupancy cap beyond measure truncation");
  auto weight = [&](const std::vector<int>& pat) {
    double w = ch.pi[static_cast<std::size_t>(pat[0])];
    for (std::size_t i = 1; i < pat.size(); ++i) w *= ch.p(pat[i - 1], pat[i]);
    return w;
  };
  CheckReport rep;
  for_each_pattern(hi - lo + 1, cap, [&](const std::vector<int>& pat) {
    const std::size_t i0 = static_cast<std::size_t>(-lo), i1 = i0 + 1;
    auto at = [&](const std::vector<int>& p) { return [&p, lo](int j) { return p[static_cast<std::size_t>(j - lo)]; }; };
    const BondRates here = local_rates(spec, asym.n, at(pat));
    double violation;
    if (pat[i1] == 0 || (spec.exclusion() && pat[i0] == 1)) {
      violation = std::abs(here.left);  // the move x+1 -> x is impossible
    } else {
      std::vector<int> moved = pat;
      --moved[i1];
      ++moved[i0];
      const BondRates there = local_rates(spec, asym.n, at(moved));
      violation = std::abs(there.right * weight(moved) / weight(pat) - here.left);
    }
    rep.max_violation = std::max(rep.max_violation, violation);
    ++rep.patterns;
  });
  return rep;
}

double rate_bound_constant(const ModelSpec& spec, const Asymmetry& asym, int zrp_cap) {
  const Window bw = spec.bond_window();
  const int R = spec.range();
  const int lo = std::min(bw.lo, -R), hi = std::max(bw.hi, R);
  const int cap = spec.exclusion() ? 1 : zrp_cap;
  double C = 0.0;
  for_each_pattern(hi - lo + 1, cap, [&](const std::vector<int>& pat) {
    auto eta = [&](int j) { return pat[static_cast<std::size_t>(j - lo)]; };
    const BondRates r = local_rates(spec, asym.n, eta);
    int mass = 0;
    for (int y = -R; y <= R; ++y) mass += eta(y);
    const double b = r.right + r.left;
    if (mass == 0) {
      if (b > 0.0) C = std::numeric_limits<double>::infinity();
    } else {
      C = std::max(C, b / mass);
    }
  });
  return C;
}

}  // namespace kpzlab
