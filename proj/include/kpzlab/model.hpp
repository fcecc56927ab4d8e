#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kpzlab {

struct Configuration {
  std::vector<int> occupancy;

  Configuration() = default;
  explicit Configuration(std::vector<int> occ) : occupancy(std::move(occ)) {}

  int size() const noexcept { return static_cast<int>(occupancy.size()); }
  int wrap(long long x) const noexcept {
    const long long L = size();
    long long r = x % L;
    return static_cast<int>(r < 0 ? r + L : r);
  }
  // Periodic read access.
  int operator[](long long x) const noexcept { return occupancy[static_cast<std::size_t>(wrap(x))]; }
  long long particles() const noexcept {
    long long s = 0;
    for (int v : occupancy) s += v;
    return s;
  }
};

struct Asymmetry {
  double a = 0.0;
  double gamma = 1.0;
  int n = 1;

  // Throws std::invalid_argument unless gamma in (0,1], n >= 1 and p_n in [0,1].
  static Asymmetry make(double a, double gamma, int n);
  double p() const noexcept { return 0.5 + a / (2.0 * std::pow(static_cast<double>(n), gamma)); }
  double q() const noexcept { return 1.0 - p(); }
};

// Zero-range jump rate g: N_0 -> R_+, a closure with an optional tabulation.
class RateFunction {
 public:
  RateFunction() = default;
  RateFunction(std::string name, std::function<double(int)> fn, std::vector<double> table = {})
      : name_(std::move(name)), fn_(std::move(fn)), table_(std::move(table)) {}

  static RateFunction linear();        // g(k) = k
  static RateFunction constant();      // g(k) = 1{k >= 1}
  static RateFunction affine(double slope, double offset);  // g(k) = offset + slope k for k >= 1
  static RateFunction tabulated(std::vector<double> values);  // holds the last value beyond the table

  double operator()(int k) const {
    if (k >= 0 && static_cast<std::size_t>(k) < table_.size()) return table_[static_cast<std::size_t>(k)];
    return fn_(k);
  }
  const std::string& name() const noexcept { return name_; }
  bool valid() const noexcept { return static_cast<bool>(fn_); }
  // sup |g(k+1) - g(k)| over k < kmax (the tabulated range when a table is present).
  double lipschitz(int kmax = 256) const;

 private:
  std::string name_;
  std::function<double(int)> fn_;
  std::vector<double> table_;
};

enum class Family { SimpleExclusion, ZeroRange, Kclg, SpeedChange };

std::string family_name(Family f);
Family family_from_name(const std::string& s);

struct Window {
  int lo = 0;
  int hi = 0;
  int width() const noexcept { return hi - lo + 1; }
};

struct BondRates {
  double right = 0.0;
  double left = 0.0;
};

struct ModelSpec {
  Family family = Family::SimpleExclusion;
  RateFunction g;                 // zero-range
  int m = 2;                      // KCLG
  double theta = 1.0;             // KCLG
  double beta = 0.0;              // speed change
  std::array<double, 4> alpha{};  // speed change

  static ModelSpec simple_exclusion();
  static ModelSpec zero_range(RateFunction g);
  static ModelSpec kclg(int m, double theta);
  static ModelSpec speed_change(double beta, std::array<double, 4> alpha);

  void validate() const;
  bool exclusion() const noexcept { return family != Family::ZeroRange; }
  // Sites (relative to the bond's left site x) on which b^R_x, b^L_x depend.
  Window bond_window() const noexcept;
  // Sites (relative to x) on which c_x depends.
  Window c_window() const noexcept;
  // Support radius R of the bond rates at bond 0.
  int range() const noexcept;
  std::string describe() const;
};

// Unweighted rates of bond (0,1); eta(j) is the occupancy at offset j.
template <class Eta>
BondRates local_rates(const ModelSpec& s, int n, Eta&& eta) {
  const int e0 = eta(0), e1 = eta(1);
  switch (s.family) {
    case Family::SimpleExclusion:
      return {static_cast<double>(e0 * (1 - e1)), static_cast<double>(e1 * (1 - e0))};
    case Family::ZeroRange:
      return {s.g(e0), s.g(e1)};
    case Family::Kclg: {
      if (e0 == e1) return {0.0, 0.0};
      double A = s.theta / (2.0 * n);
      for (int start = -(s.m - 1); start <= 0; ++start) {
        int prod = 1;
        for (int j = start; j <= start + s.m && prod; ++j)
          if (j != 0 && j != 1) prod *= eta(j);
        A += prod;
      }
      return {static_cast<double>(e0 * (1 - e1)) * A, static_cast<double>(e1 * (1 - e0)) * A};
    }
    case Family::SpeedChange: {
      if (e0 == e1) return {0.0, 0.0};
      const int l = eta(-1), r = eta(2);
      const auto& a = s.alpha;
      const double common = a[0] * l * r + a[3] * (1 - l) * (1 - r);
      const double right = common + a[1] * (1 - l) * r + a[2] * l * (1 - r);
      const double left = common + a[2] * (1 - l) * r + a[1] * l * (1 - r);
      return {e0 * (1 - e1) * right, e1 * (1 - e0) * left};
    }
  }
  return {};
}

// The function c with b^R_x - b^L_x = c_x - c_{x+1}, evaluated at offset 0.
template <class Eta>
double local_c(const ModelSpec& s, int n, Eta&& eta) {
  switch (s.family) {
    case Family::SimpleExclusion:
      return eta(0);
    case Family::ZeroRange:
      return s.g(eta(0));
    case Family::Kclg: {
      double c = s.theta / (2.0 * n) * eta(0);
      for (int start = -(s.m - 1); start <= 0; ++start) {
        int prod = 1;
        for (int j = start; j < start + s.m && prod; ++j) prod *= eta(j);
        c += prod;
      }
      for (int start = -(s.m - 1); start <= -1; ++start) {
        int prod = 1;
        for (int j = start; j <= start + s.m && prod; ++j)
          if (j != 0) prod *= eta(j);
        c -= prod;
      }
      return c;
    }
    case Family::SpeedChange: {
      const auto& a = s.alpha;
      const int l = eta(-1), z = eta(0), r = eta(1);
      return a[3] * z + (a[2] - a[3]) * l * z + (a[2] - a[3]) * z * r + (a[3] - a[1]) * l * r +
             (a[1] - a[2]) * l * z * r;
    }
  }
  return 0.0;
}

// Rates at bond (x, x+1) of a ring configuration. Throws for invalid occupancies.
BondRates eval_rates(const ModelSpec& spec, const Asymmetry& asym, const Configuration& config, int x);
double eval_c(const ModelSpec& spec, const Asymmetry& asym, const Configuration& config, int x);
// b_x = b^R_x + b^L_x
double eval_b(const ModelSpec& spec, const Asymmetry& asym, const Configuration& config, int x);

struct CheckReport {
  double max_violation = 0.0;
  std::size_t patterns = 0;
};

// Exhaustive check of b^R_0 - b^L_0 = c_0 - c_1 over local patterns (occupancy cap for ZRP).
CheckReport gradient_identity_check(const ModelSpec& spec, const Asymmetry& asym, int zrp_cap = 6);

struct MeasureSpec;

// Exhaustive check of b^R_0(eta^{1,0}) nu(eta^{1,0})/nu(eta) = b^L_0(eta) on a window holding the
// rate support (plus one conditioned site each side for Markov measures).
CheckReport detailed_balance_check(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& measure,
                                   int zrp_cap = 6);

// sup over local patterns of (b^R + b^L) / sum_{|y| <= R} eta(y); infinite if rates are
// positive on an empty neighbourhood.
double rate_bound_constant(const ModelSpec& spec, const Asymmetry& asym, int zrp_cap = 6);

}  // namespace kpzlab
