#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kpzlab/model.hpp"
#include "kpzlab/rng.hpp"

namespace kpzlab {

// Fast local evaluation of rates and c on ring occupancy arrays. Exclusion families use
// pattern tables; zero-range uses a cached g.
class RateKernel {
 public:
  RateKernel(const ModelSpec& spec, const Asymmetry& asym);

  BondRates rates(const std::vector<int>& occ, int x) const;
  double b(const std::vector<int>& occ, int x) const {
    const BondRates r = rates(occ, x);
    return r.right + r.left;
  }
  double c(const std::vector<int>& occ, int x) const;

  const Window& bond_window() const noexcept { return bw_; }
  const Window& c_window() const noexcept { return cw_; }
  double right_weight() const noexcept { return wr_; }  // n^2 p_n
  double left_weight() const noexcept { return wl_; }   // n^2 q_n

 private:
  int pattern(const std::vector<int>& occ, int x, const Window& w) const;
  double g(int k) const { return k < static_cast<int>(gcache_.size()) ? gcache_[static_cast<std::size_t>(k)] : spec_.g(k); }

  ModelSpec spec_;
  Window bw_, cw_;
  double wr_, wl_;
  std::vector<BondRates> rate_table_;
  std::vector<double> c_table_;
  std::vector<double> gcache_;
};

class FenwickTree {
 public:
  explicit FenwickTree(std::size_t n = 0);
  void set(std::size_t i, double v);
  double value(std::size_t i) const { return leaf_[i]; }
  double total() const;
  // Smallest index i with leaf_[0] + ... + leaf_[i] > u.
  std::size_t find(double u) const;
  void rebuild();
  std::size_t size() const noexcept { return n_; }

 private:
  std::size_t n_;
  std::size_t top_;
  std::vector<double> tree_;
  std::vector<double> leaf_;
};

struct Jump {
  int bond = 0;  // bond (bond, bond+1)
  int from = 0;
  int to = 0;
  double time = 0.0;
};

struct EngineOptions {
  bool debug_checks = false;
  std::uint64_t rebuild_every = 1u << 20;
  std::uint64_t revalidate_every = 1000000;
};

// Exact continuous-time simulation of the generator on the ring, time already including n^2.
class KmcEngine {
 public:
  KmcEngine(const ModelSpec& spec, const Asymmetry& asym, Configuration initial, CounterRng rng,
            EngineOptions opts = {});

  // Performs the next event if it happens at or before t_limit; otherwise moves the clock to
  // t_limit (the residual waiting time is redrawn later, which is exact by memorylessness).
  std::optional<Jump> step_until(double t_limit);
  Jump step();

  double time() const noexcept { return t_; }
  const Configuration& config() const noexcept { return config_; }
  const std::vector<int>& occupancy() const noexcept { return config_.occupancy; }
  int size() const noexcept { return config_.size(); }
  std::uint64_t events() const noexcept { return events_; }
  // Net rightward particle crossings of bond (x, x+1) since the start.
  long long bond_current(int x) const { return current_[static_cast<std::size_t>(config_.wrap(x))]; }
  double total_rate() const { return tree_.total(); }
  double direct_total_rate() const;
  // Recomputes every rate from scratch and throws std::logic_error on mismatch.
  void validate_rates() const;

  const RateKernel& kernel() const noexcept { return kernel_; }
  const ModelSpec& model() const noexcept { return spec_; }
  const Asymmetry& asymmetry() const noexcept { return asym_; }

 private:
  void refresh_bond(int x);
  void apply(int bond, bool rightward);

  ModelSpec spec_;
  Asymmetry asym_;
  RateKernel kernel_;
  Configuration config_;
  CounterRng rng_;
  EngineOptions opts_;
  FenwickTree tree_;
  std::vector<long long> current_;
  double t_ = 0.0;
  std::uint64_t events_ = 0;
};

}  // namespace kpzlab
