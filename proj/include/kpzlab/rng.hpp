#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace kpzlab {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: output i is mix64(key + i * golden_gamma), i.e. SplitMix64
// with an explicit counter. Streams with random keys overlap only if their keys fall
// within one stream length of each other in gamma units (probability ~ length/2^64).
class CounterRng {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1].
  double uniform_open0() noexcept { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  double exponential(double rate) noexcept { return -std::log(uniform_open0()) / rate; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double th = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Documented splitting: key = mix64(mix64(master ^ C) + (replica + 1) * gamma).
inline std::uint64_t replica_key(std::uint64_t master_seed, std::uint64_t replica) noexcept {
  return mix64(mix64(master_seed ^ 0x6a09e667f3bcc909ULL) + (replica + 1) * CounterRng::kGamma);
}

inline CounterRng replica_stream(std::uint64_t master_seed, std::uint64_t replica) noexcept {
  return CounterRng(replica_key(master_seed, replica));
}

}  // namespace kpzlab
