#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "kpzlab/fields.hpp"
#include "kpzlab/kmc.hpp"
#include "kpzlab/measures.hpp"
#include "kpzlab/stats.hpp"

using namespace kpzlab;

namespace {

KmcEngine stationary_engine(const ModelSpec& spec, const Asymmetry& asym, const MeasureSpec& m, int L,
                            std::uint64_t seed, std::uint64_t replica, EngineOptions opts = {}) {
  auto rng = replica_stream(seed, replica);
  auto cfg = sample_configuration(m, L, rng);
  return KmcEngine(spec, asym, std::move(cfg), rng, opts);
}

}  // namespace

TEST_CASE("single particle walk has msd n^2 t") {
  const int n = 8, L = 1000, reps = 10000;
  const double t = 1.0;
  const auto asym = Asymmetry::make(0.0, 1.0, n);
  std::vector<double> sq;
  for (int r = 0; r < reps; ++r) {
    std::vector<int> occ(L, 0);
    occ[0] = 1;
    KmcEngine e(ModelSpec::simple_exclusion(), asym, Configuration(occ), replica_stream(3, static_cast<std::uint64_t>(r)));
    long long disp = 0;
    while (auto j = e.step_until(t)) disp += j->from == j->bond ? 1 : -1;
    sq.push_back(static_cast<double>(disp * disp));
  }
  const auto s = stats::summarize(sq);
  CHECK(s.mean / (n * n * t) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("two-site holding times are exponential(1)") {
  KmcEngine e(ModelSpec::simple_exclusion(), Asymmetry::make(0.0, 1.0, 1), Configuration({1, 0}), replica_stream(5, 0));
  CHECK(e.total_rate() == doctest::Approx(1.0));
  std::vector<double> hold;
  double last = 0.0;
  for (int i = 0; i < 3000; ++i) {
    const Jump j = e.step();
    hold.push_back(j.time - last);
    last = j.time;
  }
  const auto ks = stats::ks_one_sample(hold, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); });
  CHECK(ks.p_value > 1e-3);
}

TEST_CASE("empty zero-range ring cannot step") {
  KmcEngine e(ModelSpec::zero_range(RateFunction::linear()), Asymmetry::make(1.0, 1.0, 4), Configuration(std::vector<int>(16, 0)),
              replica_stream(1, 0));
  CHECK(e.total_rate() == 0.0);
  CHECK_THROWS_AS(e.step(), std::runtime_error);
}

TEST_CASE("stationary runs keep local averages at their equilibrium values") {
  struct Case {
    ModelSpec spec;
    MeasureSpec measure;
    LocalFunction f;
    double expected;
  };
  const int n = 16;
  const auto sep = ModelSpec::simple_exclusion();
  const auto zrp = ModelSpec::zero_range(RateFunction::linear());
  std::vector<Case> cases = {
      {sep, MeasureSpec::bernoulli(0.3), density_fn(0.0), 0.3},
      {sep, MeasureSpec::bernoulli(0.3), rate_sum_fn(sep, n), 2 * 0.3 * 0.7},
      {zrp, MeasureSpec::zrp_density(RateFunction::linear(), 0.8), pair_product_fn(0, 1, 0.0), 0.64},
  };
  const auto asym = Asymmetry::make(1.0, 1.0, n);
  for (const auto& c : cases) {
    std::vector<double> avg;
    for (int r = 0; r < 60; ++r) {
      auto e = stationary_engine(c.spec, asym, c.measure, 128, 21, static_cast<std::uint64_t>(r));
      LocalAverageObserver obs("f", c.f);
      Observer* list[] = {&obs};
      const double times[] = {0.5};
      std::vector<ProbeRecord> rec;
      run_trajectory(e, list, times, 0, rec);
      avg.push_back(rec.back().value);
    }
    const auto s = stats::summarize(avg);
    CHECK(std::abs(s.mean - c.expected) < 3.0 * s.se);
  }
}

TEST_CASE("particle number is conserved and runs are deterministic") {
  const auto spec = ModelSpec::kclg(2, 1.0);
  const auto asym = Asymmetry::make(2.0, 0.5, 10);
  auto e1 = stationary_engine(spec, asym, MeasureSpec::bernoulli(0.6), 200, 9, 4);
  auto e2 = stationary_engine(spec, asym, MeasureSpec::bernoulli(0.6), 200, 9, 4);
  const long long N = e1.config().particles();
  for (int i = 0; i < 20000; ++i) {
    const Jump a = e1.step(), b = e2.step();
    REQUIRE(a.bond == b.bond);
    REQUIRE(a.from == b.from);
    REQUIRE(a.time == b.time);
  }
  CHECK(e1.config().particles() == N);
  CHECK(e1.occupancy() == e2.occupancy());
}

TEST_CASE("rate tree stays consistent with debug checks") {
  EngineOptions opts;
  opts.debug_checks = true;
  opts.revalidate_every = 5000;
  const std::vector<ModelSpec> specs = {ModelSpec::simple_exclusion(), ModelSpec::zero_range(RateFunction::affine(1.0, 0.5)),
                                        ModelSpec::kclg(3, 0.5), ModelSpec::speed_change(1.0, {std::exp(1.0) - 1.0, std::exp(1.0), 1.0, 2.0})};
  for (const auto& spec : specs) {
    const auto m = spec.family == Family::ZeroRange ? MeasureSpec::zrp_density(spec.g, 1.2) : MeasureSpec::bernoulli(0.45);
    auto e = stationary_engine(spec, Asymmetry::make(1.5, 0.75, 12), m, 300, 17, 0, opts);
    CHECK_NOTHROW(for (int i = 0; i < 30000; ++i) e.step());
    CHECK_NOTHROW(e.validate_rates());
    CHECK(e.total_rate() == doctest::Approx(e.direct_total_rate()).epsilon(1e-9));
  }
}

TEST_CASE("bond currents match the jump stream") {
  const auto asym = Asymmetry::make(1.0, 1.0, 6);
  auto e = stationary_engine(ModelSpec::zero_range(RateFunction::linear()), asym,
                             MeasureSpec::zrp_density(RateFunction::linear(), 1.0), 40, 2, 0);
  std::vector<long long> net(40, 0);
  for (int i = 0; i < 50000; ++i) {
    const Jump j = e.step();
    net[static_cast<std::size_t>(j.bond)] += j.from == j.bond ? 1 : -1;
  }
  for (int x = 0; x < 40; ++x) CHECK(e.bond_current(x) == net[static_cast<std::size_t>(x)]);
}

TEST_CASE("zero drift is time reversible on two-point functions") {
  // E[eta_0(x) eta_t(x+1)] - E[eta_0(x+1) eta_t(x)] vanishes at a = 0 and not with strong drift.
  const int n = 8, L = 128;
  const double t = 0.05;
  auto skew = [&](double a) {
    std::vector<double> d;
    for (int r = 0; r < 400; ++r) {
      auto e = stationary_engine(ModelSpec::simple_exclusion(), Asymmetry::make(a, 1.0, n), MeasureSpec::bernoulli(0.2),
                                 L, 33, static_cast<std::uint64_t>(r));
      const auto start = e.config();
      while (e.step_until(t)) {
      }
      double s = 0.0;
      for (int x = 0; x < L; ++x)
        s += start[x] * e.config()[x + 1] - start[x + 1] * e.config()[x];
      d.push_back(s / L);
    }
    return stats::summarize(d);
  };
  const auto sym = skew(0.0);
  CHECK(std::abs(sym.mean) < 3.0 * sym.se);
  const auto drift = skew(6.0);
  CHECK(drift.mean > 3.0 * drift.se);
}
