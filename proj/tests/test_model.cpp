#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "kpzlab/measures.hpp"
#include "kpzlab/model.hpp"
#include "kpzlab/rng.hpp"

using namespace kpzlab;

namespace {

const std::array<double, 4> kAlphaBeta1{std::exp(1.0) - 1.0, std::exp(1.0), 1.0, 2.0};

std::vector<ModelSpec> all_families() {
  return {ModelSpec::simple_exclusion(), ModelSpec::zero_range(RateFunction::linear()),
          ModelSpec::zero_range(RateFunction::constant()), ModelSpec::zero_range(RateFunction::affine(0.5, 1.0)),
          ModelSpec::kclg(2, 1.0), ModelSpec::kclg(3, 0.5), ModelSpec::speed_change(1.0, kAlphaBeta1)};
}

}  // namespace

TEST_CASE("asymmetry validation") {
  CHECK_THROWS_AS(Asymmetry::make(1.0, 1.5, 10), std::invalid_argument);
  CHECK_THROWS_AS(Asymmetry::make(5.0, 1.0, 2), std::invalid_argument);
  const auto as = Asymmetry::make(1.0, 0.5, 16);
  CHECK(as.p() == doctest::Approx(0.5 + 1.0 / 8.0));
  CHECK(as.p() + as.q() == doctest::Approx(1.0));
}

TEST_CASE("rate evaluation examples") {
  const auto as = Asymmetry::make(0.0, 1.0, 10);
  SUBCASE("simple exclusion occupied to empty bond") {
    Configuration c({1, 0, 0});
    const auto r = eval_rates(ModelSpec::simple_exclusion(), as, c, 0);
    CHECK(r.right == 1.0);
    CHECK(r.left == 0.0);
  }
  SUBCASE("zero range g(k) = k") {
    Configuration c({3, 7, 0});
    const auto r = eval_rates(ModelSpec::zero_range(RateFunction::linear()), as, c, 0);
    CHECK(r.right == 3.0);
    CHECK(r.left == 7.0);
  }
  SUBCASE("kclg m=2 pattern (1,1,0,0)") {
    Configuration c({1, 1, 0, 0, 0});
    const auto r = eval_rates(ModelSpec::kclg(2, 1.0), as, c, 1);
    CHECK(r.right == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(r.left == 0.0);
  }
  SUBCASE("exclusion rejects occupancy 2") {
    Configuration c({2, 0, 0});
    CHECK_THROWS_AS(eval_rates(ModelSpec::simple_exclusion(), as, c, 0), std::invalid_argument);
  }
}

TEST_CASE("kclg m=2 rates against direct formula on all 16 patterns") {
  const double theta = 1.0;
  const int n = 10;
  const auto as = Asymmetry::make(0.0, 1.0, n);
  const auto spec = ModelSpec::kclg(2, theta);
  for (int mask = 0; mask < 16; ++mask) {
    const int l = mask & 1, e0 = (mask >> 1) & 1, e1 = (mask >> 2) & 1, r = (mask >> 3) & 1;
    Configuration c({l, e0, e1, r, 0, 0});
    const auto got = eval_rates(spec, as, c, 1);
    const double A = l + r + theta / (2.0 * n);
    CHECK(got.right == doctest::Approx(e0 * (1 - e1) * A));
    CHECK(got.left == doctest::Approx(e1 * (1 - e0) * A));
  }
}

TEST_CASE("speed-change constraints") {
  const double e = std::exp(1.0);
  CHECK_THROWS_AS(ModelSpec::speed_change(1.0, {e + 1.0, e, 1.0, 2.0}), std::invalid_argument);
  CHECK_NOTHROW(ModelSpec::speed_change(1.0, kAlphaBeta1));
  CHECK_THROWS_AS(ModelSpec::kclg(2, 0.0), std::invalid_argument);
}

TEST_CASE("gradient identity holds for every family") {
  const auto as = Asymmetry::make(1.0, 0.5, 10);
  for (const auto& spec : all_families()) {
    CAPTURE(spec.describe());
    const auto rep = gradient_identity_check(spec, as);
    CHECK(rep.patterns > 0);
    CHECK(rep.max_violation <= 1e-12);
  }
}

TEST_CASE("detailed balance under the invariant measures") {
  const auto as = Asymmetry::make(1.0, 1.0, 10);
  CHECK(detailed_balance_check(ModelSpec::simple_exclusion(), as, MeasureSpec::bernoulli(0.3)).max_violation <= 1e-12);
  CHECK(detailed_balance_check(ModelSpec::kclg(2, 1.0), as, MeasureSpec::bernoulli(0.6)).max_violation <= 1e-12);
  CHECK(detailed_balance_check(ModelSpec::kclg(3, 1.0), as, MeasureSpec::bernoulli(0.6)).max_violation <= 1e-12);
  CHECK(detailed_balance_check(ModelSpec::zero_range(RateFunction::linear()), as,
                               MeasureSpec::zrp_fugacity(RateFunction::linear(), 2.0))
            .max_violation <= 1e-12);
  CHECK(detailed_balance_check(ModelSpec::zero_range(RateFunction::constant()), as,
                               MeasureSpec::zrp_fugacity(RateFunction::constant(), 0.3), 4)
            .max_violation <= 1e-12);
  const auto sc = ModelSpec::speed_change(1.0, kAlphaBeta1);
  CHECK(detailed_balance_check(sc, as, MeasureSpec::markov_gibbs(1.0, 0.0)).max_violation <= 1e-12);
  CHECK(detailed_balance_check(sc, as, MeasureSpec::markov_gibbs(1.0, 0.8)).max_violation <= 1e-12);
  // A wrong coupling breaks reversibility.
  CHECK(detailed_balance_check(sc, as, MeasureSpec::markov_gibbs(0.5, 0.0)).max_violation > 1e-3);
  CHECK_THROWS_AS(detailed_balance_check(ModelSpec::simple_exclusion(), as,
                                         MeasureSpec::zrp_fugacity(RateFunction::linear(), 1.0)),
                  std::invalid_argument);
}

TEST_CASE("rates are non-negative and bounded by the local mass") {
  const auto as = Asymmetry::make(1.0, 1.0, 10);
  for (const auto& spec : all_families()) {
    CAPTURE(spec.describe());
    const double C = rate_bound_constant(spec, as);
    CHECK(std::isfinite(C));
    CHECK(C > 0.0);
  }
}

TEST_CASE("shift covariance of rates") {
  const auto as = Asymmetry::make(0.5, 1.0, 10);
  CounterRng rng(42);
  for (const auto& spec : all_families()) {
    const int L = 17;
    std::vector<int> occ(L);
    for (int& v : occ) v = static_cast<int>(rng() % (spec.exclusion() ? 2 : 5));
    Configuration c(occ);
    for (int x = 0; x < L; ++x) {
      std::vector<int> sh(L);
      for (int y = 0; y < L; ++y) sh[y] = occ[(y + x) % L];
      Configuration cs(sh);
      const auto a = eval_rates(spec, as, c, x), b = eval_rates(spec, as, cs, 0);
      CHECK(a.right == b.right);
      CHECK(a.left == b.left);
      CHECK(eval_c(spec, as, c, x) == eval_c(spec, as, cs, 0));
    }
  }
}

TEST_CASE("kclg rates converge to the theta-free rates") {
  const auto spec = ModelSpec::kclg(2, 1.0);
  Configuration c({1, 1, 0, 0, 0, 1, 0, 1});
  for (int n : {10, 100, 1000}) {
    const auto as = Asymmetry::make(0.0, 1.0, n);
    for (int x = 0; x < c.size(); ++x) {
      const auto r = eval_rates(spec, as, c, x);
      const double free_r = c[x] * (1 - c[x + 1]) * (c[x - 1] + c[x + 2]);
      const double free_l = c[x + 1] * (1 - c[x]) * (c[x - 1] + c[x + 2]);
      const double expect = (c[x] != c[x + 1]) ? 1.0 / (2.0 * n) : 0.0;
      CHECK(r.right + r.left - free_r - free_l == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}
