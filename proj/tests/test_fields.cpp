#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "kpzlab/fields.hpp"
#include "kpzlab/measures.hpp"
#include "kpzlab/stats.hpp"

using namespace kpzlab;

TEST_CASE("test function derivatives agree with finite differences") {
  std::vector<double> tab;
  for (int i = 0; i < 40; ++i) tab.push_back(std::sin(0.3 * i) * std::exp(-0.01 * (i - 20) * (i - 20)));
  const std::vector<TestFunction> fns = {TestFunction::gaussian_bump(0.2, 0.4), TestFunction::hermite(3, -0.1, 0.5),
                                         TestFunction::tabulated(tab, -1.0, 0.05)};
  for (const auto& H : fns) {
    const double h = 1e-2 * H.length_scale();
    const double lo = H.center() - H.support_radius(), hi = H.center() + H.support_radius();
    const double du = H.length_scale() / 7.0;
    for (int k = 1; k <= 4; ++k) {
      double top = 0.0, worst = 0.0;
      for (double u = lo; u < hi; u += du) top = std::max(top, std::abs(H.derivative(k, u)));
      for (double u = lo + h; u < hi - h; u += du) {
        // Richardson-extrapolated centred differences
        const double d1 = (H.derivative(k - 1, u + h) - H.derivative(k - 1, u - h)) / (2.0 * h);
        const double d2 = (H.derivative(k - 1, u + h / 2) - H.derivative(k - 1, u - h / 2)) / h;
        worst = std::max(worst, std::abs((4.0 * d2 - d1) / 3.0 - H.derivative(k, u)) / top);
      }
      INFO(H.describe(), " order ", k);
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("gaussian bump norms") {
  const double w = 0.4;
  const auto H = TestFunction::gaussian_bump(0.0, w);
  CHECK(H.l2_norm() == doctest::Approx(std::sqrt(w * std::sqrt(M_PI))).epsilon(1e-9));
  CHECK(H.grad_l2() == doctest::Approx(std::sqrt(std::sqrt(M_PI) / (2.0 * w))).epsilon(1e-9));
  CHECK(H.grad_l1() == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(H.lap_l2() == doctest::Approx(std::sqrt(3.0 * std::sqrt(M_PI) / (4.0 * w * w * w))).epsilon(1e-9));
  CHECK(H(H.center() + H.support_radius() + 1e-9) == 0.0);
}

TEST_CASE("frame shift") {
  const auto a0 = Asymmetry::make(0.0, 0.5, 100);
  CHECK(Frame(a0, 0.8, Frame::Mode::Fractional).shift(3.0) == 0.0);
  const auto a1 = Asymmetry::make(1.0, 0.5, 100);
  CHECK(Frame(a1, 0.0, Frame::Mode::Floor).shift(3.0) == 0.0);
  const Frame f(a1, 0.8, Frame::Mode::Fractional), g(a1, 0.8, Frame::Mode::Floor);
  CHECK(f.velocity() == doctest::Approx(0.4 * 1000.0));
  CHECK(f.shift(0.01234) == doctest::Approx(4.936));
  CHECK(g.shift(0.01234) == 4.0);
  const Frame back(a1, -0.8, Frame::Mode::Floor);
  CHECK(back.shift(0.001) == -1.0);
  auto [tb, k] = back.next_floor_break(0);
  CHECK(tb == 0.0);
  CHECK(k == -1);
  std::tie(tb, k) = back.next_floor_break(-1);
  CHECK(tb == doctest::Approx(1.0 / 400.0));
  CHECK(k == -2);
}

TEST_CASE("mollifier norm conditions") {
  double prev = 1e9;
  for (double frac : {0.4, 0.2, 0.1, 0.05, 0.025}) {
    const Mollifier m(0.3, KernelShape::StandardBump, frac);
    const double d = m.distance_to_iota() / std::sqrt(0.3);
    CHECK(d < prev);
    prev = d;
  }
  for (double eps : {1.0, 0.4, 0.2, 0.1, 0.05})
    for (auto shape : {KernelShape::StandardBump, KernelShape::FlatBump}) {
      const Mollifier m(eps, shape);
      CHECK(m.l2_norm_sq() <= 1.0 / eps);
      CHECK(m.distance_to_iota() / std::sqrt(eps) <= 0.7);
      CHECK(m(0.0) == doctest::Approx(0.5 / eps));
      // unit mass
      const auto g = m.lattice(400);
      double mass = 0.0;
      for (double v : g) mass += v / 400.0;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    }
  CHECK_THROWS(Mollifier(0.01).lattice(100));
  CHECK_THROWS(Mollifier(0.0));
}

TEST_CASE("fluctuation field examples") {
  const int n = 16;
  const auto H = TestFunction::gaussian_bump(0.0, 0.5);
  Configuration empty(std::vector<int>(200, 0));
  CHECK(fluctuation_field(empty, H, Frame::still(), 1.0, 0.0, n) == 0.0);
  Configuration one(std::vector<int>(200, 0));
  one.occupancy[0] = 1;
  CHECK(fluctuation_field(one, H, Frame::still(), 1.0, 0.0, n) == doctest::Approx(1.0 / 4.0));
  // nearest image: a particle at L-3 sits at x = -3
  Configuration left(std::vector<int>(200, 0));
  left.occupancy[197] = 1;
  CHECK(fluctuation_field(left, H, Frame::still(), 0.0, 0.0, n) == doctest::Approx(H(-3.0 / n) / 4.0));
  CHECK_THROWS(fluctuation_field(Configuration(std::vector<int>(100, 0)), H, Frame::still(), 0.0, 0.0, n));

  auto rng = replica_stream(4, 0);
  const auto c = sample_configuration(MeasureSpec::bernoulli(0.4), 200, rng);
  const auto H2 = TestFunction::hermite(2, 0.1, 0.3);
  const double lin = fluctuation_field(c, H, Frame::still(), 0.0, 0.4, n) * 2.0 -
                     fluctuation_field(c, H2, Frame::still(), 0.0, 0.4, n) * 3.0;
  std::vector<double> samples;
  for (int i = 0; i < 400; ++i) {
    const double u = -4.0 + 0.02 * i;
    samples.push_back(2.0 * H(u) - 3.0 * H2(u));
  }
  double direct = 0.0;
  for (int x = -64; x <= 64; ++x) direct += (2.0 * H(x / 16.0) - 3.0 * H2(x / 16.0)) * (c[x] - 0.4);
  CHECK(lin == doctest::Approx(direct / 4.0).epsilon(1e-12));
}

TEST_CASE("floor and fractional frames differ by the Taylor bound") {
  const int n = 64, L = 1200;
  const auto asym = Asymmetry::make(1.0, 0.5, n);
  const Frame fl(asym, 0.6, Frame::Mode::Floor), fr(asym, 0.6, Frame::Mode::Fractional);
  const auto H = TestFunction::gaussian_bump(0.0, 0.5);
  const double gsup = H.sup_gradient();
  auto rng = replica_stream(8, 0);
  for (int i = 0; i < 20; ++i) {
    const auto c = sample_configuration(MeasureSpec::bernoulli(0.3), L, rng);
    const double t = 0.0017 * (i + 1);
    const double diff = std::abs(fluctuation_field(c, H, fl, t, 0.3, n) - fluctuation_field(c, H, fr, t, 0.3, n));
    double mass = 0.0;
    const double s = fr.shift(t);
    for (long long x = static_cast<long long>(s) - 300; x <= static_cast<long long>(s) + 300; ++x)
      mass += std::abs(c[x] - 0.3);
    CHECK(diff <= gsup * std::pow(n, -1.5) * mass);
  }
}

TEST_CASE("stationary field variance matches sigma^2 ||H||^2") {
  const int n = 256, L = 2400;
  const auto H = TestFunction::gaussian_bump(0.0, 0.5);
  const auto m = MeasureSpec::bernoulli(0.3);
  std::vector<double> ys;
  for (int r = 0; r < 3000; ++r) {
    auto rng = replica_stream(12, static_cast<std::uint64_t>(r));
    ys.push_back(fluctuation_field(sample_configuration(m, L, rng), H, Frame::still(), 0.0, 0.3, n));
  }
  std::vector<double> sq;
  for (double y : ys) sq.push_back(y * y);
  const auto s = stats::summarize(sq);
  const double target = 0.21 * H.l2_norm() * H.l2_norm();
  CHECK(std::abs(s.mean - target) < 3.0 * s.se);
}

TEST_CASE("currents and heights") {
  const auto spec = ModelSpec::zero_range(RateFunction::linear());
  auto rng = replica_stream(6, 0);
  const auto start = sample_configuration(MeasureSpec::zrp_density(RateFunction::linear(), 1.5), 60, rng);
  KmcEngine e(spec, Asymmetry::make(1.0, 1.0, 5), start, rng);
  for (int x : {-5, 0, 7}) CHECK(current_and_height(e, x).current == 0);
  CHECK(current_and_height(e, 0).height == 0.0);
  long long below = 0;
  for (int y = 0; y < 7; ++y) below += start[y];
  CHECK(current_and_height(e, 7).height == static_cast<double>(-below));
  for (int i = 0; i < 20000; ++i) {
    e.step();
    for (int x : {0, 3, 17}) {
      long long change = 0;
      for (int y = 0; y <= x; ++y) change += e.config()[y] - start[y];
      REQUIRE(e.bond_current(-1) - e.bond_current(x) == change);
    }
  }
  const auto h = current_and_height(e, 4);
  long long s = 0;
  for (int y = 0; y < 4; ++y) s += e.config()[y];
  CHECK(h.height == static_cast<double>(e.bond_current(-1) - s));
  CHECK(current_and_height(e, 0).height == static_cast<double>(e.bond_current(-1)));
  CHECK_THROWS(current_and_height(e, 60));

  KmcEngine one(ModelSpec::simple_exclusion(), Asymmetry::make(1.0, 1.0, 1), Configuration({1, 0, 0, 0, 0}),
                replica_stream(1, 1));
  const Jump j = one.step();
  if (j.bond == 0 && j.from == 0) CHECK(current_and_height(one, 1).current == 1);
}

TEST_CASE("A-eps running sums match direct recomputation") {
  const int n = 40, L = 600;
  const auto H = TestFunction::gaussian_bump(0.0, 0.6);
  std::vector<Mollifier> ms = {Mollifier(0.4), Mollifier(0.1), Mollifier(0.1, KernelShape::FlatBump)};
  const auto asym = Asymmetry::make(1.0, 0.5, n);
  auto rng = replica_stream(2, 0);
  KmcEngine e(ModelSpec::simple_exclusion(), asym, sample_configuration(MeasureSpec::bernoulli(0.3), L, rng), rng);
  AEpsObserver obs("A", H, ms, Frame(asym, 0.8, Frame::Mode::Floor), 0.3, n);
  obs.start(e);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const Jump j = e.step();
    obs.on_jump(j, e);
    if (i % 250 == 0)
      for (std::size_t k = 0; k < ms.size(); ++k)
        worst = std::max(worst, std::abs(obs.integrand(k) - obs.direct_integrand(k, e)) /
                                    (1.0 + std::abs(obs.direct_integrand(k, e))));
  }
  CHECK(obs.shift() > 0);
  CHECK(worst < 1e-6);

  Configuration empty(std::vector<int>(L, 0));
  KmcEngine idle(ModelSpec::simple_exclusion(), asym, empty, replica_stream(0, 0));
  AEpsObserver flat("A", H, ms, Frame::still(), 0.0, n);
  flat.start(idle);
  flat.advance(1.0, idle);
  std::vector<ProbeRecord> rec;
  flat.record(1.0, idle, rec);
  for (const auto& r : rec) CHECK(r.value == 0.0);
}

TEST_CASE("A-eps translates agree with shifted test functions") {
  const int n = 40, L = 400;
  const auto asym = Asymmetry::make(1.0, 0.5, n);
  std::vector<Mollifier> ms = {Mollifier(0.3), Mollifier(0.1, KernelShape::FlatBump)};
  const std::vector<double> probes = {0.002, 0.004};
  auto run = [&](const TestFunction& H, std::vector<long long> tr) {
    auto rng = replica_stream(12, 0);
    KmcEngine e(ModelSpec::simple_exclusion(), asym, sample_configuration(MeasureSpec::bernoulli(0.5), L, rng), rng);
    AEpsObserver obs("A", H, ms, Frame::still(), 0.5, n, std::move(tr));
    std::vector<Observer*> list = {&obs};
    std::vector<ProbeRecord> out;
    run_trajectory(e, list, probes, 0, out);
    return out;
  };
  const auto base = run(TestFunction::gaussian_bump(0.0, 0.3), {0, 25, -60});
  for (long long off : {0LL, 25LL, -60LL}) {
    const auto shifted = run(TestFunction::gaussian_bump(static_cast<double>(off) / n, 0.3), {});
    const std::size_t j = off == 0 ? 0 : (off == 25 ? 1 : 2);
    for (double t : probes)
      for (int k = 0; k < 2; ++k) {
        const double direct = probe_values(shifted, "A/" + std::to_string(k), t)[0];
        const double via = probe_values(base, "A/" + std::to_string(k) + "/" + std::to_string(j), t)[0];
        CHECK(via == doctest::Approx(direct).epsilon(1e-8).scale(1e-6));
      }
  }
}
