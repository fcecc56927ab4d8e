#include <cmath>
#include <vector>

#include "doctest.h"
#include "kpzlab/config.hpp"
#include "kpzlab/experiments.hpp"
#include "kpzlab/parallel.hpp"
#include "kpzlab/stats.hpp"

using namespace kpzlab;

namespace {

json small_run() {
  return json::parse(R"({
    "experiment": "simulate", "seed": 17,
    "model": {"family": "simple_exclusion"},
    "measure": {"kind": "bernoulli", "rho": 0.5},
    "engine": {"n": 16, "L": 64, "a": 1.0, "gamma": 0.5, "probes": [0.0, 0.05], "replicas": 8},
    "analysis": {"test_functions": [{"kind": "gaussian", "width": 0.1}], "frame": "floor", "currents": [3], "decomposition": true}
  })");
}

}  // namespace

TEST_CASE("config hash ignores key order") {
  const json a = json::parse(R"({"x": 1, "y": {"b": 2, "a": [1, 2]}})");
  const json b = json::parse(R"({"y": {"a": [1, 2], "b": 2}, "x": 1})");
  CHECK(config_hash(a) == config_hash(b));
  const json c = json::parse(R"({"y": {"a": [2, 1], "b": 2}, "x": 1})");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("schema errors") {
  auto doc = small_run();
  doc["engine"]["gamma"] = 1.5;
  CHECK_THROWS_WITH_AS(simulate(parse_config(doc)), doctest::Contains("outside (0, 1]"), ConfigError);
  doc = small_run();
  doc["engine"]["replcas"] = 3;
  CHECK_THROWS_WITH_AS(simulate(parse_config(doc)), doctest::Contains("unknown key"), ConfigError);
  doc = small_run();
  doc["measure"] = {{"kind", "zero_range"}, {"rho", 1.0}};
  CHECK_THROWS_AS(simulate(parse_config(doc)), ConfigError);
  doc = small_run();
  doc["bogus"] = 1;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
  doc = small_run();
  doc["experiment"] = "nope";
  CHECK_THROWS_AS(run_experiment(parse_config(doc)), ConfigError);
}

TEST_CASE("replica splitting is independent of batching and workers") {
  const auto all = simulate(parse_config(small_run()));
  std::vector<ProbeRecord> pieces;
  for (std::uint64_t r = 0; r < 8; ++r) {
    Overrides o;
    o.replicas = 1;
    o.first_replica = r;
    const auto one = simulate(parse_config(apply_overrides(small_run(), o)));
    pieces.insert(pieces.end(), one.records.begin(), one.records.end());
  }
  REQUIRE(pieces.size() == all.records.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    CHECK(pieces[i].replica == all.records[i].replica);
    CHECK(pieces[i].probe_id == all.records[i].probe_id);
    CHECK(pieces[i].value == all.records[i].value);
  }
  const auto a = summarize_probes(all.records), b = summarize_probes(pieces);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean == b[i].mean);
    CHECK(a[i].variance == b[i].variance);
  }
  // a second run reproduces every record exactly
  const auto again = simulate(parse_config(small_run()));
  REQUIRE(again.records.size() == all.records.size());
  for (std::size_t i = 0; i < again.records.size(); ++i) CHECK(again.records[i].value == all.records[i].value);
}

TEST_CASE("manifest carries the hash and replica keys") {
  const auto rc = parse_config(small_run());
  const auto m = make_manifest(rc, 17, 2, 3, "a", "b");
  CHECK(m["config_hash"] == hex64(config_hash(rc.doc)));
  REQUIRE(m["replica_keys"].size() == 3);
  CHECK(m["replica_keys"][0] == hex64(replica_key(17, 2)));
}

TEST_CASE("pooled skewness") {
  // independent groups: close to the plain estimate, and the jackknife error is finite
  auto rng = replica_stream(3, 0);
  std::vector<std::vector<double>> groups(200);
  std::vector<double> flat;
  for (auto& g : groups)
    for (int i = 0; i < 10; ++i) {
      const double e = rng.exponential(1.0);
      g.push_back(e);
      flat.push_back(e);
    }
  const auto p = stats::pooled_skewness(groups);
  CHECK(p.value == doctest::Approx(stats::skewness(flat).value).epsilon(0.01));
  CHECK(std::abs(p.value - 2.0) < 4.0 * p.se);
  CHECK(p.se > 0.0);
}

TEST_CASE("replica results come back in replica order for any worker count") {
  auto fn = [](std::uint64_t r) {
    auto rng = replica_stream(9, r);
    double s = 0.0;
    for (int i = 0; i < 1000; ++i) s += rng.normal();
    return s;
  };
  const auto one = run_replicas(12, fn, 1), three = run_replicas(12, fn, 3);
  CHECK(one == three);
}
