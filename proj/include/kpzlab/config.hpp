#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpzlab/fields.hpp"
#include "kpzlab/measures.hpp"
#include "kpzlab/model.hpp"

namespace kpzlab {

using json = nlohmann::json;

// Schema error with the json path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Typed reads from one json object that remember which keys were used; finish() rejects keys
// nobody asked for, which catches typos in configs.
class Fields {
 public:
  Fields(const json& obj, std::string path);

  bool has(const std::string& key) const { return obj_.contains(key); }
  double number(const std::string& key, double lo, double hi);
  double number(const std::string& key, double fallback, double lo, double hi);
  long long integer(const std::string& key, long long lo, long long hi);
  long long integer(const std::string& key, long long fallback, long long lo, long long hi);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key);
  std::string string(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback);
  std::vector<int> integers(const std::string& key, std::vector<int> fallback);
  const json& object(const std::string& key);
  const json& array(const std::string& key);
  void finish() const;
  const std::string& path() const noexcept { return path_; }

 private:
  const json& get(const std::string& key, json::value_t type, const char* what);
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

// {"family": "simple_exclusion" | "zero_range" | "kclg" | "speed_change", ...}
ModelSpec model_from_json(const json& j, const std::string& path = "model");
// {"kind": "bernoulli" | "zero_range" | "markov_gibbs", "rho": ..., ...}; zero-range takes its g
// from the model unless "g" is given.
MeasureSpec measure_from_json(const json& j, const ModelSpec& model, const std::string& path = "measure");
RateFunction rate_from_json(const json& j, const std::string& path);
TestFunction test_function_from_json(const json& j, const std::string& path);

struct EngineBlock {
  int n = 64;
  int L = 0;
  double a = 0.0;
  double gamma = 1.0;
  std::vector<double> probes;
  std::uint64_t replicas = 1;
  std::uint64_t first_replica = 0;
  bool debug_checks = false;
};
EngineBlock engine_from_json(const json& j, const std::string& path = "engine");

struct RunConfig {
  json doc;
  std::string source;
  std::uint64_t hash = 0;
  std::string experiment;
  std::uint64_t seed = 1;
};

// Hash of the canonical dump (object keys sorted), so key order does not matter.
std::uint64_t config_hash(const json& doc);
RunConfig parse_config(json doc, std::string source = "<inline>");
RunConfig load_config(const std::string& path);

// Command line overrides applied to the document before parsing.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> replicas;
  std::optional<std::uint64_t> first_replica;
  bool debug_checks = false;
};
json apply_overrides(json doc, const Overrides& o);

std::string code_version();
std::string hex64(std::uint64_t v);

// Seeds, hash, version, host and timestamps of a run.
json make_manifest(const RunConfig& config, std::uint64_t seed, std::uint64_t first_replica, std::uint64_t replicas,
                   const std::string& started, const std::string& finished);
std::string utc_timestamp();

}  // namespace kpzlab
