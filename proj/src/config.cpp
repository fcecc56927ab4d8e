#include "kpzlab/config.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <sys/utsname.h>

#ifndef KPZLAB_VERSION
#define KPZLAB_VERSION "0.0.0"
#endif

namespace kpzlab {

namespace {

const char* type_name(json::value_t t) {
  switch (t) {
    case json::value_t::number_float: return "number";
    case json::value_t::number_integer: return "integer";
    case json::value_t::boolean: return "boolean";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "object";
    default: return "value";
  }
}

bool matches(const json& v, json::value_t t) {
  if (t == json::value_t::number_float) return v.is_number();
  if (t == json::value_t::number_integer) return v.is_number_integer();
  return v.type() == t;
}

}  // namespace

Fields::Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
  if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
}

const json& Fields::get(const std::string& key, json::value_t type, const char* what) {
  used_.insert(key);
  if (!obj_.contains(key)) throw ConfigError(path_ + "." + key + ": missing required " + what);
  const json& v = obj_.at(key);
  if (!matches(v, type)) throw ConfigError(path_ + "." + key + ": expected " + type_name(type));
  return v;
}

double Fields::number(const std::string& key, double lo, double hi) {
  const double v = get(key, json::value_t::number_float, "number").get<double>();
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << path_ << "." << key << " = " << v << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
  return v;
}

double Fields::number(const std::string& key, double fallback, double lo, double hi) {
  used_.insert(key);
  return obj_.contains(key) ? number(key, lo, hi) : fallback;
}

long long Fields::integer(const std::string& key, long long lo, long long hi) {
  const long long v = get(key, json::value_t::number_integer, "integer").get<long long>();
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << path_ << "." << key << " = " << v << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
  return v;
}

long long Fields::integer(const std::string& key, long long fallback, long long lo, long long hi) {
  used_.insert(key);
  return obj_.contains(key) ? integer(key, lo, hi) : fallback;
}

bool Fields::boolean(const std::string& key, bool fallback) {
  used_.insert(key);
  if (!obj_.contains(key)) return fallback;
  return get(key, json::value_t::boolean, "boolean").get<bool>();
}

std::string Fields::string(const std::string& key) { return get(key, json::value_t::string, "string").get<std::string>(); }

std::string Fields::string(const std::string& key, const std::string& fallback) {
  used_.insert(key);
  return obj_.contains(key) ? string(key) : fallback;
}

std::vector<double> Fields::numbers(const std::string& key) {
  const json& a = get(key, json::value_t::array, "array");
  std::vector<double> out;
  for (const auto& v : a) {
    if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<double> Fields::numbers(const std::string& key, std::vector<double> fallback) {
  used_.insert(key);
  return obj_.contains(key) ? numbers(key) : fallback;
}

std::vector<int> Fields::integers(const std::string& key, std::vector<int> fallback) {
  used_.insert(key);
  if (!obj_.contains(key)) return fallback;
  const json& a = get(key, json::value_t::array, "array");
  std::vector<int> out;
  for (const auto& v : a) {
    if (!v.is_number_integer()) throw ConfigError(path_ + "." + key + ": expected an array of integers");
    out.push_back(v.get<int>());
  }
  return out;
}

const json& Fields::object(const std::string& key) { return get(key, json::value_t::object, "object"); }
const json& Fields::array(const std::string& key) { return get(key, json::value_t::array, "array"); }

void Fields::finish() const {
  for (const auto& [k, v] : obj_.items())
    if (!used_.count(k)) throw ConfigError(path_ + "." + k + ": unknown key");
}

RateFunction rate_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.string("kind");
  RateFunction g;
  if (kind == "linear") {
    g = RateFunction::linear();
  } else if (kind == "constant") {
    g = RateFunction::constant();
  } else if (kind == "affine") {
    const double slope = f.number("slope", 0.0, 1e6);
    const double offset = f.number("offset", 0.0, 1e6);
    g = RateFunction::affine(slope, offset);
  } else if (kind == "table") {
    g = RateFunction::tabulated(f.numbers("values"));
  } else {
    throw ConfigError(path + ".kind: unknown rate function '" + kind + "'");
  }
  f.finish();
  return g;
}

ModelSpec model_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string fam = f.string("family");
  ModelSpec spec;
  try {
    if (fam == "simple_exclusion") {
      spec = ModelSpec::simple_exclusion();
    } else if (fam == "zero_range") {
      spec = ModelSpec::zero_range(rate_from_json(f.object("g"), path + ".g"));
    } else if (fam == "kclg") {
      const int m = static_cast<int>(f.integer("m", 2, 1, 8));
      spec = ModelSpec::kclg(m, f.number("theta", 1.0, 0.0, 1e6));
    } else if (fam == "speed_change") {
      const double beta = f.number("beta", 0.0, -50.0, 50.0);
      std::array<double, 4> alpha{std::exp(beta) - 1.0, std::exp(beta), 1.0, 2.0};
      if (f.has("alpha")) {
        const auto v = f.numbers("alpha");
        if (v.size() != 4) throw ConfigError(path + ".alpha: expected 4 numbers");
        std::copy(v.begin(), v.end(), alpha.begin());
      }
      spec = ModelSpec::speed_change(beta, alpha);
    } else {
      throw ConfigError(path + ".family: unknown family '" + fam + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  f.finish();
  return spec;
}

MeasureSpec measure_from_json(const json& j, const ModelSpec& model, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.string("kind");
  MeasureSpec m;
  try {
    if (kind == "bernoulli") {
      m = MeasureSpec::bernoulli(f.number("rho", 0.0, 1.0));
    } else if (kind == "zero_range") {
      RateFunction g = f.has("g") ? rate_from_json(f.object("g"), path + ".g") : model.g;
      if (!g.valid()) throw ConfigError(path + ": zero-range measure needs g (from the model or the block)");
      if (f.has("alpha"))
        m = MeasureSpec::zrp_fugacity(g, f.number("alpha", 0.0, 1e6));
      else
        m = MeasureSpec::zrp_density(g, f.number("rho", 0.0, 1e6));
    } else if (kind == "markov_gibbs") {
      const double beta = f.number("beta", -50.0, 50.0);
      if (f.has("lambda"))
        m = MeasureSpec::markov_gibbs(beta, f.number("lambda", -50.0, 50.0));
      else
        m = MeasureSpec::markov_gibbs_density(beta, f.number("rho", 0.0, 1.0));
    } else {
      throw ConfigError(path + ".kind: unknown measure '" + kind + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  f.finish();
  if (model.exclusion() == (m.kind == MeasureKind::ProductZrp))
    throw ConfigError(path + ": measure " + m.describe() + " does not fit model " + model.describe());
  return m;
}

TestFunction test_function_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.string("kind");
  const double center = f.number("center", 0.0, -1e6, 1e6);
  const double amp = f.number("amplitude", 1.0, -1e6, 1e6);
  TestFunction H = TestFunction::gaussian_bump(0.0, 1.0);
  if (kind == "gaussian") {
    H = TestFunction::gaussian_bump(center, f.number("width", 1e-6, 1e6), amp);
  } else if (kind == "hermite") {
    const int z = static_cast<int>(f.integer("z", 0, 400));
    H = TestFunction::hermite(z, center, f.number("scale", 1.0, 1e-6, 1e6), amp);
  } else {
    throw ConfigError(path + ".kind: unknown test function '" + kind + "'");
  }
  f.finish();
  return H;
}

EngineBlock engine_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  EngineBlock e;
  e.n = static_cast<int>(f.integer("n", 1, 1 << 20));
  e.L = static_cast<int>(f.integer("L", 2, 1 << 26));
  e.a = f.number("a", 0.0, -1e6, 1e6);
  e.gamma = f.number("gamma", 1.0, -1e6, 1e6);
  if (!(e.gamma > 0.0 && e.gamma <= 1.0)) {
    std::ostringstream os;
    os << path << ".gamma = " << e.gamma << " outside (0, 1]";
    throw ConfigError(os.str());
  }
  e.probes = f.numbers("probes");
  for (std::size_t i = 0; i < e.probes.size(); ++i)
    if (e.probes[i] < 0.0 || (i > 0 && e.probes[i] <= e.probes[i - 1]))
      throw ConfigError(path + ".probes: must be nonnegative and strictly increasing");
  e.replicas = static_cast<std::uint64_t>(f.integer("replicas", 1, 1, 1LL << 40));
  e.first_replica = static_cast<std::uint64_t>(f.integer("first_replica", 0, 0, 1LL << 40));
  e.debug_checks = f.boolean("debug_checks", false);
  f.finish();
  try {
    Asymmetry::make(e.a, e.gamma, e.n);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return e;
}

std::uint64_t config_hash(const json& doc) {
  // FNV-1a, 64 bit
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig parse_config(json doc, std::string source) {
  if (!doc.is_object()) throw ConfigError(source + ": top level must be an object");
  RunConfig rc;
  Fields top(doc, "config");
  rc.experiment = top.string("experiment");
  rc.seed = static_cast<std::uint64_t>(top.integer("seed", 1, 0, std::numeric_limits<long long>::max()));
  rc.hash = config_hash(doc);
  rc.doc = std::move(doc);
  rc.source = std::move(source);
  // blocks are validated by the experiment that reads them
  static const std::set<std::string> known = {"experiment", "seed", "model",  "measure",   "engine",     "analysis",
                                              "output",     "params", "title", "criterion", "description"};
  for (const auto& [k, v] : rc.doc.items())
    if (!known.count(k)) throw ConfigError(rc.source + ": unknown top-level key '" + k + "'");
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(std::move(doc), path);
}

json apply_overrides(json doc, const Overrides& o) {
  if (o.seed) doc["seed"] = *o.seed;
  const char* block = doc.contains("engine") ? "engine" : "params";
  if (o.replicas) {
    json& slot = doc[block]["replicas"];
    if (slot.is_array())
      for (auto& v : slot) v = *o.replicas;  // one entry per system size
    else
      slot = *o.replicas;
  }
  if (o.first_replica) doc[block]["first_replica"] = *o.first_replica;
  if (o.debug_checks && doc.contains("engine")) doc["engine"]["debug_checks"] = true;
  return doc;
}

std::string code_version() { return KPZLAB_VERSION; }

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json make_manifest(const RunConfig& config, std::uint64_t seed, std::uint64_t first_replica, std::uint64_t replicas,
                   const std::string& started, const std::string& finished) {
  json m;
  m["config_source"] = config.source;
  m["config_hash"] = hex64(config_hash(config.doc));
  m["config"] = config.doc;
  m["experiment"] = config.experiment;
  m["master_seed"] = seed;
  m["first_replica"] = first_replica;
  m["replicas"] = replicas;
  // per-replica stream keys, so any single replica can be rerun on its own
  json keys = json::array();
  const std::uint64_t shown = std::min<std::uint64_t>(replicas, 4096);
  for (std::uint64_t r = first_replica; r < first_replica + shown; ++r) keys.push_back(hex64(replica_key(seed, r)));
  m["replica_keys"] = keys;
  if (shown < replicas) m["replica_keys_truncated"] = true;
  m["rng"] = "splitmix64 counter stream, key = mix64(mix64(seed ^ 0x6a09e667f3bcc909) + (replica + 1) * gamma)";
  m["code_version"] = code_version();
  m["started"] = started;
  m["finished"] = finished;
  utsname u{};
  if (uname(&u) == 0) m["host"] = {{"name", u.nodename}, {"system", u.sysname}, {"release", u.release}, {"machine", u.machine}};
  return m;
}

}  // namespace kpzlab
