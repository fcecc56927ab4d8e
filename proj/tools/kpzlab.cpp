// kpzlab command line: experiments from configs, raw simulation, exact diagonalization,
// SPDE solvers, Hermite tables and measure moments.

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kpzlab/config.hpp"
#include "kpzlab/exactlab.hpp"
#include "kpzlab/experiments.hpp"
#include "kpzlab/hermite.hpp"
#include "kpzlab/martingale.hpp"
#include "kpzlab/parallel.hpp"
#include "kpzlab/spde.hpp"
#include "kpzlab/stats.hpp"

namespace fs = std::filesystem;
using namespace kpzlab;

namespace {

struct Global {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> replicas;
  std::optional<std::uint64_t> first_replica;
  std::string out;
  bool debug_checks = false;
  bool quiet = false;
};

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << std::setprecision(17);
  return f;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << "\n"; }

RunConfig load(const Global& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  std::ifstream in(g.config);
  if (!in) throw ConfigError("cannot open config " + g.config);
  json doc = json::parse(in, nullptr, true, true);
  Overrides o{g.seed, g.replicas, g.first_replica, g.debug_checks};
  return parse_config(apply_overrides(std::move(doc), o), g.config);
}

void write_records(const fs::path& p, const std::vector<ProbeRecord>& recs) {
  auto f = open_out(p);
  for (const auto& r : recs)
    f << json{{"replica", r.replica}, {"t", r.t}, {"probe", r.probe_id}, {"value", r.value}}.dump() << "\n";
}

std::vector<ProbeRecord> read_records(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::vector<ProbeRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    out.push_back({j.at("replica").get<std::uint64_t>(), j.at("t").get<double>(), j.at("probe").get<std::string>(),
                   j.at("value").get<double>()});
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<ProbeSummary>& s) {
  os << std::setprecision(10) << "probe,t,count,mean,variance,se,skewness\n";
  for (const auto& p : s)
    os << p.probe_id << "," << p.t << "," << p.count << "," << p.mean << "," << p.variance << "," << p.se << ","
       << p.skewness << "\n";
}

// Float32 little-endian array plus a JSON header next to it.
void write_field(const fs::path& stem, const std::vector<std::vector<float>>& rows, json header) {
  static_assert(std::endian::native == std::endian::little, "raw field output assumes a little-endian host");
  auto f = open_out(stem.string() + ".f32");
  for (const auto& r : rows) f.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size() * sizeof(float)));
  header["dtype"] = "float32";
  header["byte_order"] = "little";
  header["shape"] = {rows.size(), rows.empty() ? 0 : rows.front().size()};
  header["data"] = stem.filename().string() + ".f32";
  write_json(stem.string() + ".json", header);
}

ModelSpec parse_model(const std::string& s) { return model_from_json(json::parse(s), "--model"); }

int cmd_run(const Global& g) {
  const auto rc = load(g);
  const std::string started = utc_timestamp();
  RunOptions opts;
  if (!g.quiet) opts.log = &std::cerr;
  const auto rep = run_experiment(rc, opts);
  for (const auto& c : rep.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  std::cout << (rep.pass() ? "PASS " : "FAIL ") << rep.title << " (" << std::fixed << std::setprecision(1) << rep.seconds
            << " s)\n";
  if (!g.out.empty()) {
    const fs::path dir(g.out);
    write_json(dir / "report.json", rep.to_json());
    write_json(dir / "manifest.json", make_manifest(rc, rc.seed, 0, 0, started, utc_timestamp()));
  }
  return rep.pass() ? 0 : 1;
}

int cmd_simulate(const Global& g) {
  const auto rc = load(g);
  const std::string started = utc_timestamp();
  const auto sim = simulate(rc);
  const auto eng = engine_from_json(rc.doc.at("engine"));
  const fs::path dir(g.out.empty() ? "." : g.out);
  write_records(dir / "records.jsonl", sim.records);
  auto csv = open_out(dir / "summary.csv");
  write_summary_csv(csv, summarize_probes(sim.records));
  auto m = make_manifest(rc, rc.seed, eng.first_replica, eng.replicas, started, utc_timestamp());
  m["events"] = sim.events;
  m["workers"] = worker_count();
  write_json(dir / "manifest.json", m);
  std::cout << sim.records.size() << " records from " << eng.replicas << " replicas, " << sim.events << " events -> "
            << dir.string() << "\n";
  return 0;
}

int cmd_analyze(const Global& g, const std::string& input) {
  const auto sums = summarize_probes(read_records(input));
  if (g.out.empty()) {
    write_summary_csv(std::cout, sums);
  } else {
    auto f = open_out(g.out);
    write_summary_csv(f, sums);
  }
  return 0;
}

struct ExactArgs {
  std::string model = R"({"family":"simple_exclusion"})";
  std::string measure = R"({"kind":"bernoulli","rho":0.5})";
  int n = 4, L = 6, ell_min = 2, ell_max = 6, k = -1;
  double a = 1.0, gamma = 1.0;
  std::vector<int> ns = {8, 12, 16, 20, 24};
  bool first_order = false;
};

int cmd_exact(const std::string& which, const ExactArgs& e, std::ostream& os) {
  const auto spec = parse_model(e.model);
  const auto measure = measure_from_json(json::parse(e.measure), spec, "--measure");
  os << std::setprecision(10);
  if (which == "stationarity" || which == "adjoint") {
    const auto asym = Asymmetry::make(e.a, e.gamma, e.n);
    os << "L,k,states,stationarity,detailed_balance,row_sum,adjoint\n";
    const int kmax = spec.exclusion() ? e.L : std::max(e.k, 4);
    for (int k = 0; k <= kmax; ++k) {
      if (e.k >= 0 && k != e.k) continue;
      const auto geo = Geometry::ring(e.L, k);
      const auto gen = ring_generator(spec, asym, measure, geo);
      os << e.L << "," << k << "," << gen.space.size() << "," << stationarity_residual(gen) << ","
         << detailed_balance_residual(gen) << "," << row_sum_residual(gen) << ","
         << adjoint_residual(spec, asym, measure, geo) << "\n";
    }
  } else if (which == "gap-scan") {
    os << "ell,k,states,gap,W,method\n";
    for (int ell = e.ell_min; ell <= e.ell_max; ++ell)
      for (int k = 0; k <= 2 * ell + 1; ++k) {
        if (e.k >= 0 && k != e.k) continue;
        const auto gr = spectral_gap(segment_generator(spec, e.n, measure, Geometry::segment(ell, k)));
        os << ell << "," << k << "," << gr.states << "," << gr.gap << "," << gr.W << "," << gr.method << "\n";
      }
  } else if (which == "ee-scan") {
    const auto f = pair_product_fn(1, 2, measure.rho);
    os << "n,error,scaled\n";
    for (const auto& r : ee_error_curve(measure, f, e.ns, e.first_order)) os << r.n << "," << r.error << "," << r.scaled << "\n";
  } else if (which == "hminus1") {
    // ||eta(0) - eta(1)||_{-1} on the canonical segment, per particle number
    os << "ell,k,states,hminus1_sq,W\n";
    for (int ell = e.ell_min; ell <= e.ell_max; ++ell)
      for (int k = 1; k <= 2 * ell; ++k) {
        if (e.k >= 0 && k != e.k) continue;
        const auto gen = segment_generator(spec, e.n, measure, Geometry::segment(ell, k));
        std::vector<double> r(gen.space.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
          const auto& s = gen.space.state(i);
          r[i] = s[static_cast<std::size_t>(ell)] - s[static_cast<std::size_t>(ell + 1)];
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) mean += gen.nu[i] * r[i];
        for (double& v : r) v -= mean;
        os << ell << "," << k << "," << gen.space.size() << "," << h_minus1_norm_sq(gen, r, e.n) << ","
           << spectral_gap(gen).W << "\n";
      }
  } else {
    throw std::invalid_argument("unknown exactlab command " + which);
  }
  return 0;
}

struct SpdeArgs {
  std::string equation = "ou";
  double length = 1.0, t_end = 1.0, phi_c1 = 1.0, phi_b = 0.5, D = 1.0, a = 1.0, sigma = 1.0, safety = 0.9;
  int points = 64, snapshots = 10;
  std::uint64_t replicas = 1;
};

int cmd_spde(const Global& g, const SpdeArgs& s) {
  const std::uint64_t seed = g.seed.value_or(1);
  const std::uint64_t R = g.replicas.value_or(s.replicas);
  const double diffusion = s.equation == "ou" ? 0.5 * s.phi_c1 : s.D;
  const auto grid = SpdeGrid::make(s.length, s.points, diffusion, s.safety);
  std::vector<double> times;
  // whole numbers of steps between snapshots keep the fixed-dt chain
  const long long steps = std::max<long long>(1, static_cast<long long>(std::llround(s.t_end / grid.dt / s.snapshots)));
  for (int k = 1; k <= s.snapshots; ++k) times.push_back(static_cast<double>(k * steps) * grid.dt);
  std::vector<std::vector<float>> rows;
  std::vector<std::vector<double>> pooled(times.size());
  const auto res = run_replicas(R, [&](std::uint64_t r) {
    auto rng = replica_stream(seed, g.first_replica.value_or(0) + r);
    if (s.equation == "ou") return ou_solve(grid, s.phi_c1, s.phi_b, std::vector<double>(static_cast<std::size_t>(s.points), 0.0), times, rng);
    if (s.equation == "she")
      return she_cole_hopf(grid, s.D, s.a, s.sigma, std::vector<double>(static_cast<std::size_t>(s.points), 1.0), times, rng).burgers;
    throw std::invalid_argument("--equation must be ou or she");
  });
  for (const auto& snaps : res)
    for (std::size_t k = 0; k < snaps.size(); ++k) {
      rows.emplace_back(snaps[k].values.begin(), snaps[k].values.end());
      pooled[k].insert(pooled[k].end(), snaps[k].values.begin(), snaps[k].values.end());
    }
  const fs::path dir(g.out.empty() ? "." : g.out);
  json header = {{"equation", s.equation},   {"length", s.length}, {"points", s.points}, {"dt", grid.dt},
                 {"times", times},           {"replicas", R},      {"seed", seed},       {"layout", "replica-major, then time, then site"},
                 {"field", s.equation == "ou" ? "Y" : "burgers (D/a) grad log z"}};
  if (s.equation == "ou") header["coefficients"] = {{"phi_c1", s.phi_c1}, {"phi_b", s.phi_b}};
  else header["coefficients"] = {{"D", s.D}, {"a", s.a}, {"sigma", s.sigma}};
  write_field(dir / "fields", rows, header);
  auto csv = open_out(dir / "moments.csv");
  csv << std::setprecision(10) << "t,mean,variance,skewness\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto sm = stats::summarize(pooled[k]);
    csv << times[k] << "," << sm.mean << "," << sm.variance << "," << (pooled[k].size() >= 3 ? stats::skewness(pooled[k]).value : 0.0) << "\n";
  }
  if (s.equation == "ou")
    std::cout << "stationary one-point variance (Lyapunov): " << ou_stationary_point_variance(grid, s.phi_c1, s.phi_b) << "\n";
  std::cout << rows.size() << " snapshots -> " << dir.string() << "\n";
  return 0;
}

int cmd_hermite(const Global& g, int Z) {
  const auto tab = l1_bound_check(Z);
  std::ostringstream os;
  os << std::setprecision(12) << "z,l1,l1_ratio,derivative_l2,eigenvalue\n";
  for (const auto& r : tab.rows)
    os << r.z << "," << r.l1 << "," << r.ratio << "," << HermiteBasis::derivative_l2_norm(r.z) << ","
       << HermiteBasis::eigenvalue(r.z) << "\n";
  if (g.out.empty()) std::cout << os.str();
  else open_out(g.out) << os.str();
  if (tab.under_resolved) std::cerr << "warning: l1 quadrature under-resolved\n";
  return 0;
}

int cmd_measures(const std::string& model, const std::string& measure_s, int n) {
  const auto spec = parse_model(model);
  const auto measure = measure_from_json(json::parse(measure_s), spec, "--measure");
  const auto cen = centering(spec, n, measure);
  json j = {{"measure", measure.describe()},
            {"model", spec.describe()},
            {"rho", measure.rho},
            {"sigma2_infinity", sigma2_infinity(measure)},
            {"phi_b", cen.phi_b},
            {"phi1_b", cen.phi1_b},
            {"phi2_b", cen.phi2_b},
            {"phi_c", cen.phi_c},
            {"phi1_c", cen.phi1_c}};
  if (measure.kind == MeasureKind::ProductZrp) j["discarded_mass"] = measure.discarded_mass;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kpzlab: weakly asymmetric gradient systems, fluctuation fields and limit equations"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--replicas", g.replicas, "replica count (overrides the config)");
  app.add_option("--first-replica", g.first_replica, "index of the first replica stream");
  app.add_option("--out", g.out, "output directory or file");
  app.add_flag("--debug-checks", g.debug_checks, "recompute engine rates from scratch periodically");
  app.add_flag("-q,--quiet", g.quiet, "no progress lines");
  app.set_version_flag("--version", code_version());

  auto* run = app.add_subcommand("run", "run the experiment named in --config and print PASS/FAIL per check");
  auto* sim = app.add_subcommand("simulate", "simulate replicas and write records.jsonl, summary.csv, manifest.json");
  std::string input;
  auto* an = app.add_subcommand("analyze", "summarize a records.jsonl file per probe and time");
  an->add_option("input", input, "records.jsonl")->required()->check(CLI::ExistingFile);

  ExactArgs ex;
  std::string exact_cmd;
  auto* exa = app.add_subcommand("exactlab", "exact generators on small rings and segments");
  exa->add_option("command", exact_cmd, "stationarity | adjoint | gap-scan | ee-scan | hminus1")
      ->required()
      ->check(CLI::IsMember({"stationarity", "adjoint", "gap-scan", "ee-scan", "hminus1"}));
  exa->add_option("--model", ex.model, "model block as JSON");
  exa->add_option("--measure", ex.measure, "measure block as JSON");
  exa->add_option("--n", ex.n, "scaling parameter n");
  exa->add_option("--L", ex.L, "ring size");
  exa->add_option("--k", ex.k, "particle number (default: all)");
  exa->add_option("--ell-min", ex.ell_min);
  exa->add_option("--ell-max", ex.ell_max);
  exa->add_option("--a", ex.a, "asymmetry a");
  exa->add_option("--gamma", ex.gamma, "asymmetry exponent")->check(CLI::Range(1e-12, 1.0));
  exa->add_option("--ns", ex.ns, "block sizes for ee-scan");
  exa->add_flag("--first-order", ex.first_order, "first-order replacement in ee-scan");

  SpdeArgs sp;
  auto* spde = app.add_subcommand("spde", "OU or stochastic heat equation (Burgers field) on a periodic grid");
  spde->add_option("--equation", sp.equation)->check(CLI::IsMember({"ou", "she"}));
  spde->add_option("--length", sp.length);
  spde->add_option("--points", sp.points);
  spde->add_option("--t-end", sp.t_end);
  spde->add_option("--snapshots", sp.snapshots);
  spde->add_option("--phi-c1", sp.phi_c1);
  spde->add_option("--phi-b", sp.phi_b);
  spde->add_option("--D", sp.D);
  spde->add_option("--a", sp.a);
  spde->add_option("--sigma", sp.sigma);
  spde->add_option("--safety", sp.safety);

  int Z = 200;
  auto* her = app.add_subcommand("hermite", "L1 norms, bound ratios and eigenvalues as CSV");
  her->add_option("--max-z", Z)->check(CLI::Range(0, 5000));

  std::string mmodel = R"({"family":"simple_exclusion"})", mmeasure = R"({"kind":"bernoulli","rho":0.5})";
  int mn = 1;
  auto* mea = app.add_subcommand("measures", "density, sigma^2 and tilted means of b and c");
  mea->add_option("--model", mmodel);
  mea->add_option("--measure", mmeasure);
  mea->add_option("--n", mn);

  for (auto* sub : {run, sim, an, exa, spde, her, mea}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(g);
    if (*sim) return cmd_simulate(g);
    if (*an) return cmd_analyze(g, input);
    if (*exa) {
      if (g.out.empty()) return cmd_exact(exact_cmd, ex, std::cout);
      auto f = open_out(g.out);
      return cmd_exact(exact_cmd, ex, f);
    }
    if (*spde) return cmd_spde(g, sp);
    if (*her) return cmd_hermite(g, Z);
    if (*mea) return cmd_measures(mmodel, mmeasure, mn);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
