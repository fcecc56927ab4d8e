// One PASS/FAIL line per acceptance criterion, each driven by its shipped config.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

#include "kpzlab/config.hpp"
#include "kpzlab/experiments.hpp"

namespace fs = std::filesystem;
using namespace kpzlab;

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const char* env = std::getenv("KPZLAB_CONFIG_DIR");
  const fs::path dir = env ? env : KPZLAB_CONFIG_DIR;

  std::map<int, fs::path> configs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    const auto rc = load_config(e.path().string());
    const int c = rc.doc.value("criterion", 0);
    if (c > 0) configs[c] = e.path();
  }

  RunOptions opts;
  const bool verbose = std::getenv("KPZLAB_VERBOSE") != nullptr;
  if (verbose) opts.log = &std::cerr;
  int failed = 0, ran = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [crit, path] : configs) {
    if (!only.empty() && !only.count(crit)) continue;
    ++ran;
    Report rep;
    const auto rc = load_config(path.string());
    try {
      rep = run_experiment(rc, opts);
    } catch (const std::exception& e) {
      rep.title = rc.doc.value("title", rc.experiment);
      rep.checks.push_back({"run", false, std::string("exception: ") + e.what()});
    }
    const bool ok = rep.pass();
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << crit << ": " << rep.title << " [" << path.filename().string()
              << ", " << std::fixed << std::setprecision(1) << rep.seconds << " s]\n";
    for (const auto& c : rep.checks) std::cout << "    " << (c.pass ? "ok   " : "FAIL ") << c.name << ": " << c.detail << "\n";
    for (const auto& n : rep.notes) std::cout << "    note " << n << "\n";
    std::cout.flush();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (ran - failed) << "/" << ran << " criteria passed in " << std::fixed << std::setprecision(1) << secs << " s\n";
  return failed == 0 && ran > 0 ? 0 : 1;
}
