#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpzlab/kmc.hpp"

namespace kpzlab {

struct ProbeRecord {
  std::uint64_t replica = 0;
  double t = 0.0;
  std::string probe_id;
  double value = 0.0;
};

// Trajectory functional. Time integrals are accumulated event-exactly: between events every
// integrand is constant, so an observer integrates its cached integrand up to the event time
// and only then folds the jump in.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void start(const KmcEngine& engine) = 0;
  virtual void on_jump(const Jump&, const KmcEngine&) {}
  virtual void advance(double, const KmcEngine&) {}
  virtual void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) = 0;
  virtual bool tracks_events() const { return false; }
};

// Runs the engine through strictly increasing probe times (a probe at 0 records the initial
// state) and lets every observer record at each of them.
void run_trajectory(KmcEngine& engine, std::span<Observer* const> observers, std::span<const double> probe_times,
                    std::uint64_t replica, std::vector<ProbeRecord>& out);

// Values of one probe id over a record set, in record order.
std::vector<double> probe_values(std::span<const ProbeRecord> records, const std::string& id, double t);

}  // namespace kpzlab
