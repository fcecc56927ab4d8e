#include "kpzlab/observe.hpp"

#include <cmath>
#include <stdexcept>

namespace kpzlab {

void run_trajectory(KmcEngine& engine, std::span<Observer* const> observers, std::span<const double> probe_times,
                    std::uint64_t replica, std::vector<ProbeRecord>& out) {
  for (std::size_t i = 1; i < probe_times.size(); ++i)
    if (!(probe_times[i] > probe_times[i - 1])) throw std::invalid_argument("probe times must be strictly increasing");
  if (!probe_times.empty() && probe_times.front() < engine.time())
    throw std::invalid_argument("probe time before the engine clock");

  std::vector<Observer*> active;
  for (Observer* o : observers) {
    o->start(engine);
    if (o->tracks_events()) active.push_back(o);
  }
  for (double tp : probe_times) {
    while (auto jump = engine.step_until(tp))
      for (Observer* o : active) o->on_jump(*jump, engine);
    for (Observer* o : observers) o->advance(tp, engine);
    const std::size_t first = out.size();
    for (Observer* o : observers) o->record(tp, engine, out);
    for (std::size_t i = first; i < out.size(); ++i) out[i].replica = replica;
  }
}

std::vector<double> probe_values(std::span<const ProbeRecord> records, const std::string& id, double t) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.probe_id == id && std::abs(r.t - t) <= 1e-12 * (1.0 + std::abs(t))) v.push_back(r.value);
  return v;
}

}  // namespace kpzlab
