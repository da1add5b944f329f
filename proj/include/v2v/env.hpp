#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "v2v/clearing.hpp"
#include "v2v/domain.hpp"
#include "v2v/rng.hpp"

namespace v2v::env {

struct InfeasibleResult : std::runtime_error {
  explicit InfeasibleResult(const std::string& what) : std::runtime_error(what) {}
};

// Normalized local state of one agent: six scalars plus the role one-hot,
// every component in [0, 1].
inline constexpr int kObsDim = 9;

struct Observation {
  double battery01 = 0.0;     // battery / capacity
  double deficit01 = 0.0;     // deficit / capacity
  double avail01 = 0.0;       // avail / capacity
  double urgency01 = 0.0;     // urgency / (base_urgency + lambda_time)
  double remaining01 = 0.0;   // remaining steps / duration
  double last_price01 = 0.0;  // last trade price / price_max, 0 before first trade
  std::array<double, 3> role_onehot{0.0, 0.0, 0.0};  // buyer, seller, neutral

  Eigen::VectorXd to_vector() const;
};

// The fleet currently parked at the station. Agents stay sorted by id
// (ids are issued in arrival order). Single-writer; independent episodes
// run on separate instances with their own generator state.
struct FleetState {
  int step = 0;
  std::vector<EVAgent> agents;
  Rng rng;
  int next_id = 0;

  explicit FleetState(uint64_t seed) : rng(seed) {}
  const EVAgent* find(int id) const;
};

// Fleet seeded with n_target freshly sampled agents at step 0.
FleetState make_initial_fleet(const SimConfig& cfg, uint64_t seed);

// Removes agents whose parking window has ended and admits a Poisson
// number of arrivals (capped so the population never exceeds
// cfg.population_cap()). Call at the start of each timestep.
void step_arrivals_departures(FleetState& state, const SimConfig& cfg);

int remaining_steps(const EVAgent& a, int step);

// u = u_base + lambda_time * (1 - remaining/duration); nondecreasing over
// the parking window.
double urgency(const EVAgent& a, int step, double lambda_time);

// Buyer willingness to pay / seller reservation price, clamped into the
// configured V2V band.
double buyer_valuation(const EVAgent& a, int step, const ValuationParams& vp,
                       const SimConfig& cfg);
double seller_cost(const EVAgent& a, int step, const ValuationParams& vp, const SimConfig& cfg);

Observation observe(const EVAgent& a, int step, const SimConfig& cfg, const ValuationParams& vp);

// Applies cleared trades to batteries (buyers gain eta * received energy,
// sellers lose the discharged energy), refreshes last_price as the
// volume-weighted price of this step's trades, and advances the step
// counter. Throws InfeasibleResult if an update would leave
// [0, capacity] by more than solver tolerance.
void apply_trades(FleetState& state, const clearing::ClearingResult& result,
                  const SimConfig& cfg);

}  // namespace v2v::env
