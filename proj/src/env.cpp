#include "v2v/env.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace v2v::env {

namespace {

double clamp_band(double p, const SimConfig& cfg) {
  return std::clamp(p, cfg.price_min, cfg.price_max);
}

EVAgent sample_agent(FleetState& state, const SimConfig& cfg) {
  EVAgent a;
  a.id = state.next_id++;
  a.capacity_kwh = cfg.capacity_kwh;
  a.entry_step = state.step;
  a.duration_steps = state.rng.uniform_int(cfg.duration_min, cfg.duration_max);
  a.battery_kwh = state.rng.uniform(cfg.soc0_min, cfg.soc0_max) * cfg.capacity_kwh;
  a.need_kwh = state.rng.uniform(cfg.need_min, cfg.need_max) * cfg.capacity_kwh;
  a.base_urgency = state.rng.uniform(cfg.u_base_min, cfg.u_base_max);
  a.rho = state.rng.uniform(0.0, 1.0);
  a.buffer_kwh = cfg.buffer_frac * cfg.capacity_kwh;
  a.max_power_kw = cfg.max_power_kw;
  a.last_price = 0.0;
  return a;
}

}  // namespace

Eigen::VectorXd Observation::to_vector() const {
  Eigen::VectorXd v(kObsDim);
  v << battery01, deficit01, avail01, urgency01, remaining01, last_price01, role_onehot[0],
      role_onehot[1], role_onehot[2];
  return v;
}

const EVAgent* FleetState::find(int id) const {
  for (const EVAgent& a : agents) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

FleetState make_initial_fleet(const SimConfig& cfg, uint64_t seed) {
  FleetState state(seed);
  state.agents.reserve(static_cast<size_t>(cfg.population_cap()));
  for (int i = 0; i < cfg.n_target; ++i) {
    state.agents.push_back(sample_agent(state, cfg));
  }
  return state;
}

void step_arrivals_departures(FleetState& state, const SimConfig& cfg) {
  std::erase_if(state.agents, [&](const EVAgent& a) {
    return state.step >= a.entry_step + a.duration_steps;
  });
  // The Poisson draw always happens so the stream stays aligned; only
  // admission is limited by the population cap.
  const int drawn = state.rng.poisson(cfg.arrival_rate());
  const int space = cfg.population_cap() - static_cast<int>(state.agents.size());
  const int admitted = std::min(drawn, std::max(space, 0));
  for (int k = 0; k < admitted; ++k) {
    state.agents.push_back(sample_agent(state, cfg));
  }
}

int remaining_steps(const EVAgent& a, int step) {
  return std::max(a.entry_step + a.duration_steps - step, 0);
}

double urgency(const EVAgent& a, int step, double lambda_time) {
  const double frac = static_cast<double>(remaining_steps(a, step)) /
                      static_cast<double>(a.duration_steps);
  return a.base_urgency + lambda_time * (1.0 - frac);
}

double buyer_valuation(const EVAgent& a, int step, const ValuationParams& vp,
                       const SimConfig& cfg) {
  const double v = vp.v_base_buy + vp.beta_urgency * urgency(a, step, vp.lambda_time) +
                   vp.gamma_opportunity * deficit(a) / a.capacity_kwh;
  return clamp_band(v, cfg);
}

double seller_cost(const EVAgent& a, int step, const ValuationParams& vp, const SimConfig& cfg) {
  (void)step;
  const double c = vp.c_base_sell - vp.v_battery * avail(a) / a.capacity_kwh +
                   vp.c_grid * a.rho + vp.delta_degrad;
  return clamp_band(c, cfg);
}

Observation observe(const EVAgent& a, int step, const SimConfig& cfg, const ValuationParams& vp) {
  Observation o;
  o.battery01 = a.battery_kwh / a.capacity_kwh;
  o.deficit01 = deficit(a) / a.capacity_kwh;
  o.avail01 = avail(a) / a.capacity_kwh;
  o.urgency01 = urgency(a, step, vp.lambda_time) / (a.base_urgency + vp.lambda_time);
  o.remaining01 = static_cast<double>(remaining_steps(a, step)) /
                  static_cast<double>(a.duration_steps);
  o.last_price01 = a.last_price / cfg.price_max;
  switch (classify_role(a)) {
    case Role::Buyer: o.role_onehot = {1.0, 0.0, 0.0}; break;
    case Role::Seller: o.role_onehot = {0.0, 1.0, 0.0}; break;
    case Role::Neutral: o.role_onehot = {0.0, 0.0, 1.0}; break;
  }
  return o;
}

void apply_trades(FleetState& state, const clearing::ClearingResult& result,
                  const SimConfig& cfg) {
  struct Flow {
    double bought = 0.0;
    double sold = 0.0;
    double price_volume = 0.0;
    double volume = 0.0;
  };
  std::map<int, Flow> flows;
  for (const clearing::Trade& t : result.trades) {
    flows[t.buyer_id].bought += t.quantity_kwh;
    flows[t.buyer_id].price_volume += t.price * t.quantity_kwh;
    flows[t.buyer_id].volume += t.quantity_kwh;
    flows[t.seller_id].sold += t.quantity_kwh;
    flows[t.seller_id].price_volume += t.price * t.quantity_kwh;
    flows[t.seller_id].volume += t.quantity_kwh;
  }

  constexpr double slack = 1e-6;  // solver tolerance on battery bounds
  for (EVAgent& a : state.agents) {
    const auto it = flows.find(a.id);
    if (it == flows.end()) continue;
    const Flow& f = it->second;
    const double next = a.battery_kwh + cfg.eta * f.bought - f.sold;
    if (next < -slack || next > a.capacity_kwh + slack) {
      throw InfeasibleResult("battery bound violated for agent " + std::to_string(a.id));
    }
    a.battery_kwh = std::clamp(next, 0.0, a.capacity_kwh);
    if (f.volume > 0.0) a.last_price = f.price_volume / f.volume;
  }
  ++state.step;
}

}  // namespace v2v::env
