#pragma once

namespace v2v {

// Epsilon for boundary comparisons on energies and prices. The allocation
// solver returns approximate solutions, so exact comparisons are unsafe.
inline constexpr double kEps = 1e-9;

enum class Role { Buyer, Seller, Neutral };

const char* to_string(Role r);

// One vehicle parked at the station: battery state, schedule and the
// private parameters that drive its valuation.
struct EVAgent {
  int id = 0;
  double battery_kwh = 0.0;    // B_i(t), 0 <= B <= capacity
  double capacity_kwh = 75.0;  // B^max
  double need_kwh = 50.0;      // target charge on departure
  double buffer_kwh = 3.75;    // safety margin above need before selling
  double max_power_kw = 11.0;  // charge/discharge power limit
  int entry_step = 0;
  int duration_steps = 1;      // total parking duration in timesteps
  double base_urgency = 0.2;
  double rho = 0.0;            // grid-arbitrage factor, U(0,1)
  double last_price = 0.0;     // volume-weighted price of the most recent
                               // step in which the agent traded; 0 before
                               // the first trade
};

// Coefficients of the buyer willingness-to-pay and seller reservation
// price models. All nonnegative; resulting valuations are clamped into
// the configured V2V price band.
struct ValuationParams {
  double v_base_buy = 0.20;
  double beta_urgency = 0.10;
  double gamma_opportunity = 0.15;
  double c_base_sell = 0.12;
  double v_battery = 0.05;
  double c_grid = 0.28;
  double delta_degrad = 0.02;
  double lambda_time = 0.5;  // urgency growth over the parking window
};

// An agent's submitted price-quantity action for one timestep, after role
// masking (Neutral => quantity 0; Buyer bounded by deficit; Seller by
// available surplus).
struct Offer {
  int agent_id = 0;
  Role role = Role::Neutral;
  double price = 0.0;     // currency/kWh, inside the configured band
  double quantity = 0.0;  // kWh, >= 0
};

// Simulation-wide settings. Arrivals follow a Poisson process with rate
// n_target/8 per timestep, which keeps the population near n_target for
// the U(4,12)-step parking durations.
struct SimConfig {
  double dt_hours = 0.5;
  double eta = 0.95;        // charging efficiency, (0,1]
  double price_min = 0.05;  // V2V band lower edge, currency/kWh
  double price_max = 0.50;
  double grid_price = 0.28;
  int duration_min = 4;  // timesteps
  int duration_max = 12;
  double soc0_min = 0.2;  // initial SoC as fraction of capacity
  double soc0_max = 0.9;
  double need_min = 0.5;  // target charge as fraction of capacity
  double need_max = 0.95;
  int n_target = 20;
  double capacity_kwh = 75.0;
  double buffer_frac = 0.05;  // buffer_kwh = buffer_frac * capacity
  double max_power_kw = 11.0;
  double u_base_min = 0.1;
  double u_base_max = 0.3;

  double arrival_rate() const { return static_cast<double>(n_target) / 8.0; }
  // Hard cap on population so arrivals cannot grow memory unboundedly.
  int population_cap() const { return 2 * n_target; }
  double band_width() const { return price_max - price_min; }
};

// Buyer iff B < need, Seller iff B > need + buffer, else Neutral.
// Ties at the boundaries resolve to Neutral.
Role classify_role(const EVAgent& a);

// Energy shortage relative to the target; 0 unless the agent is a Buyer.
double deficit(const EVAgent& a);

// Sellable surplus above need + buffer; 0 unless the agent is a Seller.
double avail(const EVAgent& a);

}  // namespace v2v
