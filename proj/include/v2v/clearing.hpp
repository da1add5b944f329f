#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2v/domain.hpp"
#include "v2v/rng.hpp"

namespace v2v::clearing {

struct InfeasiblePair : std::runtime_error {
  InfeasiblePair() : std::runtime_error("bid below ask: pair is infeasible") {}
};

// Trades below this volume are dropped as solver dust.
inline constexpr double kTradeDust = 1e-6;  // kWh

enum class Mechanism { Nash, GreedyAvg, DoubleAuction, LearningOnly };

const char* to_string(Mechanism m);
Mechanism mechanism_from_string(const std::string& s);

struct Trade {
  int buyer_id = 0;
  int seller_id = 0;
  double quantity_kwh = 0.0;
  double price = 0.0;  // currency/kWh, within [ask, bid] of the pair
};

// Outcome of one clearing round. Utilities are recorded for every agent
// that submitted a nonzero offer (0 when unmatched); `matched` holds the
// ids with at least one executed trade. Buyer payments equal seller
// revenues pair by pair (strong budget balance) and all utilities are
// nonnegative by construction.
struct ClearingResult {
  std::vector<Trade> trades;  // sorted by (buyer_id, seller_id)
  std::map<int, double> buyer_utils;
  std::map<int, double> seller_utils;
  std::set<int> matched;

  double total_volume() const;
  double total_welfare() const;
};

// Symmetric Nash bargaining price for one pair: the midpoint of bid and
// ask, which maximizes the product of the two surpluses. Throws
// InfeasiblePair when bid < ask.
double nash_price(double bid, double ask);

// Nash clearing: midpoint prices on feasible pairs, quantities from the
// log-Nash-welfare allocation over all feasible pairs, capacities from
// the agents' battery state and power limits. Returns an empty result
// when no pair is feasible.
ClearingResult clear_nash(const std::vector<Offer>& offers, const std::vector<EVAgent>& agents,
                          const SimConfig& cfg);

// Greedy baseline: same midpoint pricing, but quantities assigned by
// visiting feasible pairs in a seeded random order, each pair trading the
// minimum of the two remaining capacities.
ClearingResult clear_greedy_average(const std::vector<Offer>& offers,
                                    const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                    Rng& rng);

// Double auction baseline: bids sorted descending, asks ascending, ranks
// matched while bid >= ask; every executed trade clears at the single
// midpoint price of the marginal (last matched) rank.
ClearingResult clear_double_auction(const std::vector<Offer>& offers,
                                    const std::vector<EVAgent>& agents, const SimConfig& cfg);

// Learning-only baseline has no mechanism of its own: greedy random-order
// matching at per-pair midpoint prices. Reward shaping is disabled
// downstream, not here.
ClearingResult clear_learning_only(const std::vector<Offer>& offers,
                                   const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                   Rng& rng);

// Dispatch by mechanism. step_seed feeds the random pair order of the
// greedy engines; Nash and the double auction are deterministic and
// ignore it. Counterfactual re-clears must pass the same step_seed so
// that baselines are compared under an identical draw.
ClearingResult clear(Mechanism m, const std::vector<Offer>& offers,
                     const std::vector<EVAgent>& agents, const SimConfig& cfg,
                     uint64_t step_seed);

}  // namespace v2v::clearing
