#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "v2v/clearing.hpp"
#include "v2v/domain.hpp"

namespace v2v::rewards {

// Weights of the shaped training reward. The enable_* flags implement the
// ablation variants: price proximity, counterfactual credit, and the
// global welfare/fairness terms inside the collective reward.
struct RewardWeights {
  double alpha_r = 1.0;
  double w_price = 1.0;
  double kappa_price = 10.0;  // currency^-2 scale so the quadratic penalty
                              // is the same order as base utility
  double mu = 5.0;            // individual-rationality penalty weight
  double lambda_w = 0.01;     // SW is in currency and needs down-scaling
  double lambda_1 = 1.0;      // Jain's index weight
  double lambda_2 = 1.0;      // match-rate weight
  bool enable_price_prox = true;
  bool enable_credit = true;
  bool enable_global = true;
};

struct RewardBreakdown {
  double base = 0.0;        // currency, from executed trades
  double credit = 0.0;      // counterfactual contribution delta_i
  double price_prox = 0.0;  // <= 0
  double ir_penalty = 0.0;  // <= 0
  double total = 0.0;       // alpha*base + credit/N + w*prox + ir_penalty
};

// Utility of agent `agent_id` in this timestep's clearing result; 0 when
// unmatched or absent.
double base_utility(int agent_id, const clearing::ClearingResult& result);

// lambda_w*SW + lambda_1*FI + lambda_2*P_match. FI uses the convention 0
// when no active traders exist so the reward stays defined in empty
// markets. With enable_global unset all three weights are treated as 0.
double collective_reward(const clearing::ClearingResult& result, const std::vector<Offer>& offers,
                         const RewardWeights& w);

// delta_i for one agent: collective reward of the factual clearing minus
// the collective reward with agent i's offer replaced by the no-trade
// default (quantity 0). Two mechanism invocations.
double counterfactual_credit(int agent_id, const std::vector<Offer>& offers,
                             const std::vector<EVAgent>& agents, const SimConfig& cfg,
                             const RewardWeights& w, clearing::Mechanism mech,
                             uint64_t step_seed);

struct CreditReport {
  std::map<int, double> delta;  // agent id -> delta_i
  int mechanism_calls = 0;      // exactly offers.size() + 1
};

// Credits for every agent in one pass: one factual clearing plus one
// counterfactual re-clearing per agent (N+1 mechanism calls total). All
// re-clears use the same step seed so the greedy baselines see an
// identical pair order.
CreditReport counterfactual_credits(const std::vector<Offer>& offers,
                                    const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                    const RewardWeights& w, clearing::Mechanism mech,
                                    uint64_t step_seed);

// Quadratic penalty on the distance between the agent's submitted price
// and the Nash price of its largest-volume counterparty; 0 when
// unmatched. Training-only signal. Always <= 0.
double price_proximity(int agent_id, const std::vector<Offer>& offers,
                       const clearing::ClearingResult& result, double kappa);

// Combine the components. n_agents is the current population N(t); the
// credit is scaled by 1/N for population invariance. The IR term is
// -mu * max(0, -base); identically zero under Nash clearing.
RewardBreakdown compose(double base, double credit, double prox, const RewardWeights& w,
                        int n_agents);

}  // namespace v2v::rewards
