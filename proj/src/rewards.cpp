#include "v2v/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "v2v/metrics.hpp"

namespace v2v::rewards {

namespace {

std::vector<Offer> with_no_trade(const std::vector<Offer>& offers, int agent_id) {
  std::vector<Offer> out = offers;
  for (Offer& o : out) {
    if (o.agent_id == agent_id) o.quantity = 0.0;
  }
  return out;
}

}  // namespace

double base_utility(int agent_id, const clearing::ClearingResult& result) {
  double u = 0.0;
  const auto bi = result.buyer_utils.find(agent_id);
  if (bi != result.buyer_utils.end()) u += bi->second;
  const auto si = result.seller_utils.find(agent_id);
  if (si != result.seller_utils.end()) u += si->second;
  return u;
}

double collective_reward(const clearing::ClearingResult& result, const std::vector<Offer>& offers,
                         const RewardWeights& w) {
  if (!w.enable_global) return 0.0;
  const double sw = metrics::social_welfare(result);
  const std::vector<double> utils = metrics::active_trader_utils(result, offers);
  const double fi = utils.empty() ? 0.0 : metrics::jains_index(utils);
  const double pm = metrics::match_rate(result, offers);
  return w.lambda_w * sw + w.lambda_1 * fi + w.lambda_2 * pm;
}

double counterfactual_credit(int agent_id, const std::vector<Offer>& offers,
                             const std::vector<EVAgent>& agents, const SimConfig& cfg,
                             const RewardWeights& w, clearing::Mechanism mech,
                             uint64_t step_seed) {
  const auto factual = clearing::clear(mech, offers, agents, cfg, step_seed);
  const auto counter = clearing::clear(mech, with_no_trade(offers, agent_id), agents, cfg,
                                       step_seed);
  return collective_reward(factual, offers, w) - collective_reward(counter, offers, w);
}

CreditReport counterfactual_credits(const std::vector<Offer>& offers,
                                    const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                    const RewardWeights& w, clearing::Mechanism mech,
                                    uint64_t step_seed) {
  CreditReport report;
  const auto factual = clearing::clear(mech, offers, agents, cfg, step_seed);
  report.mechanism_calls = 1;
  const double r_full = collective_reward(factual, offers, w);
  for (const Offer& o : offers) {
    const auto counter = clearing::clear(mech, with_no_trade(offers, o.agent_id), agents, cfg,
                                         step_seed);
    ++report.mechanism_calls;
    report.delta[o.agent_id] = r_full - collective_reward(counter, offers, w);
  }
  return report;
}

double price_proximity(int agent_id, const std::vector<Offer>& offers,
                       const clearing::ClearingResult& result, double kappa) {
  const Offer* own = nullptr;
  for (const Offer& o : offers) {
    if (o.agent_id == agent_id) {
      own = &o;
      break;
    }
  }
  if (own == nullptr || result.matched.count(agent_id) == 0) return 0.0;

  // Largest-volume counterparty; ties broken toward the smaller id by the
  // sorted trade order.
  double best_qty = 0.0;
  double counter_price = 0.0;
  bool found = false;
  for (const clearing::Trade& t : result.trades) {
    const bool as_buyer = own->role == Role::Buyer && t.buyer_id == agent_id;
    const bool as_seller = own->role == Role::Seller && t.seller_id == agent_id;
    if (!as_buyer && !as_seller) continue;
    if (t.quantity_kwh > best_qty) {
      best_qty = t.quantity_kwh;
      found = true;
      // The recorded trade does not carry the counterparty's submitted
      // price, so recover it from the offers list.
      const int other = as_buyer ? t.seller_id : t.buyer_id;
      for (const Offer& o : offers) {
        if (o.agent_id == other) {
          counter_price = o.price;
          break;
        }
      }
    }
  }
  if (!found) return 0.0;

  const double bid = own->role == Role::Buyer ? own->price : counter_price;
  const double ask = own->role == Role::Buyer ? counter_price : own->price;
  const double p_nash = 0.5 * (bid + ask);
  const double d = own->price - p_nash;
  return -kappa * d * d;
}

RewardBreakdown compose(double base, double credit, double prox, const RewardWeights& w,
                        int n_agents) {
  RewardBreakdown rb;
  rb.base = base;
  rb.credit = credit;
  rb.price_prox = prox;
  rb.ir_penalty = -w.mu * std::max(0.0, -base);
  const double n = std::max(n_agents, 1);
  rb.total = w.alpha_r * rb.base + rb.credit / n + w.w_price * rb.price_prox + rb.ir_penalty;
  return rb;
}

}  // namespace v2v::rewards
