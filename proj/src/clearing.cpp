#include "v2v/clearing.hpp"

#include <algorithm>
#include <cmath>

#include "v2v/optim.hpp"

namespace v2v::clearing {

namespace {

struct Side {
  std::vector<const Offer*> buyers;
  std::vector<const Offer*> sellers;
};

// Nonzero offers only; zero-quantity and neutral offers cannot trade.
Side split_offers(const std::vector<Offer>& offers) {
  Side s;
  for (const Offer& o : offers) {
    if (o.quantity <= kEps) continue;
    if (o.role == Role::Buyer) s.buyers.push_back(&o);
    if (o.role == Role::Seller) s.sellers.push_back(&o);
  }
  auto by_id = [](const Offer* a, const Offer* b) { return a->agent_id < b->agent_id; };
  std::sort(s.buyers.begin(), s.buyers.end(), by_id);
  std::sort(s.sellers.begin(), s.sellers.end(), by_id);
  return s;
}

const EVAgent& agent_by_id(const std::vector<EVAgent>& agents, int id) {
  for (const EVAgent& a : agents) {
    if (a.id == id) return a;
  }
  throw std::out_of_range("offer references an agent that is not parked");
}

// Constraint caps of Eq.-style clearing: battery headroom, the submitted
// quantity, and the per-step power limit.
double buyer_cap(const Offer& o, const std::vector<EVAgent>& agents, const SimConfig& cfg) {
  const EVAgent& a = agent_by_id(agents, o.agent_id);
  return std::min({deficit(a), o.quantity, a.max_power_kw * cfg.dt_hours});
}

double seller_cap(const Offer& o, const std::vector<EVAgent>& agents, const SimConfig& cfg) {
  const EVAgent& a = agent_by_id(agents, o.agent_id);
  return std::min({avail(a), o.quantity, a.max_power_kw * cfg.dt_hours});
}

void record_trade(ClearingResult& out, const Offer& buyer, const Offer& seller, double qty,
                  double price) {
  out.trades.push_back({buyer.agent_id, seller.agent_id, qty, price});
  out.buyer_utils[buyer.agent_id] += (buyer.price - price) * qty;
  out.seller_utils[seller.agent_id] += (price - seller.price) * qty;
  out.matched.insert(buyer.agent_id);
  out.matched.insert(seller.agent_id);
}

void init_utils(ClearingResult& out, const Side& side) {
  for (const Offer* b : side.buyers) out.buyer_utils[b->agent_id] = 0.0;
  for (const Offer* s : side.sellers) out.seller_utils[s->agent_id] = 0.0;
}

void sort_trades(ClearingResult& out) {
  std::sort(out.trades.begin(), out.trades.end(), [](const Trade& a, const Trade& b) {
    return a.buyer_id != b.buyer_id ? a.buyer_id < b.buyer_id : a.seller_id < b.seller_id;
  });
}

ClearingResult clear_greedy_impl(const std::vector<Offer>& offers,
                                 const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                 Rng& rng) {
  ClearingResult out;
  const Side side = split_offers(offers);
  init_utils(out, side);

  std::vector<std::pair<int, int>> pairs;  // indices into side.buyers/sellers
  for (size_t i = 0; i < side.buyers.size(); ++i) {
    for (size_t j = 0; j < side.sellers.size(); ++j) {
      if (side.buyers[i]->price >= side.sellers[j]->price) {
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  rng.shuffle(pairs);

  std::vector<double> brem(side.buyers.size()), srem(side.sellers.size());
  for (size_t i = 0; i < side.buyers.size(); ++i) brem[i] = buyer_cap(*side.buyers[i], agents, cfg);
  for (size_t j = 0; j < side.sellers.size(); ++j) {
    srem[j] = seller_cap(*side.sellers[j], agents, cfg);
  }

  for (const auto& [i, j] : pairs) {
    const double qty = std::min(brem[static_cast<size_t>(i)], srem[static_cast<size_t>(j)]);
    if (qty <= kTradeDust) continue;
    const Offer& b = *side.buyers[static_cast<size_t>(i)];
    const Offer& s = *side.sellers[static_cast<size_t>(j)];
    record_trade(out, b, s, qty, nash_price(b.price, s.price));
    brem[static_cast<size_t>(i)] -= qty;
    srem[static_cast<size_t>(j)] -= qty;
  }
  sort_trades(out);
  return out;
}

}  // namespace

const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::Nash: return "nash";
    case Mechanism::GreedyAvg: return "greedy_avg";
    case Mechanism::DoubleAuction: return "double_auction";
    default: return "learning_only";
  }
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "nash") return Mechanism::Nash;
  if (s == "greedy_avg") return Mechanism::GreedyAvg;
  if (s == "double_auction") return Mechanism::DoubleAuction;
  if (s == "learning_only") return Mechanism::LearningOnly;
  throw std::invalid_argument("unknown mechanism: " + s);
}

double ClearingResult::total_volume() const {
  double v = 0.0;
  for (const Trade& t : trades) v += t.quantity_kwh;
  return v;
}

double ClearingResult::total_welfare() const {
  double w = 0.0;
  for (const auto& [id, u] : buyer_utils) w += u;
  for (const auto& [id, u] : seller_utils) w += u;
  return w;
}

double nash_price(double bid, double ask) {
  if (bid < ask) throw InfeasiblePair();
  return 0.5 * (bid + ask);
}

ClearingResult clear_nash(const std::vector<Offer>& offers, const std::vector<EVAgent>& agents,
                          const SimConfig& cfg) {
  ClearingResult out;
  const Side side = split_offers(offers);
  init_utils(out, side);

  const int nb = static_cast<int>(side.buyers.size());
  const int ns = static_cast<int>(side.sellers.size());
  if (nb == 0 || ns == 0) return out;

  optim::AllocationProblem prob;
  prob.surplus = Eigen::MatrixXd::Constant(nb, ns, -1.0);
  prob.buyer_caps = Eigen::VectorXd::Zero(nb);
  prob.seller_caps = Eigen::VectorXd::Zero(ns);
  bool any_feasible = false;
  for (int i = 0; i < nb; ++i) {
    prob.buyer_caps(i) = buyer_cap(*side.buyers[static_cast<size_t>(i)], agents, cfg);
    for (int j = 0; j < ns; ++j) {
      const double g = side.buyers[static_cast<size_t>(i)]->price -
                       side.sellers[static_cast<size_t>(j)]->price;
      if (g >= 0.0) {
        prob.surplus(i, j) = g;
        any_feasible = true;
      }
    }
  }
  for (int j = 0; j < ns; ++j) {
    prob.seller_caps(j) = seller_cap(*side.sellers[static_cast<size_t>(j)], agents, cfg);
  }
  if (!any_feasible) return out;

  const optim::AllocationResult sol = optim::solve_allocation(prob);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < ns; ++j) {
      const double qty = sol.x(i, j);
      if (qty <= kTradeDust) continue;
      const Offer& b = *side.buyers[static_cast<size_t>(i)];
      const Offer& s = *side.sellers[static_cast<size_t>(j)];
      record_trade(out, b, s, qty, nash_price(b.price, s.price));
    }
  }
  sort_trades(out);
  return out;
}

ClearingResult clear_greedy_average(const std::vector<Offer>& offers,
                                    const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                    Rng& rng) {
  return clear_greedy_impl(offers, agents, cfg, rng);
}

ClearingResult clear_learning_only(const std::vector<Offer>& offers,
                                   const std::vector<EVAgent>& agents, const SimConfig& cfg,
                                   Rng& rng) {
  return clear_greedy_impl(offers, agents, cfg, rng);
}

ClearingResult clear_double_auction(const std::vector<Offer>& offers,
                                    const std::vector<EVAgent>& agents, const SimConfig& cfg) {
  ClearingResult out;
  Side side = split_offers(offers);
  init_utils(out, side);
  if (side.buyers.empty() || side.sellers.empty()) return out;

  std::sort(side.buyers.begin(), side.buyers.end(), [](const Offer* a, const Offer* b) {
    return a->price != b->price ? a->price > b->price : a->agent_id < b->agent_id;
  });
  std::sort(side.sellers.begin(), side.sellers.end(), [](const Offer* a, const Offer* b) {
    return a->price != b->price ? a->price < b->price : a->agent_id < b->agent_id;
  });

  const size_t ranks = std::min(side.buyers.size(), side.sellers.size());
  size_t marginal = 0;  // number of matched ranks
  while (marginal < ranks &&
         side.buyers[marginal]->price >= side.sellers[marginal]->price) {
    ++marginal;
  }
  if (marginal == 0) return out;

  // Uniform price from the marginal pair; within [ask_k, bid_k] of every
  // matched rank k because of the sort order.
  const double price = nash_price(side.buyers[marginal - 1]->price,
                                  side.sellers[marginal - 1]->price);
  for (size_t k = 0; k < marginal; ++k) {
    const Offer& b = *side.buyers[k];
    const Offer& s = *side.sellers[k];
    const double qty = std::min(buyer_cap(b, agents, cfg), seller_cap(s, agents, cfg));
    if (qty <= kTradeDust) continue;
    record_trade(out, b, s, qty, price);
  }
  sort_trades(out);
  return out;
}

ClearingResult clear(Mechanism m, const std::vector<Offer>& offers,
                     const std::vector<EVAgent>& agents, const SimConfig& cfg,
                     uint64_t step_seed) {
  switch (m) {
    case Mechanism::Nash:
      return clear_nash(offers, agents, cfg);
    case Mechanism::DoubleAuction:
      return clear_double_auction(offers, agents, cfg);
    case Mechanism::GreedyAvg: {
      Rng rng(step_seed);
      return clear_greedy_average(offers, agents, cfg, rng);
    }
    default: {
      Rng rng(step_seed);
      return clear_learning_only(offers, agents, cfg, rng);
    }
  }
}

}  // namespace v2v::clearing
