#include "v2v/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace v2v::metrics {

namespace {

bool is_active(const Offer& o) { return o.role != Role::Neutral && o.quantity > kEps; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string csv_header() {
  return "step,sw,volume_kwh,gini,jains,p_match,n_buyers,n_sellers,n_neutral,price_mean,"
         "price_std";
}

std::string to_csv_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.step);
  for (double v : {r.sw, r.volume_kwh, r.gini, r.jains, r.p_match}) {
    row += "," + fmt(v);
  }
  row += "," + std::to_string(r.n_buyers) + "," + std::to_string(r.n_sellers) + "," +
         std::to_string(r.n_neutral);
  row += "," + fmt(r.price_mean) + "," + fmt(r.price_std);
  return row;
}

double social_welfare(const clearing::ClearingResult& result) {
  return result.total_welfare();
}

double jains_index(const std::vector<double>& utils) {
  if (utils.empty()) throw EmptyPopulation();
  double sum = 0.0, sumsq = 0.0;
  for (double u : utils) {
    sum += u;
    sumsq += u * u;
  }
  if (sumsq <= 0.0) return 0.0;
  return sum * sum / (static_cast<double>(utils.size()) * sumsq);
}

double gini(const std::vector<double>& utils) {
  const size_t k = utils.size();
  if (k == 0) return 0.0;
  const double mean = std::accumulate(utils.begin(), utils.end(), 0.0) / static_cast<double>(k);
  if (mean <= 0.0) return 0.0;
  double abs_diff = 0.0;
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = 0; j < k; ++j) {
      abs_diff += std::abs(utils[i] - utils[j]);
    }
  }
  return abs_diff / (2.0 * static_cast<double>(k) * static_cast<double>(k) * mean);
}

double match_rate(const clearing::ClearingResult& result, const std::vector<Offer>& offers) {
  int active = 0, matched = 0;
  for (const Offer& o : offers) {
    if (!is_active(o)) continue;
    ++active;
    if (result.matched.count(o.agent_id) > 0) ++matched;
  }
  if (active == 0) return 0.0;
  return static_cast<double>(matched) / static_cast<double>(active);
}

double coefficient_of_variation(const std::vector<double>& series) {
  if (series.empty()) throw ZeroMean();
  const double n = static_cast<double>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  if (mean == 0.0) throw ZeroMean();
  if (series.size() == 1) return 0.0;
  double ss = 0.0;
  for (double v : series) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0)) / mean;
}

std::vector<double> active_trader_utils(const clearing::ClearingResult& result,
                                        const std::vector<Offer>& offers) {
  std::vector<double> utils;
  for (const Offer& o : offers) {
    if (!is_active(o)) continue;
    double u = 0.0;
    if (o.role == Role::Buyer) {
      const auto it = result.buyer_utils.find(o.agent_id);
      if (it != result.buyer_utils.end()) u = it->second;
    } else {
      const auto it = result.seller_utils.find(o.agent_id);
      if (it != result.seller_utils.end()) u = it->second;
    }
    utils.push_back(u);
  }
  return utils;
}

MetricsRecord compute_record(int step, const clearing::ClearingResult& result,
                             const std::vector<Offer>& offers) {
  MetricsRecord r;
  r.step = step;
  r.sw = social_welfare(result);
  r.volume_kwh = result.total_volume();

  const std::vector<double> utils = active_trader_utils(result, offers);
  r.gini = gini(utils);
  r.jains = utils.empty() ? 0.0 : jains_index(utils);
  r.p_match = match_rate(result, offers);

  for (const Offer& o : offers) {
    switch (o.role) {
      case Role::Buyer: ++r.n_buyers; break;
      case Role::Seller: ++r.n_sellers; break;
      case Role::Neutral: ++r.n_neutral; break;
    }
  }

  const size_t nt = result.trades.size();
  if (nt > 0) {
    double sum = 0.0;
    for (const clearing::Trade& t : result.trades) sum += t.price;
    r.price_mean = sum / static_cast<double>(nt);
    if (nt > 1) {
      double ss = 0.0;
      for (const clearing::Trade& t : result.trades) {
        ss += (t.price - r.price_mean) * (t.price - r.price_mean);
      }
      r.price_std = std::sqrt(ss / static_cast<double>(nt - 1));
    }
  }
  return r;
}

}  // namespace v2v::metrics
