#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "v2v/clearing.hpp"
#include "v2v/domain.hpp"

namespace v2v::metrics {

struct EmptyPopulation : std::runtime_error {
  EmptyPopulation() : std::runtime_error("metric undefined over an empty population") {}
};

struct ZeroMean : std::runtime_error {
  ZeroMean() : std::runtime_error("coefficient of variation undefined for zero mean") {}
};

// One timestep's system metrics; rows of the per-run CSV stream.
struct MetricsRecord {
  int step = 0;
  double sw = 0.0;          // currency
  double volume_kwh = 0.0;
  double gini = 0.0;        // [0,1], 0 when undefined
  double jains = 0.0;       // (0,1], 0 when no active traders or all zero
  double p_match = 0.0;     // [0,1]
  int n_buyers = 0;
  int n_sellers = 0;
  int n_neutral = 0;
  double price_mean = 0.0;  // over executed trades this step
  double price_std = 0.0;
};

std::string csv_header();
std::string to_csv_row(const MetricsRecord& r);

// Sum of all recorded utilities; 0 for an empty result.
double social_welfare(const clearing::ClearingResult& result);

// Jain's fairness index (sum u)^2 / (K sum u^2) over K utilities.
// Returns 0 when every utility is zero; throws EmptyPopulation when K=0
// (callers map that to the convention 0).
double jains_index(const std::vector<double>& utils);

// Gini coefficient sum_{i,j} |u_i - u_j| / (2 K^2 mean); 0 when the mean
// is not positive.
double gini(const std::vector<double>& utils);

// Fraction of active participants (non-neutral, nonzero offers) with at
// least one executed trade; 0 when nobody is active.
double match_rate(const clearing::ClearingResult& result, const std::vector<Offer>& offers);

// Sample std / mean. Throws ZeroMean.
double coefficient_of_variation(const std::vector<double>& series);

// Utilities of the active traders (buyers and sellers with nonzero
// offers, neutrals excluded), zero for the unmatched. Jain's and Gini are
// both computed over exactly this population.
std::vector<double> active_trader_utils(const clearing::ClearingResult& result,
                                        const std::vector<Offer>& offers);

MetricsRecord compute_record(int step, const clearing::ClearingResult& result,
                             const std::vector<Offer>& offers);

}  // namespace v2v::metrics
