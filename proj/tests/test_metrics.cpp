#include <doctest.h>

#include <cmath>

#include "v2v/metrics.hpp"
#include "v2v/rng.hpp"

using namespace v2v;
using clearing::ClearingResult;

namespace {

Offer offer(int id, Role role, double price, double qty) { return Offer{id, role, price, qty}; }

}  // namespace

TEST_CASE("social welfare") {
  ClearingResult r;
  r.buyer_utils[1] = 0.30;
  r.seller_utils[2] = 0.30;
  CHECK(metrics::social_welfare(r) == doctest::Approx(0.60));
  CHECK(metrics::social_welfare(ClearingResult{}) == 0.0);
}

TEST_CASE("social welfare equals surplus-weighted volume") {
  // Sum of utilities == sum over trades of (bid - ask) * quantity when
  // both sides are recorded from the same midpoint-priced trades.
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ClearingResult r;
    double expected = 0.0;
    const int n = rng.uniform_int(1, 6);
    for (int k = 0; k < n; ++k) {
      const double ask = rng.uniform(0.05, 0.30);
      const double bid = ask + rng.uniform(0.0, 0.2);
      const double qty = rng.uniform(0.1, 5.0);
      const double price = 0.5 * (bid + ask);
      r.trades.push_back({k, 100 + k, qty, price});
      r.buyer_utils[k] += (bid - price) * qty;
      r.seller_utils[100 + k] += (price - ask) * qty;
      expected += (bid - ask) * qty;
    }
    CHECK(metrics::social_welfare(r) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("jains index") {
  CHECK(metrics::jains_index({1, 1, 1}) == doctest::Approx(1.0));
  CHECK(metrics::jains_index({0, 0, 0, 1}) == doctest::Approx(0.25));
  CHECK(metrics::jains_index({1, 2, 3}) == doctest::Approx(36.0 / 42.0));
  CHECK(metrics::jains_index({0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(metrics::jains_index({}), metrics::EmptyPopulation);

  SUBCASE("scale invariant, 1 for any equal vector") {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
      const int k = rng.uniform_int(1, 9);
      const double c = rng.uniform(0.01, 5.0);
      std::vector<double> equal(static_cast<size_t>(k), c);
      CHECK(metrics::jains_index(equal) == doctest::Approx(1.0));

      std::vector<double> utils, scaled;
      for (int i = 0; i < k; ++i) utils.push_back(rng.uniform(0.0, 2.0));
      for (double u : utils) scaled.push_back(3.7 * u);
      if (metrics::jains_index(utils) > 0.0) {
        CHECK(metrics::jains_index(scaled) ==
              doctest::Approx(metrics::jains_index(utils)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gini") {
  CHECK(metrics::gini({1, 1, 1, 1}) == doctest::Approx(0.0));
  CHECK(metrics::gini({0, 0, 0, 1}) == doctest::Approx(0.75));
  CHECK(metrics::gini({1, 2, 3}) == doctest::Approx(4.0 / 18.0));
  CHECK(metrics::gini({}) == 0.0);
  CHECK(metrics::gini({0.0, 0.0}) == 0.0);  // zero mean convention

  SUBCASE("scale invariance and range") {
    Rng rng(11);
    for (int t = 0; t < 30; ++t) {
      std::vector<double> utils;
      const int k = rng.uniform_int(2, 8);
      for (int i = 0; i < k; ++i) utils.push_back(rng.uniform(0.1, 4.0));
      std::vector<double> scaled;
      for (double u : utils) scaled.push_back(2.5 * u);
      CHECK(metrics::gini(scaled) == doctest::Approx(metrics::gini(utils)).epsilon(1e-12));
      const double g = metrics::gini(utils);
      CHECK(g >= 0.0);
      CHECK(g <= 1.0);
    }
  }
}

TEST_CASE("match rate") {
  std::vector<Offer> offers = {offer(1, Role::Buyer, 0.3, 5), offer(2, Role::Buyer, 0.3, 5),
                               offer(3, Role::Seller, 0.2, 5), offer(4, Role::Neutral, 0.0, 0)};
  ClearingResult r;
  r.matched = {1, 3};
  CHECK(metrics::match_rate(r, offers) == doctest::Approx(2.0 / 3.0));

  r.matched = {1, 2, 3};
  CHECK(metrics::match_rate(r, offers) == doctest::Approx(1.0));

  CHECK(metrics::match_rate(ClearingResult{}, offers) == 0.0);
  CHECK(metrics::match_rate(ClearingResult{}, {}) == 0.0);

  SUBCASE("zero-quantity offers are not active") {
    std::vector<Offer> zq = {offer(1, Role::Buyer, 0.3, 0.0), offer(2, Role::Seller, 0.2, 5)};
    ClearingResult res;
    res.matched = {2};
    CHECK(metrics::match_rate(res, zq) == doctest::Approx(1.0));
  }
}

TEST_CASE("coefficient of variation") {
  CHECK(metrics::coefficient_of_variation({2, 2, 2}) == doctest::Approx(0.0));
  CHECK(metrics::coefficient_of_variation({1, 3}) ==
        doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(metrics::coefficient_of_variation({1, -1}), metrics::ZeroMean);
  CHECK_THROWS_AS(metrics::coefficient_of_variation({}), metrics::ZeroMean);
}

TEST_CASE("record assembles the per-step row") {
  std::vector<Offer> offers = {offer(1, Role::Buyer, 0.30, 6), offer(2, Role::Seller, 0.20, 6),
                               offer(3, Role::Neutral, 0.0, 0)};
  ClearingResult r;
  r.trades.push_back({1, 2, 6.0, 0.25});
  r.buyer_utils[1] = 0.30;
  r.seller_utils[2] = 0.30;
  r.matched = {1, 2};

  const auto rec = metrics::compute_record(7, r, offers);
  CHECK(rec.step == 7);
  CHECK(rec.sw == doctest::Approx(0.60));
  CHECK(rec.volume_kwh == doctest::Approx(6.0));
  CHECK(rec.jains == doctest::Approx(1.0));
  CHECK(rec.gini == doctest::Approx(0.0));
  CHECK(rec.p_match == doctest::Approx(1.0));
  CHECK(rec.n_buyers == 1);
  CHECK(rec.n_sellers == 1);
  CHECK(rec.n_neutral == 1);
  CHECK(rec.price_mean == doctest::Approx(0.25));
  CHECK(rec.price_std == 0.0);
}
