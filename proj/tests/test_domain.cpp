#include <doctest.h>

#include "v2v/domain.hpp"
#include "v2v/rng.hpp"

using namespace v2v;

namespace {

EVAgent agent(double battery, double need, double buffer) {
  EVAgent a;
  a.battery_kwh = battery;
  a.need_kwh = need;
  a.buffer_kwh = buffer;
  a.capacity_kwh = 75.0;
  return a;
}

}  // namespace

TEST_CASE("role classification") {
  CHECK(classify_role(agent(30, 50, 5)) == Role::Buyer);
  CHECK(classify_role(agent(60, 50, 5)) == Role::Seller);
  CHECK(classify_role(agent(52, 50, 5)) == Role::Neutral);

  SUBCASE("boundaries resolve to neutral") {
    CHECK(classify_role(agent(50, 50, 5)) == Role::Neutral);
    CHECK(classify_role(agent(55, 50, 5)) == Role::Neutral);
  }
}

TEST_CASE("deficit and avail") {
  CHECK(deficit(agent(30, 50, 5)) == doctest::Approx(20.0));
  CHECK(avail(agent(60, 50, 5)) == doctest::Approx(5.0));
  CHECK(deficit(agent(50, 50, 5)) == 0.0);

  SUBCASE("role masking zeroes the off-role quantity") {
    CHECK(deficit(agent(60, 50, 5)) == 0.0);  // seller
    CHECK(avail(agent(30, 50, 5)) == 0.0);    // buyer
    CHECK(avail(agent(52, 50, 5)) == 0.0);    // neutral
  }
}

TEST_CASE("roles partition the fleet and tie to positive quantities") {
  Rng rng(7);
  int buyers = 0, sellers = 0, neutrals = 0;
  for (int i = 0; i < 2000; ++i) {
    EVAgent a = agent(rng.uniform(0.0, 75.0), rng.uniform(20.0, 70.0), rng.uniform(0.0, 8.0));
    const Role r = classify_role(a);
    switch (r) {
      case Role::Buyer: ++buyers; break;
      case Role::Seller: ++sellers; break;
      case Role::Neutral: ++neutrals; break;
    }
    CHECK((deficit(a) > 0.0) == (r == Role::Buyer));
    CHECK((avail(a) > 0.0) == (r == Role::Seller));
    CHECK(deficit(a) >= 0.0);
    CHECK(avail(a) >= 0.0);
  }
  CHECK(buyers + sellers + neutrals == 2000);
  CHECK(buyers > 0);
  CHECK(sellers > 0);
  CHECK(neutrals > 0);
}
