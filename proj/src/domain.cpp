#include "v2v/domain.hpp"

namespace v2v {

const char* to_string(Role r) {
  switch (r) {
    case Role::Buyer: return "buyer";
    case Role::Seller: return "seller";
    default: return "neutral";
  }
}

Role classify_role(const EVAgent& a) {
  if (a.battery_kwh < a.need_kwh - kEps) return Role::Buyer;
  if (a.battery_kwh > a.need_kwh + a.buffer_kwh + kEps) return Role::Seller;
  return Role::Neutral;
}

double deficit(const EVAgent& a) {
  if (classify_role(a) != Role::Buyer) return 0.0;
  const double d = a.need_kwh - a.battery_kwh;
  return d > 0.0 ? d : 0.0;
}

double avail(const EVAgent& a) {
  if (classify_role(a) != Role::Seller) return 0.0;
  const double s = a.battery_kwh - a.need_kwh - a.buffer_kwh;
  return s > 0.0 ? s : 0.0;
}

}  // namespace v2v
