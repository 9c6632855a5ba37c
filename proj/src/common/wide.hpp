#pragma once

#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

#include "faascost/decimal.hpp"

namespace faascost::detail {

using Wide = boost::multiprecision::int256_t;

inline Wide widen(Decimal d) { return Wide(d.raw()); }

inline Wide pow10(int n) {
  Wide v = 1;
  for (int i = 0; i < n; ++i) v *= 10;
  return v;
}

// floor(n / d) for d > 0.
inline Wide floor_div(const Wide& n, const Wide& d) {
  Wide q = n / d;
  if ((n % d != 0) && (n < 0)) q -= 1;
  return q;
}

inline Wide ceil_div(const Wide& n, const Wide& d) { return -floor_div(-n, d); }

// n / d rounded half-to-even, d > 0.
inline Wide round_div(const Wide& n, const Wide& d) {
  Wide q = floor_div(n, d);
  Wide r = n - q * d;
  Wide twice = r * 2;
  if (twice > d || (twice == d && (q & 1) != 0)) q += 1;
  return q;
}

inline Decimal narrow(const Wide& w) {
  static const Wide kMax = Wide((std::numeric_limits<Decimal::Raw>::max)());
  static const Wide kMin = Wide((std::numeric_limits<Decimal::Raw>::min)());
  if (w > kMax || w < kMin) throw std::overflow_error("decimal overflow");
  return Decimal::from_raw(static_cast<Decimal::Raw>(w));
}

}  // namespace faascost::detail
