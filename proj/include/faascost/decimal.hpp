#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

namespace faascost {

// Signed fixed-point decimal with 12 fractional digits, stored as a 128-bit
// integer count of 1e-12 units. All rounding is half-to-even and happens at
// exactly one place per operation, so results are reproducible as strings.
class Decimal {
 public:
  using Raw = __int128;
  static constexpr int kScale = 12;
  static constexpr Raw kOne = 1'000'000'000'000;

  constexpr Decimal() = default;

  static constexpr Decimal from_raw(Raw raw) {
    Decimal d;
    d.raw_ = raw;
    return d;
  }
  static constexpr Decimal from_int(std::int64_t v) { return from_raw(static_cast<Raw>(v) * kOne); }

  // Accepts "[-]digits[.digits]" and exponent forms ("2e-7"). Extra fractional
  // digits beyond 12 are rounded half-to-even. Throws std::invalid_argument.
  static Decimal parse(std::string_view text);

  // Rounds the shortest fixed representation of `v` to 12 digits.
  static Decimal from_double(double v);

  constexpr Raw raw() const { return raw_; }
  double to_double() const;

  // Fixed notation with all 12 fractional digits, e.g. "0.000000200000".
  std::string to_string() const;

  constexpr bool is_zero() const { return raw_ == 0; }
  constexpr bool is_negative() const { return raw_ < 0; }

  // Smallest multiple of `step` that is >= *this. `step` must be positive.
  Decimal ceil_to_multiple(Decimal step) const;

  // Exact product of all factors divided by `divisor`, rounded once.
  static Decimal product(std::initializer_list<Decimal> factors, std::int64_t divisor = 1);

  // ceil(a * b / divisor / step) * step, computed without intermediate rounding.
  static Decimal product_ceil_to_multiple(Decimal a, Decimal b, std::int64_t divisor, Decimal step);

  // Exact quotient numerator / denominator, rounded once. Throws on zero.
  static Decimal quotient(Decimal numerator, Decimal denominator);

  friend constexpr Decimal operator+(Decimal a, Decimal b) { return from_raw(a.raw_ + b.raw_); }
  friend constexpr Decimal operator-(Decimal a, Decimal b) { return from_raw(a.raw_ - b.raw_); }
  friend constexpr Decimal operator-(Decimal a) { return from_raw(-a.raw_); }
  constexpr Decimal& operator+=(Decimal o) {
    raw_ += o.raw_;
    return *this;
  }
  constexpr Decimal& operator-=(Decimal o) {
    raw_ -= o.raw_;
    return *this;
  }
  friend Decimal operator*(Decimal a, Decimal b) { return product({a, b}); }
  friend Decimal operator/(Decimal a, Decimal b) { return quotient(a, b); }

  friend constexpr bool operator==(Decimal a, Decimal b) = default;
  friend constexpr std::strong_ordering operator<=>(Decimal a, Decimal b) { return a.raw_ <=> b.raw_; }

 private:
  Raw raw_ = 0;
};

constexpr Decimal max(Decimal a, Decimal b) { return a < b ? b : a; }

}  // namespace faascost
