#include "faascost/decimal.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "wide.hpp"

namespace faascost {

using detail::Wide;

namespace {

// Rewrites "[-]d.ddde[+-]x" into plain positional notation.
std::string expand_exponent(std::string_view s) {
  const auto epos = s.find_first_of("eE");
  std::string mantissa(s.substr(0, epos));
  int exponent = 0;
  const auto exp_text = s.substr(epos + 1);
  auto [ptr, ec] = std::from_chars(exp_text.data() + (exp_text.starts_with('+') ? 1 : 0),
                                   exp_text.data() + exp_text.size(), exponent);
  if (ec != std::errc{} || ptr != exp_text.data() + exp_text.size() || exponent > 40 || exponent < -60) return {};

  std::string sign;
  if (!mantissa.empty() && (mantissa.front() == '-' || mantissa.front() == '+')) {
    if (mantissa.front() == '-') sign = "-";
    mantissa.erase(0, 1);
  }
  const auto dot = mantissa.find('.');
  const int int_digits = static_cast<int>(dot == std::string::npos ? mantissa.size() : dot);
  std::string digits;
  for (char c : mantissa)
    if (c != '.') digits.push_back(c);
  const int point = int_digits + exponent;
  if (point <= 0) return sign + "0." + std::string(static_cast<std::size_t>(-point), '0') + digits;
  if (static_cast<std::size_t>(point) >= digits.size())
    return sign + digits + std::string(static_cast<std::size_t>(point) - digits.size(), '0');
  return sign + digits.substr(0, static_cast<std::size_t>(point)) + "." + digits.substr(static_cast<std::size_t>(point));
}

}  // namespace

Decimal Decimal::parse(std::string_view text) {
  const std::string_view original = text;
  auto fail = [&]() -> Decimal { throw std::invalid_argument("invalid decimal: '" + std::string(original) + "'"); };

  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return fail();

  std::string expanded;
  if (text.find_first_of("eE") != std::string_view::npos) {
    expanded = expand_exponent(text);
    if (expanded.empty()) return fail();
    text = expanded;
  }

  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  Wide integral = 0;
  Wide fraction = 0;
  int fraction_digits = 0;
  bool seen_dot = false;
  bool seen_digit = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_dot) return fail();
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') return fail();
    seen_digit = true;
    if (!seen_dot) {
      integral = integral * 10 + (c - '0');
      if (integral > detail::pow10(26)) return fail();
    } else {
      if (fraction_digits >= 70) continue;  // beyond any rounding influence
      fraction = fraction * 10 + (c - '0');
      ++fraction_digits;
    }
  }
  if (!seen_digit) return fail();

  Wide raw = integral * detail::pow10(kScale);
  if (fraction_digits <= kScale) {
    raw += fraction * detail::pow10(kScale - fraction_digits);
  } else {
    raw += detail::round_div(fraction, detail::pow10(fraction_digits - kScale));
  }
  if (negative) raw = -raw;
  return detail::narrow(raw);
}

Decimal Decimal::from_double(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite value cannot be a decimal");
  // 17 significant digits identify the double; rounding those to 12 places
  // drops the binary expansion tail (0.1 -> 0.100000000000).
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  return parse(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
}

double Decimal::to_double() const {
  const Raw whole = raw_ / kOne;
  const Raw frac = raw_ % kOne;
  return static_cast<double>(whole) + static_cast<double>(frac) / static_cast<double>(kOne);
}

std::string Decimal::to_string() const {
  Raw v = raw_;
  const bool negative = v < 0;
  unsigned __int128 mag = negative ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
  const unsigned __int128 one = static_cast<unsigned __int128>(kOne);
  unsigned __int128 whole = mag / one;
  unsigned __int128 frac = mag % one;

  std::string whole_str;
  do {
    whole_str.insert(whole_str.begin(), static_cast<char>('0' + static_cast<int>(whole % 10)));
    whole /= 10;
  } while (whole != 0);
  std::string frac_str(kScale, '0');
  for (int i = kScale - 1; i >= 0; --i) {
    frac_str[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(frac % 10));
    frac /= 10;
  }
  return (negative ? "-" : "") + whole_str + "." + frac_str;
}

Decimal Decimal::ceil_to_multiple(Decimal step) const {
  if (step.raw_ <= 0) throw std::invalid_argument("rounding step must be positive");
  const Wide q = detail::ceil_div(Wide(raw_), Wide(step.raw_));
  return detail::narrow(q * Wide(step.raw_));
}

Decimal Decimal::product(std::initializer_list<Decimal> factors, std::int64_t divisor) {
  if (divisor <= 0) throw std::invalid_argument("divisor must be positive");
  Wide acc = 1;
  int scale = 0;
  for (Decimal f : factors) {
    acc *= Wide(f.raw_);
    scale += kScale;
  }
  if (scale == 0) return detail::narrow(detail::round_div(Wide(kOne), Wide(divisor)));
  // acc carries `scale` fractional digits; bring it back to kScale.
  return detail::narrow(detail::round_div(acc, detail::pow10(scale - kScale) * divisor));
}

Decimal Decimal::product_ceil_to_multiple(Decimal a, Decimal b, std::int64_t divisor, Decimal step) {
  if (divisor <= 0) throw std::invalid_argument("divisor must be positive");
  if (step.raw_ <= 0) throw std::invalid_argument("rounding step must be positive");
  // a*b/divisor in raw units is a.raw*b.raw / (kOne*divisor); count steps of step.raw.
  const Wide num = Wide(a.raw_) * Wide(b.raw_);
  const Wide den = Wide(kOne) * divisor * Wide(step.raw_);
  return detail::narrow(detail::ceil_div(num, den) * Wide(step.raw_));
}

Decimal Decimal::quotient(Decimal numerator, Decimal denominator) {
  if (denominator.raw_ == 0) throw std::domain_error("division by zero");
  Wide n = Wide(numerator.raw_) * Wide(kOne);
  Wide d = Wide(denominator.raw_);
  if (d < 0) {
    n = -n;
    d = -d;
  }
  return detail::narrow(detail::round_div(n, d));
}

}  // namespace faascost
