#include "erclaims/money.h"

#include <cmath>
#include <cstdlib>

namespace erclaims {

Money Money::from_units(double units) {
  return Money(static_cast<std::int64_t>(std::llround(units * 100.0)));
}

std::optional<Money> Money::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  std::size_t pos = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  std::int64_t whole = 0;
  std::size_t int_digits = 0;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
    if (whole > (INT64_MAX / 100 - 9) / 10) return std::nullopt;
    whole = whole * 10 + (text[pos] - '0');
    ++pos;
    ++int_digits;
  }
  std::int64_t frac = 0;
  std::size_t frac_digits = 0;
  bool round_up = false;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (frac_digits < 2) {
        frac = frac * 10 + (text[pos] - '0');
      } else if (frac_digits == 2) {
        round_up = text[pos] >= '5';
      }
      ++frac_digits;
      ++pos;
    }
  }
  if (pos != text.size() || int_digits + frac_digits == 0) return std::nullopt;
  if (frac_digits == 1) frac *= 10;
  std::int64_t cents = whole * 100 + frac + (round_up ? 1 : 0);
  return Money(negative ? -cents : cents);
}

std::string Money::to_string() const {
  const std::int64_t mag = cents_ < 0 ? -cents_ : cents_;
  std::string out = cents_ < 0 ? "-" : "";
  out += std::to_string(mag / 100);
  out += '.';
  const std::int64_t rem = mag % 100;
  out += static_cast<char>('0' + rem / 10);
  out += static_cast<char>('0' + rem % 10);
  return out;
}

}  // namespace erclaims
