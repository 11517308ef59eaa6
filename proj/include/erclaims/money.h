#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace erclaims {

// Fixed-point currency amount with two fractional digits. Sums of Money are
// exact, which keeps cumulative cost-avoidance curves bit-stable.
class Money {
 public:
  constexpr Money() = default;

  static constexpr Money from_cents(std::int64_t cents) { return Money(cents); }

  // Rounds half away from zero to the nearest cent.
  static Money from_units(double units);

  // Parses "123", "-4.5", "0.07". Digits beyond the second decimal are rounded
  // half away from zero. Returns nullopt on anything else (exponents, spaces).
  static std::optional<Money> parse(std::string_view text);

  constexpr std::int64_t cents() const { return cents_; }
  double to_units() const { return static_cast<double>(cents_) / 100.0; }

  // Always two decimals, e.g. "-0.50".
  std::string to_string() const;

  constexpr Money operator+(Money o) const { return Money(cents_ + o.cents_); }
  constexpr Money operator-(Money o) const { return Money(cents_ - o.cents_); }
  constexpr Money operator-() const { return Money(-cents_); }
  constexpr Money& operator+=(Money o) {
    cents_ += o.cents_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    cents_ -= o.cents_;
    return *this;
  }

  constexpr auto operator<=>(const Money&) const = default;

 private:
  constexpr explicit Money(std::int64_t cents) : cents_(cents) {}

  std::int64_t cents_ = 0;
};

}  // namespace erclaims
