#pragma once

#include <cstdint>
#include <string>

namespace kw {

// Exact rational number with a positive denominator, always stored reduced.
// Used for the convolutional parameter budget b = n / m_t, which must be
// carried without rounding so that budget verification is an identity check.
struct Rational {
  long long num{0};
  long long den{1};

  Rational() = default;
  Rational(long long numerator, long long denominator);  // normalizes; throws ConfigError on zero denominator
  explicit Rational(long long integer) : num(integer), den(1) {}

  bool is_integer() const { return den == 1; }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool operator<(const Rational& o) const;

  // num * value / den when it divides exactly; throws PlanError otherwise.
  long long times_exact(long long value, const std::string& context) const;

  // True when num * value is divisible by den.
  bool divides_exactly(long long value) const;

  std::string str() const;  // "3", "1/2", ...
};

// Parses "1", "4", "1/2", "-3/4". Throws ConfigError on malformed input.
Rational parse_rational(const std::string& text);

}  // namespace kw
