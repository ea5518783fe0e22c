#include "kw/rational.hpp"

#include <cstdlib>
#include <numeric>

#include "kw/error.hpp"

namespace kw {

Rational::Rational(long long numerator, long long denominator) {
  if (denominator == 0) {
    throw ConfigError("rational: zero denominator");
  }
  if (denominator < 0) {
    numerator = -numerator;
    denominator = -denominator;
  }
  long long g = std::gcd(std::llabs(numerator), denominator);
  if (g == 0) g = 1;  // 0/x -> 0/1
  num = numerator / g;
  den = denominator / g;
  if (num == 0) den = 1;
}

bool Rational::operator<(const Rational& o) const {
  // Denominators are positive, so cross multiplication preserves order.
  return num * o.den < o.num * den;
}

bool Rational::divides_exactly(long long value) const {
  return (num * value) % den == 0;
}

long long Rational::times_exact(long long value, const std::string& context) const {
  long long product = num * value;
  if (product % den != 0) {
    throw PlanError(context + ": " + str() + " * " + std::to_string(value) +
                    " is not an integer");
  }
  return product / den;
}

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational parse_rational(const std::string& text) {
  if (text.empty()) {
    throw ConfigError("rational: empty string");
  }
  size_t slash = text.find('/');
  try {
    size_t used = 0;
    if (slash == std::string::npos) {
      long long v = std::stoll(text, &used);
      if (used != text.size()) throw ConfigError("rational: trailing characters in '" + text + "'");
      return Rational(v);
    }
    std::string num_part = text.substr(0, slash);
    std::string den_part = text.substr(slash + 1);
    long long p = std::stoll(num_part, &used);
    if (used != num_part.size()) throw ConfigError("rational: malformed numerator in '" + text + "'");
    long long q = std::stoll(den_part, &used);
    if (used != den_part.size()) throw ConfigError("rational: malformed denominator in '" + text + "'");
    return Rational(p, q);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("rational: cannot parse '" + text + "'");
  }
}

}  // namespace kw
