// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace t2ieval {

// Exact fraction over int64 with a positive, reduced denominator. Arithmetic
// runs in 128-bit intermediates and throws std::overflow_error when the reduced
// result does not fit back into int64.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT: implicit by design of integer literals
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // "p" for integers, "p/q" otherwise. parse() accepts this form as well as
  // finite decimals such as "-1.2345", which are converted exactly.
  std::string to_string() const;
  static Rational parse(std::string_view text);
  static std::optional<Rational> try_parse(std::string_view text);

  // Decimal rendering rounded half away from zero to `digits` places.
  std::string to_decimal(int digits) const;
  // Exact text that parse() maps back to *this: a terminating decimal when
  // the denominator allows one, "p/q" otherwise.
  std::string to_exact_string() const;

  Rational operator-() const;
  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  static Rational from_wide(__int128 num, __int128 den);

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

Rational abs(const Rational& r);

inline std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

}  // namespace t2ieval
