// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "t2ieval/rational.hpp"
#include "test_util.hpp"

namespace t2ieval {
namespace {

TEST(Rational, ReducesAndNormalizesSign) {
  Rational r(6, -8);
  EXPECT_EQ(r.num(), -3);
  EXPECT_EQ(r.den(), 4);
  EXPECT_EQ(r.to_string(), "-3/4");
  EXPECT_EQ(Rational(4, 2).to_string(), "2");
}

TEST(Rational, ZeroDenominatorThrows) { EXPECT_THROW(Rational(1, 0), std::domain_error); }

TEST(Rational, ParsesDecimalsExactly) {
  EXPECT_EQ(Rational::parse("2.2848"), Rational(28560, 12500));
  EXPECT_EQ(Rational::parse("-0.5028"), Rational(-5028, 10000));
  EXPECT_EQ(Rational::parse("7/21"), Rational(1, 3));
  EXPECT_EQ(Rational::parse("5"), Rational(5));
  EXPECT_FALSE(Rational::try_parse("abc"));
  EXPECT_FALSE(Rational::try_parse("1.2.3"));
  EXPECT_FALSE(Rational::try_parse(""));
}

TEST(Rational, Arithmetic) {
  Rational a(1, 3), b(1, 6);
  EXPECT_EQ(a + b, Rational(1, 2));
  EXPECT_EQ(a - b, Rational(1, 6));
  EXPECT_EQ(a * b, Rational(1, 18));
  EXPECT_EQ(a / b, Rational(2));
  EXPECT_LT(b, a);
  EXPECT_EQ(abs(Rational(-3, 7)), Rational(3, 7));
}

TEST(Rational, DecimalRounding) {
  EXPECT_EQ(Rational(2, 3).to_decimal(4), "0.6667");
  EXPECT_EQ(Rational(-2, 3).to_decimal(4), "-0.6667");
  EXPECT_EQ(Rational(1, 8).to_decimal(2), "0.13");  // half away from zero
  EXPECT_EQ(Rational(7).to_decimal(2), "7.00");
}

TEST(Rational, ExactStringRoundTrips) {
  EXPECT_EQ(Rational(59, 16).to_exact_string(), "3.6875");
  EXPECT_EQ(Rational(17, 24).to_exact_string(), "17/24");
  EXPECT_EQ(Rational(7).to_exact_string(), "7");
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> num(-100000, 100000), den(1, 5000);
  for (int i = 0; i < 2000; ++i) {
    Rational r(num(rng), den(rng));
    EXPECT_EQ(Rational::parse(r.to_exact_string()), r);
    EXPECT_EQ(Rational::parse(r.to_string()), r);
  }
}

TEST(Rational, OverflowIsReported) {
  Rational big(INT64_MAX / 2 + 1);
  EXPECT_THROW(big * Rational(4), std::overflow_error);
}

}  // namespace
}  // namespace t2ieval
