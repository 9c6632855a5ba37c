#include <gtest/gtest.h>

#include <random>

#include "faascost/decimal.hpp"

namespace faascost {
namespace {

TEST(DecimalTest, ParsesAndFormatsFixedNotation) {
  EXPECT_EQ(Decimal::parse("0.0000002").to_string(), "0.000000200000");
  EXPECT_EQ(Decimal::parse("-12.5").to_string(), "-12.500000000000");
  EXPECT_EQ(Decimal::parse("  7 ").to_string(), "7.000000000000");
  EXPECT_EQ(Decimal::parse("2e-7").to_string(), "0.000000200000");
  EXPECT_EQ(Decimal::parse("1.5E3").to_string(), "1500.000000000000");
  EXPECT_EQ(Decimal::parse(".25").to_string(), "0.250000000000");
}

TEST(DecimalTest, RejectsGarbage) {
  EXPECT_THROW(Decimal::parse(""), std::invalid_argument);
  EXPECT_THROW(Decimal::parse("1.2.3"), std::invalid_argument);
  EXPECT_THROW(Decimal::parse("abc"), std::invalid_argument);
  EXPECT_THROW(Decimal::parse("-"), std::invalid_argument);
  EXPECT_THROW(Decimal::from_double(std::nan("")), std::invalid_argument);
}

TEST(DecimalTest, ExtraDigitsRoundHalfToEven) {
  EXPECT_EQ(Decimal::parse("0.0000000000005").raw(), 0);
  EXPECT_EQ(Decimal::parse("0.0000000000015").raw(), 2);
  EXPECT_EQ(Decimal::parse("0.00000000000151").raw(), 2);
  EXPECT_EQ(Decimal::parse("-0.0000000000025").raw(), -2);
}

TEST(DecimalTest, FromDoubleDropsBinaryTail) {
  EXPECT_EQ(Decimal::from_double(0.1).to_string(), "0.100000000000");
  EXPECT_EQ(Decimal::from_double(58.19).to_string(), "58.190000000000");
  EXPECT_EQ(Decimal::from_double(1.0 / 3.0).to_string(), "0.333333333333");
  EXPECT_EQ(Decimal::from_double(0.0).to_string(), "0.000000000000");
}

TEST(DecimalTest, CeilToMultiple) {
  EXPECT_EQ(Decimal::parse("58.19").ceil_to_multiple(Decimal::from_int(100)), Decimal::from_int(100));
  EXPECT_EQ(Decimal::from_int(300).ceil_to_multiple(Decimal::from_int(100)), Decimal::from_int(300));
  EXPECT_EQ(Decimal{}.ceil_to_multiple(Decimal::from_int(100)), Decimal{});
  EXPECT_EQ(Decimal::parse("1.22").ceil_to_multiple(Decimal::parse("0.05")), Decimal::parse("1.25"));
  EXPECT_THROW(Decimal::from_int(1).ceil_to_multiple(Decimal{}), std::invalid_argument);
}

TEST(DecimalTest, ProductRoundsOnce) {
  // 0.125 GB * 96 ms * 1.66667e-5 / 1000 = 2.00000400e-7 exactly
  EXPECT_EQ(Decimal::product({Decimal::parse("0.125"), Decimal::from_int(96), Decimal::parse("0.0000166667")}, 1000)
                .to_string(),
            "0.000000200000");
  EXPECT_EQ(Decimal::product({Decimal::parse("0.000001"), Decimal::parse("0.0000005")}).raw(), 0);
  EXPECT_EQ(Decimal::product({Decimal::parse("0.000001"), Decimal::parse("0.0000015")}).raw(), 2);
}

TEST(DecimalTest, ProductCeilIsExact) {
  // 0.333 vCPU * 3 ms = 0.999 vCPU-ms -> 1 at 1 ms granularity
  EXPECT_EQ(Decimal::product_ceil_to_multiple(Decimal::parse("0.333"), Decimal::from_int(3), 1, Decimal::from_int(1)),
            Decimal::from_int(1));
  // A residue far below the 12-digit grid still rounds up.
  EXPECT_EQ(Decimal::product_ceil_to_multiple(Decimal::parse("0.000001"), Decimal::parse("0.000001"), 1,
                                              Decimal::parse("0.000000000001")),
            Decimal::parse("0.000000000001"));
}

TEST(DecimalTest, AdditionIsExactOverRandomValues) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> d(-1'000'000'000'000'000, 1'000'000'000'000'000);
  for (int i = 0; i < 1000; ++i) {
    const auto a = Decimal::from_raw(d(rng));
    const auto b = Decimal::from_raw(d(rng));
    EXPECT_EQ((a + b) - b, a);
    EXPECT_EQ(Decimal::parse(a.to_string()), a);
  }
}

TEST(DecimalTest, QuotientRounds) {
  EXPECT_EQ(Decimal::quotient(Decimal::from_int(1), Decimal::from_int(3)).to_string(), "0.333333333333");
  EXPECT_EQ(Decimal::quotient(Decimal::from_int(2), Decimal::from_int(3)).to_string(), "0.666666666667");
  EXPECT_EQ(Decimal::quotient(Decimal::from_int(128), Decimal::from_int(1024)).to_string(), "0.125000000000");
  EXPECT_THROW(Decimal::quotient(Decimal::from_int(1), Decimal{}), std::domain_error);
}

}  // namespace
}  // namespace faascost
