#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gtv/timebase.hpp"

using namespace gtv;

namespace {

constexpr uint64_t kHalf = uint64_t{1} << 63;

Timestamp random_ts(std::mt19937_64& g) {
  // Roughly +-5000 years around the epoch.
  std::uniform_int_distribution<int64_t> sec(-158'000'000'000, 158'000'000'000);
  return Timestamp{sec(g), g()};
}

}  // namespace

TEST(TsDiff, IdentityIsZero) {
  const Timestamp a{1689182889, 12345};
  EXPECT_EQ(ts_diff(a, a), SignedDuration{});
}

TEST(TsDiff, WholeSeconds) {
  EXPECT_EQ(ts_diff({10, 0}, {6, 0}), SignedDuration::from_seconds(4));
  EXPECT_EQ(ts_diff({6, 0}, {10, 0}), SignedDuration::from_seconds(-4));
}

TEST(TsDiff, HalfSecondFraction) {
  const auto d = ts_diff({0, kHalf}, {0, 0});
  EXPECT_EQ(d.units(), static_cast<int128>(kHalf));
  EXPECT_DOUBLE_EQ(d.to_seconds(), 0.5);
}

TEST(TsAdd, CarryIntoSeconds) {
  const Timestamp t{5, ~uint64_t{0}};
  EXPECT_EQ(ts_add(t, SignedDuration::from_units(1)), (Timestamp{6, 0}));
}

TEST(TsAdd, ZeroIsIdentity) {
  const Timestamp t{123, 456};
  EXPECT_EQ(ts_add(t, SignedDuration{}), t);
}

TEST(TsAdd, NegativeSecond) {
  EXPECT_EQ(ts_add({0, 0}, SignedDuration::from_seconds(-1)), (Timestamp{-1, 0}));
}

TEST(TsAdd, OutOfRangeThrows) {
  const Timestamp t{INT64_MAX, 0};
  EXPECT_THROW(ts_add(t, SignedDuration::from_seconds(1)), RangeError);
}

TEST(TimebaseProperty, AddOfDiffRoundTrips) {
  std::mt19937_64 g(11);
  for (int i = 0; i < 100000; ++i) {
    const auto a = random_ts(g);
    const auto b = random_ts(g);
    ASSERT_EQ(ts_add(b, ts_diff(a, b)), a);
  }
}

TEST(TimebaseProperty, NanosRoundTrip) {
  std::mt19937_64 g(12);
  std::uniform_int_distribution<int64_t> ns(-(int64_t{1} << 62), int64_t{1} << 62);
  for (int i = 0; i < 100000; ++i) {
    const int64_t n = ns(g);
    ASSERT_EQ(Timestamp::from_nanos(n).to_nanos(), n);
    ASSERT_EQ(SignedDuration::from_nanos(n).to_nanos(), n);
  }
  for (const int64_t n : {int64_t{0}, int64_t{1}, int64_t{-1}, int64_t{1} << 62, -(int64_t{1} << 62)}) {
    EXPECT_EQ(Timestamp::from_nanos(n).to_nanos(), n);
  }
}

TEST(TimebaseProperty, OrderingMatchesDiffSign) {
  std::mt19937_64 g(13);
  for (int i = 0; i < 100000; ++i) {
    const auto a = random_ts(g);
    auto b = random_ts(g);
    if (i % 10 == 0) b.seconds = a.seconds;  // exercise the fraction tie-break
    const auto d = ts_diff(a, b);
    ASSERT_EQ(a < b, d.is_negative());
    ASSERT_EQ(a == b, d == SignedDuration{});
  }
}

TEST(TimebaseProperty, NegationExact) {
  std::mt19937_64 g(14);
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_ts(g);
    const auto b = random_ts(g);
    ASSERT_EQ(-ts_diff(a, b), ts_diff(b, a));
  }
}

TEST(Timestamp, TextRoundTrip) {
  const auto t = Timestamp::parse("1689182889.456000000");
  EXPECT_EQ(t.to_string(), "1689182889.456000000");
  EXPECT_EQ(t.to_nanos(), 1689182889456000000);
  EXPECT_EQ(Timestamp::parse("-1.5").to_nanos(), -1500000000);
}

TEST(Timestamp, BytesRoundTrip) {
  const Timestamp t{-42, 0x0123456789abcdefULL};
  const auto b = t.to_bytes();
  EXPECT_EQ(Timestamp::from_bytes(b), t);
}

TEST(SignedDuration, FromSecondsFloatIsExactForBinaryValues) {
  EXPECT_EQ(SignedDuration::from_seconds_f(0.25).units(), static_cast<int128>(uint64_t{1} << 62));
  EXPECT_EQ(SignedDuration::from_seconds_f(-3.0), SignedDuration::from_seconds(-3));
  EXPECT_EQ(SignedDuration::from_micros(150).to_nanos(), 150000);
}

TEST(SignedDuration, FromSecondsFloatTinyNegativeStaysNearZero) {
  // -1e-20 s is a fraction of one 2^-64 s unit; it must not come back as -1 s.
  for (const double s : {-1e-20, -1e-25, -std::ldexp(1.0, -70), -5e-324}) {
    const auto d = SignedDuration::from_seconds_f(s);
    EXPECT_LE(d.abs().units(), 1) << s;
  }
}

TEST(SignedDuration, FromSecondsFloatWithinOneUnit) {
  std::mt19937_64 g(17);
  // Below 0.1 s the unit count fits the 64-bit long double mantissa exactly.
  std::uniform_real_distribution<double> mag(-30, -1);
  for (int i = 0; i < 100000; ++i) {
    const double s = (g() & 1 ? -1 : 1) * std::pow(10.0, mag(g));
    const long double back = static_cast<long double>(SignedDuration::from_seconds_f(s).units());
    const long double want = std::ldexp(static_cast<long double>(s), 64);
    ASSERT_LE(std::fabs(back - want), 1.0L) << s;
  }
}

TEST(Monotonic, NonDecreasing) {
  auto prev = MonotonicInstant::now();
  for (int i = 0; i < 1000; ++i) {
    const auto now = MonotonicInstant::now();
    ASSERT_GE(now, prev);
    prev = now;
  }
}
