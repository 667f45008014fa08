#include <gtest/gtest.h>

#include <cstdio>
#include <random>
#include <sstream>

#include "gtv/receiver_feed.hpp"

using namespace gtv;

namespace {

// Brute-force day counting, independent of the library's calendar code.
int64_t days_since_1970(int year, int month, int day) {
  auto leap = [](int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; };
  static const int kMonth[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int64_t days = 0;
  for (int y = 1970; y < year; ++y) days += leap(y) ? 366 : 365;
  for (int m = 1; m < month; ++m) days += kMonth[m - 1] + (m == 2 && leap(year) ? 1 : 0);
  return days + day - 1;
}

std::string with_checksum(const std::string& body) {
  uint8_t c = 0;
  for (const char ch : body) c ^= static_cast<uint8_t>(ch);
  char tail[8];
  std::snprintf(tail, sizeof tail, "*%02X", c);
  return "$" + body + tail;
}

EpochRecord record(uint64_t mono, int64_t sec) {
  EpochRecord r;
  r.t_mono = {mono};
  r.t_gnss = {sec, 0};
  r.fix_valid = true;
  r.source_id = "test";
  return r;
}

}  // namespace

TEST(Nmea, ZdaExample) {
  const auto line = with_checksum("GPZDA,172809.456,12,07,2023,00,00");
  const auto out = parse_nmea(line, {77});
  ASSERT_TRUE(std::holds_alternative<EpochRecord>(out));
  const auto& r = std::get<EpochRecord>(out);
  const int64_t expect_s = days_since_1970(2023, 7, 12) * 86400 + 17 * 3600 + 28 * 60 + 9;
  EXPECT_EQ(r.t_gnss.to_nanos(), expect_s * 1'000'000'000 + 456'000'000);
  EXPECT_TRUE(r.fix_valid);
  EXPECT_EQ(r.t_mono.nanos, 77u);
}

TEST(Nmea, ChecksumFlipIsIntegrityError) {
  auto line = with_checksum("GPZDA,172809.456,12,07,2023,00,00");
  line.back() = line.back() == '0' ? '1' : '0';
  EXPECT_THROW(parse_nmea(line, {0}), IntegrityError);
}

TEST(Nmea, RmcVoidStatusClearsFix) {
  const auto line = with_checksum("GPRMC,172809.00,V,4807.038,N,01131.000,E,0.0,0.0,120723,,,N");
  const auto out = parse_nmea(line, {0});
  ASSERT_TRUE(std::holds_alternative<EpochRecord>(out));
  EXPECT_FALSE(std::get<EpochRecord>(out).fix_valid);
}

TEST(Nmea, RmcActiveStatus) {
  const auto line = with_checksum("GPRMC,000000.00,A,4807.038,N,01131.000,E,0.0,0.0,010100,,,A");
  const auto r = std::get<EpochRecord>(parse_nmea(line, {0}));
  EXPECT_TRUE(r.fix_valid);
  EXPECT_EQ(r.t_gnss.seconds, days_since_1970(2000, 1, 1) * 86400);
}

TEST(Nmea, UnsupportedSentenceSkips) {
  const auto out = parse_nmea(with_checksum("GPGSV,1,1,00"), {0});
  ASSERT_TRUE(std::holds_alternative<NmeaSkip>(out));
  EXPECT_EQ(std::get<NmeaSkip>(out).type, "GSV");
}

TEST(Nmea, MalformedFieldNamesOffset) {
  const auto line = with_checksum("GPZDA,17x809.456,12,07,2023,00,00");
  try {
    parse_nmea(line, {0});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 9u);  // the offending character
  }
}

TEST(Nmea, ChecksumDefinition) {
  EXPECT_EQ(nmea_checksum("GPZDA"), 'G' ^ 'P' ^ 'Z' ^ 'D' ^ 'A');
}

TEST(NmeaProperty, ArbitraryBytesNeverCrash) {
  std::mt19937_64 g(21);
  const std::string seed = with_checksum("GPZDA,172809.456,12,07,2023,00,00");
  for (int i = 0; i < 50000; ++i) {
    std::string line;
    if (i % 2 == 0) {
      line = seed;
      const int edits = 1 + static_cast<int>(g() % 4);
      for (int e = 0; e < edits; ++e) line[g() % line.size()] = static_cast<char>(g() & 0xff);
    } else {
      line.resize(g() % 90);
      for (auto& c : line) c = static_cast<char>(g() & 0xff);
      if (!line.empty() && g() % 2) line[0] = '$';
    }
    try {
      parse_nmea(line, {0});
    } catch (const ParseError& e) {
      ASSERT_LE(e.offset(), line.size());
    } catch (const IntegrityError& e) {
      ASSERT_LE(e.offset(), line.size());
    }
  }
}

TEST(Jsonl, RoundTrip) {
  EpochRecord r = record(5, 1689182889);
  r.t_gnss.fraction = 0xfedcba9876543210ULL;
  r.clock_bias_ns = -12;
  r.leap_applied = false;
  EXPECT_EQ(epoch_from_jsonl(to_jsonl(r)), r);
}

TEST(Jsonl, SchemaViolation) {
  EXPECT_THROW(epoch_from_jsonl(R"({"t_mono_ns": 1})"), ParseError);
  EXPECT_THROW(epoch_from_jsonl("not json"), ParseError);
}

TEST(ReadEpochStream, EmptyInput) {
  std::istringstream in("");
  EXPECT_TRUE(read_epoch_stream(in, FeedFormat::Jsonl).empty());
}

TEST(ReadEpochStream, OrderPreserved) {
  std::ostringstream s;
  for (int i = 0; i < 3; ++i) s << to_jsonl(record(10 + i, 100 + i)) << '\n';
  std::istringstream in(s.str());
  const auto out = read_epoch_stream(in, FeedFormat::Jsonl);
  ASSERT_EQ(out.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out[i].t_gnss.seconds, 100 + i);
}

TEST(ReadEpochStream, RegressionIsOrderingErrorAtIndex2) {
  std::ostringstream s;
  s << to_jsonl(record(20, 1)) << '\n' << to_jsonl(record(10, 2)) << '\n';
  std::istringstream in(s.str());
  try {
    read_epoch_stream(in, FeedFormat::Jsonl);
    FAIL() << "expected OrderingError";
  } catch (const OrderingError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(ReadEpochStream, NmeaCountsIntegrityErrors) {
  auto bad = with_checksum("GPZDA,172809.456,12,07,2023,00,00");
  bad.back() = bad.back() == '0' ? '1' : '0';
  std::istringstream in(with_checksum("GPZDA,172809.456,12,07,2023,00,00") + "\r\n" + bad + "\r\n" +
                        with_checksum("GPGSV,1,1,00") + "\r\n");
  uint64_t clock = 0;
  EpochReader reader(in, FeedFormat::Nmea, [&] { return MonotonicInstant{++clock}; });
  int n = 0;
  while (reader.next()) ++n;
  EXPECT_EQ(n, 1);
  EXPECT_EQ(reader.integrity_errors(), 1u);
  EXPECT_EQ(reader.skipped(), 1u);
}

TEST(GpsTow, EpochDefinition) {
  const auto t = gps_tow_to_utc(0, 0, 0);
  EXPECT_EQ(t, (Timestamp{days_since_1970(1980, 1, 6) * 86400, 0}));
}

TEST(GpsTow, Week2297AgainstDayCounting) {
  // Week 2297 starts on a Sunday; brute-force the date by walking days from the GPS epoch.
  int y = 1980, m = 1, d = 6;
  auto leap = [](int yy) { return (yy % 4 == 0 && yy % 100 != 0) || yy % 400 == 0; };
  const int kMonth[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  for (int i = 0; i < 2297 * 7; ++i) {
    const int len = kMonth[m - 1] + (m == 2 && leap(y) ? 1 : 0);
    if (++d > len) {
      d = 1;
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  EXPECT_EQ(y, 2024);
  EXPECT_EQ(m, 1);
  EXPECT_EQ(d, 14);
  const auto t = gps_tow_to_utc(2297, 0, 18);
  EXPECT_EQ(t, (Timestamp{days_since_1970(y, m, d) * 86400 - 18, 0}));
}

TEST(GpsTow, OutOfRange) {
  EXPECT_THROW(gps_tow_to_utc(0, 604800, 0), DomainError);
  EXPECT_THROW(gps_tow_to_utc(0, -0.5, 0), DomainError);
}

TEST(GpsTow, FractionalTowExact) {
  const auto t = gps_tow_to_utc(1, 0.5, 0);
  EXPECT_EQ(t.fraction, uint64_t{1} << 63);
}

TEST(GpsTowProperty, LeapLinearity) {
  std::mt19937_64 g(22);
  std::uniform_real_distribution<double> tow(0, 604799.999);
  for (int i = 0; i < 10000; ++i) {
    const int w = static_cast<int>(g() % 3000);
    const double t = tow(g);
    const int l = static_cast<int>(g() % 40);
    ASSERT_EQ(ts_add(gps_tow_to_utc(w, t, l), SignedDuration::from_seconds(1)), gps_tow_to_utc(w, t, l - 1));
  }
}

TEST(Civil, MatchesDayCounting) {
  for (int y = 1970; y < 2100; y += 7) {
    for (unsigned mo = 1; mo <= 12; mo += 5) {
      EXPECT_EQ(civil_to_unix_seconds(y, mo, 28, 23, 59, 58), days_since_1970(y, mo, 28) * 86400 + 86398);
    }
  }
}
