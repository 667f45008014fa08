#include "gtv/timebase.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace gtv {

const char* to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::Range: return "range";
    case ErrorClass::Domain: return "domain";
    case ErrorClass::Input: return "input";
    case ErrorClass::Parse: return "parse";
    case ErrorClass::Integrity: return "integrity";
    case ErrorClass::Ordering: return "ordering";
    case ErrorClass::Calibration: return "calibration";
    case ErrorClass::Configuration: return "configuration";
    case ErrorClass::Validation: return "validation";
    case ErrorClass::Staleness: return "staleness";
    case ErrorClass::Protocol: return "protocol";
    case ErrorClass::Authentication: return "authentication";
    case ErrorClass::Unreachable: return "unreachable";
    case ErrorClass::Crypto: return "crypto";
  }
  return "unknown";
}

namespace {

constexpr uint128 kFracMask = (static_cast<uint128>(1) << 64) - 1;

// Floor division of a signed 128-bit unit count into (whole seconds, fraction).
void split_units(int128 units, int128& whole, uint64_t& frac) {
  // Arithmetic shift floors toward negative infinity.
  whole = units >> 64;
  frac = static_cast<uint64_t>(static_cast<uint128>(units) & kFracMask);
}

// Nanosecond remainder in [0, 1e9) -> smallest fraction whose floor maps back.
uint64_t nanos_to_fraction(uint64_t rem_ns) {
  const uint128 num = static_cast<uint128>(rem_ns) << 64;
  return static_cast<uint64_t>((num + kNanosPerSecond - 1) / kNanosPerSecond);
}

uint64_t fraction_to_nanos(uint64_t frac) {
  return static_cast<uint64_t>((static_cast<uint128>(frac) * kNanosPerSecond) >> 64);
}

std::string format_seconds(bool negative, uint128 whole, uint64_t nanos) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%llu.%09llu", negative ? "-" : "",
                static_cast<unsigned long long>(whole), static_cast<unsigned long long>(nanos));
  return buf;
}

}  // namespace

SignedDuration SignedDuration::from_nanos(int64_t ns) {
  int64_t s = ns / kNanosPerSecond;
  int64_t r = ns % kNanosPerSecond;
  if (r < 0) {
    r += kNanosPerSecond;
    --s;
  }
  return from_units((static_cast<int128>(s) << 64) + nanos_to_fraction(static_cast<uint64_t>(r)));
}

SignedDuration SignedDuration::from_micros(int64_t us) {
  return from_nanos(us * 1000);
}

SignedDuration SignedDuration::from_seconds_f(double s) {
  if (!std::isfinite(s) || std::fabs(s) > 9.2e18) throw RangeError("duration out of range");
  // Work on the magnitude: |s| - floor(|s|) is exact and below 1, so the
  // scaled fraction fits in 64 bits. Truncates toward zero.
  const double mag = std::fabs(s);
  const double whole = std::floor(mag);
  const uint64_t f = static_cast<uint64_t>(std::ldexp(mag - whole, 64));
  const int128 units = (static_cast<int128>(static_cast<int64_t>(whole)) << 64) + f;
  return from_units(s < 0 ? -units : units);
}

int64_t SignedDuration::to_nanos() const {
  int128 whole;
  uint64_t frac;
  split_units(units_, whole, frac);
  return static_cast<int64_t>(whole * kNanosPerSecond + fraction_to_nanos(frac));
}

double SignedDuration::to_seconds() const {
  int128 whole;
  uint64_t frac;
  split_units(units_, whole, frac);
  return static_cast<double>(whole) + std::ldexp(static_cast<double>(frac), -64);
}

std::string SignedDuration::to_string() const {
  const bool neg = units_ < 0;
  const uint128 mag = neg ? static_cast<uint128>(-units_) : static_cast<uint128>(units_);
  return format_seconds(neg, mag >> 64, fraction_to_nanos(static_cast<uint64_t>(mag & kFracMask)));
}

Timestamp Timestamp::from_nanos(int64_t ns) {
  const SignedDuration d = SignedDuration::from_nanos(ns);
  int128 whole;
  uint64_t frac;
  split_units(d.units(), whole, frac);
  return Timestamp{static_cast<int64_t>(whole), frac};
}

int64_t Timestamp::to_nanos() const {
  return seconds * kNanosPerSecond + static_cast<int64_t>(fraction_to_nanos(fraction));
}

std::string Timestamp::to_string() const {
  const SignedDuration d = SignedDuration::from_units((static_cast<int128>(seconds) << 64) + fraction);
  if (!d.is_negative()) return d.to_string();
  // Negative instants print their floor in nanoseconds.
  const int128 total_ns = static_cast<int128>(seconds) * kNanosPerSecond + fraction_to_nanos(fraction);
  const uint128 mag = static_cast<uint128>(-total_ns);
  return format_seconds(true, mag / kNanosPerSecond, static_cast<uint64_t>(mag % kNanosPerSecond));
}

Timestamp Timestamp::parse(const std::string& text) {
  size_t pos = 0;
  bool neg = false;
  if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) neg = text[pos++] == '-';
  uint64_t whole = 0;
  size_t digits = 0;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
    whole = whole * 10 + static_cast<uint64_t>(text[pos++] - '0');
    if (++digits > 18) throw InputError("timestamp text out of range: " + text);
  }
  uint64_t nanos = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int frac_digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (frac_digits >= 9) throw InputError("more than nine fractional digits: " + text);
      nanos = nanos * 10 + static_cast<uint64_t>(text[pos++] - '0');
      ++frac_digits;
    }
    for (; frac_digits < 9; ++frac_digits) nanos *= 10;
  }
  if (digits == 0 || pos != text.size()) throw InputError("malformed timestamp text: " + text);
  const int64_t total = static_cast<int64_t>(whole) * kNanosPerSecond + static_cast<int64_t>(nanos);
  return from_nanos(neg ? -total : total);
}

std::array<uint8_t, 16> Timestamp::to_bytes() const {
  std::array<uint8_t, 16> out{};
  const auto s = static_cast<uint64_t>(seconds);
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<uint8_t>(s >> (56 - 8 * i));
    out[8 + i] = static_cast<uint8_t>(fraction >> (56 - 8 * i));
  }
  return out;
}

Timestamp Timestamp::from_bytes(std::span<const uint8_t, 16> bytes) {
  uint64_t s = 0, f = 0;
  for (int i = 0; i < 8; ++i) {
    s = (s << 8) | bytes[i];
    f = (f << 8) | bytes[8 + i];
  }
  return Timestamp{static_cast<int64_t>(s), f};
}

SignedDuration ts_diff(Timestamp a, Timestamp b) {
  const int128 ua = (static_cast<int128>(a.seconds) << 64) + a.fraction;
  const int128 ub = (static_cast<int128>(b.seconds) << 64) + b.fraction;
  return SignedDuration::from_units(ua - ub);
}

Timestamp ts_add(Timestamp t, SignedDuration d) {
  const int128 ut = (static_cast<int128>(t.seconds) << 64) + t.fraction;
  // |ut| < 2^127 and |d| is bounded by the same; detect overflow on the sum.
  int128 sum;
  if (__builtin_add_overflow(ut, d.units(), &sum)) throw RangeError("timestamp addition overflow");
  int128 whole;
  uint64_t frac;
  split_units(sum, whole, frac);
  if (whole > std::numeric_limits<int64_t>::max() || whole < std::numeric_limits<int64_t>::min()) {
    throw RangeError("timestamp out of range");
  }
  return Timestamp{static_cast<int64_t>(whole), frac};
}

MonotonicInstant MonotonicInstant::now() {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now().time_since_epoch())
                      .count();
  return MonotonicInstant{static_cast<uint64_t>(ns)};
}

}  // namespace gtv
