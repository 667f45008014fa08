#pragma once

// Fixed-point time representation shared by every module.
//
// Timestamp is a 64.64 fixed-point instant on the UTC scale (seconds since
// the Unix epoch plus a binary fraction in units of 2^-64 s). SignedDuration
// is the exact difference of two Timestamps, held as a signed 128-bit count
// of the same 2^-64 s units. All arithmetic between the two is exact.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>

#include "gtv/error.hpp"

namespace gtv {

using int128 = __int128;
using uint128 = unsigned __int128;

inline constexpr int64_t kNanosPerSecond = 1'000'000'000;

class SignedDuration {
 public:
  constexpr SignedDuration() = default;

  static constexpr SignedDuration from_units(int128 units) { return SignedDuration(units); }
  static constexpr SignedDuration from_seconds(int64_t s) {
    return SignedDuration(static_cast<int128>(s) << 64);
  }
  static SignedDuration from_nanos(int64_t ns);
  static SignedDuration from_micros(int64_t us);
  /// Exact conversion of the binary value of `s`; fractional bits below
  /// 2^-64 s are truncated toward negative infinity.
  static SignedDuration from_seconds_f(double s);

  constexpr int128 units() const { return units_; }
  /// Floor of the value in nanoseconds.
  int64_t to_nanos() const;
  double to_seconds() const;

  constexpr SignedDuration operator-() const { return SignedDuration(-units_); }
  constexpr SignedDuration operator+(SignedDuration o) const { return SignedDuration(units_ + o.units_); }
  constexpr SignedDuration operator-(SignedDuration o) const { return SignedDuration(units_ - o.units_); }
  constexpr SignedDuration& operator+=(SignedDuration o) {
    units_ += o.units_;
    return *this;
  }
  /// Halving truncates toward zero (one unit = 2^-64 s).
  constexpr SignedDuration half() const { return SignedDuration(units_ / 2); }
  constexpr SignedDuration abs() const { return SignedDuration(units_ < 0 ? -units_ : units_); }
  constexpr bool is_negative() const { return units_ < 0; }

  constexpr auto operator<=>(const SignedDuration&) const = default;

  /// Decimal seconds with nine fractional digits (nanosecond floor).
  std::string to_string() const;

 private:
  constexpr explicit SignedDuration(int128 u) : units_(u) {}
  int128 units_ = 0;
};

struct Timestamp {
  int64_t seconds = 0;
  uint64_t fraction = 0;

  constexpr auto operator<=>(const Timestamp&) const = default;

  /// Nanoseconds since the Unix epoch; to_nanos(from_nanos(n)) == n.
  static Timestamp from_nanos(int64_t ns);
  int64_t to_nanos() const;

  /// Decimal seconds with nine fractional digits, e.g. "1689182889.456000000".
  std::string to_string() const;
  /// Parses the canonical text form (up to nine fractional digits).
  static Timestamp parse(const std::string& text);

  /// 16-byte big-endian (seconds, fraction).
  std::array<uint8_t, 16> to_bytes() const;
  static Timestamp from_bytes(std::span<const uint8_t, 16> bytes);
};

/// Exact a - b.
SignedDuration ts_diff(Timestamp a, Timestamp b);
/// Exact t + d; throws RangeError when the result leaves the Timestamp range.
Timestamp ts_add(Timestamp t, SignedDuration d);

/// Local free-running monotonic scale (CLOCK_MONOTONIC in live operation,
/// a simulated counter in replays).
struct MonotonicInstant {
  uint64_t nanos = 0;

  constexpr auto operator<=>(const MonotonicInstant&) const = default;

  static MonotonicInstant now();
  static constexpr MonotonicInstant from_seconds(double s) {
    return MonotonicInstant{static_cast<uint64_t>(s * 1e9)};
  }
};

/// Signed elapsed seconds b - a on the monotonic scale.
inline double mono_elapsed_s(MonotonicInstant a, MonotonicInstant b) {
  return (static_cast<double>(static_cast<int64_t>(b.nanos - a.nanos))) / 1e9;
}

}  // namespace gtv
