#pragma once

// Ingestion of GNSS receiver time-solution epochs.

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gtv/error.hpp"
#include "gtv/timebase.hpp"

namespace gtv {

/// One receiver time-solution epoch. Detectors must ignore t_gnss when
/// fix_valid is false.
struct EpochRecord {
  MonotonicInstant t_mono;
  Timestamp t_gnss;
  bool fix_valid = false;
  bool leap_applied = true;
  std::optional<int64_t> clock_bias_ns;
  std::string source_id;

  bool operator==(const EpochRecord&) const = default;
};

std::string to_jsonl(const EpochRecord& r);
/// Parses one JSONL line; throws ParseError on schema violations.
EpochRecord epoch_from_jsonl(std::string_view line);

class ParseError : public Error {
 public:
  ParseError(const std::string& what, size_t offset)
      : Error(ErrorClass::Parse, what + " at byte " + std::to_string(offset)), offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

/// Checksum mismatch. Counted by stream readers rather than treated as fatal.
class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& what, size_t offset)
      : Error(ErrorClass::Integrity, what + " at byte " + std::to_string(offset)), offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

class OrderingError : public Error {
 public:
  OrderingError(const std::string& what, size_t index)
      : Error(ErrorClass::Ordering, what), index_(index) {}
  /// 1-based record index of the offending record.
  size_t index() const { return index_; }

 private:
  size_t index_;
};

struct NmeaSentence {
  std::string talker;  // e.g. "GP"
  std::string type;    // e.g. "ZDA"
  std::vector<std::string> fields;
  std::vector<size_t> field_offsets;  // byte offset of each field in the line
  uint8_t checksum = 0;
};

/// XOR of the bytes strictly between '$' and '*'.
uint8_t nmea_checksum(std::string_view body);

/// Splits and checksums a sentence without interpreting it.
NmeaSentence split_nmea(std::string_view line);

/// Returned for well-formed sentences that carry no time solution.
struct NmeaSkip {
  std::string type;
};

/// Parses one ZDA or RMC sentence into an epoch stamped with `t_mono`.
std::variant<EpochRecord, NmeaSkip> parse_nmea(std::string_view line, MonotonicInstant t_mono,
                                               const std::string& source_id = "nmea");

/// Seconds since the Unix epoch of a UTC civil date-time.
int64_t civil_to_unix_seconds(int year, unsigned month, unsigned day, unsigned hour, unsigned minute,
                              unsigned second);

/// GPS week/time-of-week to UTC: 1980-01-06T00:00:00Z + week*604800 + tow - leap.
/// The binary value of `tow_s` is converted exactly.
Timestamp gps_tow_to_utc(int week, double tow_s, int leap_s);

enum class FeedFormat { Jsonl, Nmea };

/// Pull-style reader enforcing non-decreasing t_mono. NMEA input is stamped
/// with the reader's clock at ingestion; JSONL records carry their own.
class EpochReader {
 public:
  using Clock = std::function<MonotonicInstant()>;

  EpochReader(std::istream& in, FeedFormat format, Clock clock = MonotonicInstant::now);

  /// Next record, or nullopt at end of input. Throws OrderingError on a
  /// t_mono regression and ParseError on malformed JSONL.
  std::optional<EpochRecord> next();

  size_t integrity_errors() const { return integrity_errors_; }
  size_t parse_errors() const { return parse_errors_; }
  size_t skipped() const { return skipped_; }

 private:
  std::istream& in_;
  FeedFormat format_;
  Clock clock_;
  std::optional<MonotonicInstant> last_mono_;
  size_t index_ = 0;
  size_t integrity_errors_ = 0;
  size_t parse_errors_ = 0;
  size_t skipped_ = 0;
};

std::vector<EpochRecord> read_epoch_stream(std::istream& in, FeedFormat format);

}  // namespace gtv
