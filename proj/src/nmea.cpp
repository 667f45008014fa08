#include <charconv>

#include "gtv/receiver_feed.hpp"

namespace gtv {

namespace {

std::string_view strip_eol(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  return line;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

unsigned parse_digits(const std::string& field, size_t from, size_t count, size_t base_offset) {
  if (from + count > field.size()) throw ParseError("truncated numeric field", base_offset + field.size());
  unsigned v = 0;
  for (size_t i = from; i < from + count; ++i) {
    const char c = field[i];
    if (c < '0' || c > '9') throw ParseError("non-digit in numeric field", base_offset + i);
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  return v;
}

struct TimeOfDay {
  unsigned hour, minute, second;
  uint64_t nanos;
};

// hhmmss[.f{1,9}]
TimeOfDay parse_time_field(const std::string& f, size_t off) {
  if (f.size() < 6) throw ParseError("time field too short", off);
  TimeOfDay t{parse_digits(f, 0, 2, off), parse_digits(f, 2, 2, off), parse_digits(f, 4, 2, off), 0};
  if (t.hour > 23 || t.minute > 59 || t.second > 60) throw ParseError("time field out of range", off);
  if (f.size() > 6) {
    if (f[6] != '.') throw ParseError("expected '.' in time field", off + 6);
    const size_t frac_len = f.size() - 7;
    if (frac_len == 0 || frac_len > 9) throw ParseError("bad fractional seconds", off + 7);
    uint64_t n = parse_digits(f, 7, frac_len, off);
    for (size_t i = frac_len; i < 9; ++i) n *= 10;
    t.nanos = n;
  }
  return t;
}

unsigned days_in_month(int year, unsigned month) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return month == 2 && leap ? 29 : kDays[month - 1];
}

Timestamp make_utc(int year, unsigned month, unsigned day, const TimeOfDay& t, size_t date_off) {
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) {
    throw ParseError("calendar date out of range", date_off);
  }
  const int64_t s = civil_to_unix_seconds(year, month, day, t.hour, t.minute, t.second);
  return ts_add(Timestamp{s, 0}, SignedDuration::from_nanos(static_cast<int64_t>(t.nanos)));
}

const std::string& field_at(const NmeaSentence& s, size_t i) {
  if (i >= s.fields.size()) {
    const size_t off = s.field_offsets.empty() ? 0 : s.field_offsets.back() + s.fields.back().size();
    throw ParseError(s.type + " sentence missing field " + std::to_string(i), off);
  }
  return s.fields[i];
}

}  // namespace

uint8_t nmea_checksum(std::string_view body) {
  uint8_t x = 0;
  for (char c : body) x ^= static_cast<uint8_t>(c);
  return x;
}

NmeaSentence split_nmea(std::string_view raw) {
  const std::string_view line = strip_eol(raw);
  if (line.empty() || (line[0] != '$' && line[0] != '!')) throw ParseError("sentence must start with '$'", 0);
  const size_t star = line.find('*');
  if (star == std::string_view::npos) throw ParseError("missing checksum delimiter '*'", line.size());
  if (line.size() != star + 3) throw ParseError("checksum must be two hex digits", star + 1);
  const int hi = hex_value(line[star + 1]);
  const int lo = hex_value(line[star + 2]);
  if (hi < 0) throw ParseError("invalid checksum digit", star + 1);
  if (lo < 0) throw ParseError("invalid checksum digit", star + 2);

  NmeaSentence s;
  s.checksum = static_cast<uint8_t>(hi << 4 | lo);
  const std::string_view body = line.substr(1, star - 1);
  if (nmea_checksum(body) != s.checksum) throw IntegrityError("NMEA checksum mismatch", star + 1);

  size_t start = 0;
  while (true) {
    const size_t comma = body.find(',', start);
    const size_t end = comma == std::string_view::npos ? body.size() : comma;
    s.fields.emplace_back(body.substr(start, end - start));
    s.field_offsets.push_back(start + 1);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  const std::string& address = s.fields[0];
  for (size_t i = 0; i < address.size(); ++i) {
    const char c = address[i];
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) throw ParseError("bad address character", 1 + i);
  }
  if (address.size() == 5) {
    s.talker = address.substr(0, 2);
    s.type = address.substr(2);
  } else if (!address.empty() && address[0] == 'P') {
    s.talker = "P";
    s.type = address.substr(1);
  } else {
    throw ParseError("malformed sentence address", 1);
  }
  return s;
}

std::variant<EpochRecord, NmeaSkip> parse_nmea(std::string_view line, MonotonicInstant t_mono,
                                               const std::string& source_id) {
  const NmeaSentence s = split_nmea(line);
  EpochRecord rec;
  rec.t_mono = t_mono;
  rec.leap_applied = true;  // NMEA time fields are UTC
  rec.source_id = source_id;

  if (s.type == "ZDA") {
    const std::string& time = field_at(s, 1);
    const std::string& dd = field_at(s, 2);
    const std::string& mm = field_at(s, 3);
    const std::string& yyyy = field_at(s, 4);
    if (time.empty() || dd.empty() || mm.empty() || yyyy.empty()) {
      rec.fix_valid = false;
      return rec;
    }
    const TimeOfDay tod = parse_time_field(time, s.field_offsets[1]);
    if (dd.size() != 2) throw ParseError("day must be two digits", s.field_offsets[2]);
    if (mm.size() != 2) throw ParseError("month must be two digits", s.field_offsets[3]);
    if (yyyy.size() != 4) throw ParseError("year must be four digits", s.field_offsets[4]);
    const unsigned day = parse_digits(dd, 0, 2, s.field_offsets[2]);
    const unsigned month = parse_digits(mm, 0, 2, s.field_offsets[3]);
    const int year = static_cast<int>(parse_digits(yyyy, 0, 4, s.field_offsets[4]));
    rec.t_gnss = make_utc(year, month, day, tod, s.field_offsets[2]);
    rec.fix_valid = true;
    return rec;
  }

  if (s.type == "RMC") {
    const std::string& time = field_at(s, 1);
    const std::string& status = field_at(s, 2);
    const std::string& date = field_at(s, 9);
    if (status == "A") {
      rec.fix_valid = true;
    } else if (status == "V" || status.empty()) {
      rec.fix_valid = false;
    } else {
      throw ParseError("RMC status must be A or V", s.field_offsets[2]);
    }
    if (time.empty() || date.empty()) {
      rec.fix_valid = false;
      return rec;
    }
    const TimeOfDay tod = parse_time_field(time, s.field_offsets[1]);
    if (date.size() != 6) throw ParseError("RMC date must be ddmmyy", s.field_offsets[9]);
    const unsigned day = parse_digits(date, 0, 2, s.field_offsets[9]);
    const unsigned month = parse_digits(date, 2, 2, s.field_offsets[9]);
    const unsigned yy = parse_digits(date, 4, 2, s.field_offsets[9]);
    const int year = static_cast<int>(yy < 80 ? 2000 + yy : 1900 + yy);
    rec.t_gnss = make_utc(year, month, day, tod, s.field_offsets[9]);
    return rec;
  }

  return NmeaSkip{s.type};
}

}  // namespace gtv
