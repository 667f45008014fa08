#include "gtv/receiver_feed.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>

namespace gtv {

namespace {

constexpr int64_t kGpsEpochUnix = 315964800;  // 1980-01-06T00:00:00Z
constexpr int64_t kSecondsPerWeek = 604800;

using nlohmann::json;

}  // namespace

int64_t civil_to_unix_seconds(int year, unsigned month, unsigned day, unsigned hour, unsigned minute,
                              unsigned second) {
  using namespace std::chrono;
  const sys_days d = year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  return static_cast<int64_t>(d.time_since_epoch().count()) * 86400 + hour * 3600 + minute * 60 + second;
}

Timestamp gps_tow_to_utc(int week, double tow_s, int leap_s) {
  if (!(tow_s >= 0.0 && tow_s < static_cast<double>(kSecondsPerWeek))) {
    throw DomainError("time of week must lie in [0, 604800)");
  }
  if (week < 0) throw DomainError("GPS week must be non-negative");
  const Timestamp week_start{kGpsEpochUnix + static_cast<int64_t>(week) * kSecondsPerWeek - leap_s, 0};
  return ts_add(week_start, SignedDuration::from_seconds_f(tow_s));
}

std::string to_jsonl(const EpochRecord& r) {
  json j;
  j["t_mono_ns"] = r.t_mono.nanos;
  j["t_gnss"] = {{"sec", r.t_gnss.seconds}, {"frac", std::to_string(r.t_gnss.fraction)}};
  j["fix_valid"] = r.fix_valid;
  j["leap_applied"] = r.leap_applied;
  j["clock_bias_ns"] = r.clock_bias_ns ? json(*r.clock_bias_ns) : json(nullptr);
  j["source_id"] = r.source_id;
  return j.dump();
}

EpochRecord epoch_from_jsonl(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  auto field = [&](const char* name) -> const json& {
    if (!j.is_object() || !j.contains(name)) throw ParseError(std::string("missing field ") + name, 0);
    return j.at(name);
  };
  EpochRecord r;
  try {
    const json& mono = field("t_mono_ns");
    if (!mono.is_number_unsigned() && !(mono.is_number_integer() && mono.get<int64_t>() >= 0)) {
      throw ParseError("t_mono_ns must be an unsigned integer", 0);
    }
    r.t_mono.nanos = mono.get<uint64_t>();
    const json& t = field("t_gnss");
    if (!t.is_object() || !t.contains("sec") || !t.contains("frac") || !t.at("sec").is_number_integer() ||
        !t.at("frac").is_string()) {
      throw ParseError("t_gnss must be {\"sec\": int, \"frac\": string}", 0);
    }
    r.t_gnss.seconds = t.at("sec").get<int64_t>();
    const std::string frac = t.at("frac").get<std::string>();
    size_t used = 0;
    if (frac.empty() || frac[0] == '-') throw ParseError("frac must be an unsigned decimal string", 0);
    r.t_gnss.fraction = std::stoull(frac, &used, 10);
    if (used != frac.size()) throw ParseError("frac must be an unsigned decimal string", 0);
    r.fix_valid = field("fix_valid").get<bool>();
    r.leap_applied = field("leap_applied").get<bool>();
    const json& bias = field("clock_bias_ns");
    if (!bias.is_null()) r.clock_bias_ns = bias.get<int64_t>();
    r.source_id = field("source_id").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema violation: ") + e.what(), 0);
  } catch (const std::out_of_range&) {
    throw ParseError("frac exceeds 64 bits", 0);
  } catch (const std::invalid_argument&) {
    throw ParseError("frac must be an unsigned decimal string", 0);
  }
  return r;
}

EpochReader::EpochReader(std::istream& in, FeedFormat format, Clock clock)
    : in_(in), format_(format), clock_(std::move(clock)) {}

std::optional<EpochRecord> EpochReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::optional<EpochRecord> rec;
    if (format_ == FeedFormat::Jsonl) {
      rec = epoch_from_jsonl(line);
    } else {
      try {
        auto parsed = parse_nmea(line, clock_());
        if (auto* e = std::get_if<EpochRecord>(&parsed)) {
          rec = std::move(*e);
        } else {
          ++skipped_;
        }
      } catch (const IntegrityError&) {
        ++integrity_errors_;
      } catch (const ParseError&) {
        ++parse_errors_;
      }
    }
    if (!rec) continue;
    ++index_;
    if (last_mono_ && rec->t_mono < *last_mono_) {
      throw OrderingError("t_mono regression at record " + std::to_string(index_), index_);
    }
    last_mono_ = rec->t_mono;
    return rec;
  }
  return std::nullopt;
}

std::vector<EpochRecord> read_epoch_stream(std::istream& in, FeedFormat format) {
  EpochReader reader(in, format);
  std::vector<EpochRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

}  // namespace gtv
