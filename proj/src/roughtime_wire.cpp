#include <algorithm>
#include <cstring>

#include "gtv/roughtime.hpp"

namespace gtv::roughtime {

namespace {

constexpr int64_t kMjdUnixEpoch = 40587;
constexpr int64_t kMicrosPerDay = 86'400'000'000;

void put_u32(Bytes& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(ByteView b, size_t off) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = v << 8 | b[off + i];
  return v;
}

[[noreturn]] void malformed(const std::string& what) {
  throw RoughtimeError(VerifyFailure::Malformed, what);
}

}  // namespace

std::string tag_name(uint32_t tag) {
  std::string s;
  for (int i = 0; i < 4; ++i) {
    const auto c = static_cast<char>(tag >> (8 * i));
    if (c >= 0x20 && c < 0x7f) {
      s.push_back(c);
    } else if (c != 0) {
      s += "\\x" + to_hex(ByteView(reinterpret_cast<const uint8_t*>(&c), 1));
    }
  }
  return s;
}

Bytes encode_message(const Message& msg) {
  const auto n = static_cast<uint32_t>(msg.size());
  Bytes out;
  put_u32(out, n);
  uint32_t offset = 0;
  size_t i = 0;
  for (const auto& [tag, value] : msg) {
    if (value.size() % 4 != 0) throw RoughtimeError(VerifyFailure::Malformed, "value length not a multiple of 4");
    if (i++ > 0) put_u32(out, offset);
    offset += static_cast<uint32_t>(value.size());
  }
  for (const auto& [tag, value] : msg) put_u32(out, tag);
  for (const auto& [tag, value] : msg) out.insert(out.end(), value.begin(), value.end());
  return out;
}

Message decode_message(ByteView wire) {
  if (wire.size() < 4 || wire.size() % 4 != 0) malformed("message length must be a positive multiple of 4");
  const uint32_t n = get_u32(wire, 0);
  if (n == 0) {
    if (wire.size() != 4) malformed("empty message with trailing bytes");
    return {};
  }
  if (n > wire.size() / 8) malformed("tag count exceeds message size");
  const size_t header = 8ull * n;
  const size_t values_len = wire.size() - header;
  std::vector<uint32_t> offsets{0};
  for (uint32_t i = 1; i < n; ++i) offsets.push_back(get_u32(wire, 4 * i));
  offsets.push_back(static_cast<uint32_t>(values_len));

  Message msg;
  uint32_t prev_tag = 0;
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t tag = get_u32(wire, 4 * n + 4 * i);
    if (i > 0 && tag <= prev_tag) malformed("tags not strictly increasing");
    prev_tag = tag;
    const uint32_t start = offsets[i];
    const uint32_t end = offsets[i + 1];
    if (start % 4 != 0 || end % 4 != 0 || start > end || end > values_len) {
      malformed("bad offset for tag " + tag_name(tag));
    }
    msg.emplace(tag, Bytes(wire.begin() + header + start, wire.begin() + header + end));
  }
  return msg;
}

const WireProfile& profile(std::string_view name) {
  static const WireProfile kIetf07{"ietf-07", 0x80000007u, 32, kTagPadIetf, 1024, true, 32,
                                   TimeEncoding::MjdMicros, RadiusUnit::Micros};
  static const WireProfile kGoogle{"google", std::nullopt, 64, kTagPadGoogle, 1024, false, 64,
                                   TimeEncoding::UnixMicros, RadiusUnit::Micros};
  if (name == kIetf07.name) return kIetf07;
  if (name == kGoogle.name) return kGoogle;
  throw ConfigError("unknown Roughtime protocol version '" + std::string(name) + "'");
}

const WireProfile& default_profile() { return profile("ietf-07"); }

Bytes frame_packet(const WireProfile& p, ByteView message) {
  if (!p.framed) return Bytes(message.begin(), message.end());
  Bytes out;
  put_u32(out, static_cast<uint32_t>(kFrameMagic));
  put_u32(out, static_cast<uint32_t>(kFrameMagic >> 32));
  put_u32(out, static_cast<uint32_t>(message.size()));
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

ByteView unframe_packet(const WireProfile& p, ByteView packet) {
  if (!p.framed) return packet;
  if (packet.size() < 12) malformed("packet shorter than frame header");
  const uint64_t magic = static_cast<uint64_t>(get_u32(packet, 4)) << 32 | get_u32(packet, 0);
  if (magic != kFrameMagic) malformed("bad ROUGHTIM magic");
  const uint32_t len = get_u32(packet, 8);
  if (len != packet.size() - 12) malformed("frame length mismatch");
  return packet.subspan(12);
}

uint64_t encode_time(const WireProfile& p, Timestamp t) {
  const int64_t us = t.to_nanos() / 1000 - (t.to_nanos() % 1000 < 0 ? 1 : 0);
  if (p.time_encoding == TimeEncoding::UnixMicros) return static_cast<uint64_t>(us);
  int64_t day = us / kMicrosPerDay;
  int64_t within = us % kMicrosPerDay;
  if (within < 0) {
    within += kMicrosPerDay;
    --day;
  }
  return static_cast<uint64_t>(day + kMjdUnixEpoch) << 40 | static_cast<uint64_t>(within);
}

Timestamp decode_time(const WireProfile& p, uint64_t raw) {
  if (p.time_encoding == TimeEncoding::UnixMicros) {
    return Timestamp::from_nanos(static_cast<int64_t>(raw) * 1000);
  }
  const int64_t mjd = static_cast<int64_t>(raw >> 40);
  const int64_t within = static_cast<int64_t>(raw & ((uint64_t{1} << 40) - 1));
  if (within >= kMicrosPerDay) malformed("microseconds of day out of range");
  const int64_t us = (mjd - kMjdUnixEpoch) * kMicrosPerDay + within;
  return Timestamp::from_nanos(us * 1000);
}

uint32_t encode_radius(const WireProfile& p, SignedDuration r) {
  const int64_t ns = r.to_nanos();
  return static_cast<uint32_t>(p.radius_unit == RadiusUnit::Micros ? ns / 1000 : ns / kNanosPerSecond);
}

SignedDuration decode_radius(const WireProfile& p, uint32_t raw) {
  return p.radius_unit == RadiusUnit::Micros ? SignedDuration::from_micros(raw)
                                             : SignedDuration::from_seconds(raw);
}

Bytes build_request(const WireProfile& p, ByteView nonce) {
  if (nonce.size() != p.nonce_size) {
    throw InputError("nonce must be " + std::to_string(p.nonce_size) + " bytes for " + p.name);
  }
  Message msg;
  msg[kTagNonc] = Bytes(nonce.begin(), nonce.end());
  if (p.version) {
    Bytes v;
    put_u32(v, *p.version);
    msg[kTagVer] = v;
  }
  msg[p.pad_tag] = {};
  // The pad tag sorts last in both profiles, so growing its value only
  // extends the tail of the message.
  const size_t frame = p.framed ? 12 : 0;
  const size_t base = encode_message(msg).size() + frame;
  if (base < p.min_request_size) msg[p.pad_tag].assign(p.min_request_size - base, 0);
  return frame_packet(p, encode_message(msg));
}

Bytes decode_request_nonce(const WireProfile& p, ByteView packet) {
  const Message msg = decode_message(unframe_packet(p, packet));
  const auto it = msg.find(kTagNonc);
  if (it == msg.end() || it->second.size() != p.nonce_size) malformed("request without a valid NONC");
  return it->second;
}

Bytes merkle_leaf(const WireProfile& p, ByteView data) {
  const auto d = crypto::Sha512().update(uint8_t{0x00}).update(data).finish();
  return Bytes(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(p.tree_hash_size));
}

Bytes merkle_node(const WireProfile& p, ByteView left, ByteView right) {
  const auto d = crypto::Sha512().update(uint8_t{0x01}).update(left).update(right).finish();
  return Bytes(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(p.tree_hash_size));
}

}  // namespace gtv::roughtime
