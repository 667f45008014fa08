#include "gtv/nts.hpp"

namespace gtv::nts {

namespace {

constexpr size_t kHeaderSize = 48;
constexpr size_t kMinEfSize = 16;

void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u32(Bytes& out, uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get_u16(ByteView b, size_t off) { return static_cast<uint16_t>(b[off] << 8 | b[off + 1]); }

uint32_t get_u32(ByteView b, size_t off) {
  uint32_t v = 0;
  for (size_t i = 0; i < 4; ++i) v = v << 8 | b[off + i];
  return v;
}

uint64_t get_u64(ByteView b, size_t off) {
  uint64_t v = 0;
  for (size_t i = 0; i < 8; ++i) v = v << 8 | b[off + i];
  return v;
}

size_t pad4(size_t n) { return (n + 3) & ~size_t{3}; }

[[noreturn]] void malformed(const std::string& what) { throw NtsError(NtsFailure::Malformed, what); }

// Walks extension fields starting at `off`; calls f(type, header_offset, body_view).
template <typename F>
void walk_efs(ByteView wire, size_t off, F&& f) {
  while (off < wire.size()) {
    if (off + 4 > wire.size()) malformed("truncated extension field header");
    const uint16_t type = get_u16(wire, off);
    const size_t len = get_u16(wire, off + 2);
    if (len < 4 || len % 4 != 0 || off + len > wire.size()) malformed("bad extension field length");
    f(type, off, wire.subspan(off + 4, len - 4));
    off += len;
  }
}

}  // namespace

uint64_t to_ntp(Timestamp t, int era) {
  const int64_t sec = t.seconds + kNtpUnixOffset - static_cast<int64_t>(era) * (int64_t{1} << 32);
  if (sec < 0 || sec >= (int64_t{1} << 32)) {
    throw RangeError("timestamp " + t.to_string() + " outside NTP era " + std::to_string(era));
  }
  return static_cast<uint64_t>(sec) << 32 | t.fraction >> 32;
}

Timestamp from_ntp(uint64_t ntp, int era) {
  Timestamp t;
  t.seconds = static_cast<int64_t>(ntp >> 32) + static_cast<int64_t>(era) * (int64_t{1} << 32) - kNtpUnixOffset;
  t.fraction = (ntp & 0xffffffffULL) << 32;
  return t;
}

Bytes encode_ef(const ExtensionField& ef) {
  size_t body = pad4(ef.body.size());
  if (body + 4 < kMinEfSize) body = kMinEfSize - 4;
  if (body + 4 > 0xffff) throw InputError("extension field too long");
  Bytes out;
  put_u16(out, ef.type);
  put_u16(out, static_cast<uint16_t>(body + 4));
  out.insert(out.end(), ef.body.begin(), ef.body.end());
  out.resize(4 + body, 0);
  return out;
}

Bytes encode_packet(const NtpPacket& p) {
  Bytes out;
  out.push_back(static_cast<uint8_t>((p.leap & 3) << 6 | (p.version & 7) << 3 | (p.mode & 7)));
  out.push_back(p.stratum);
  out.push_back(static_cast<uint8_t>(p.poll));
  out.push_back(static_cast<uint8_t>(p.precision));
  put_u32(out, p.root_delay);
  put_u32(out, p.root_dispersion);
  put_u32(out, p.reference_id);
  put_u64(out, p.reference_ts);
  put_u64(out, p.origin_ts);
  put_u64(out, p.receive_ts);
  put_u64(out, p.transmit_ts);
  for (const ExtensionField& ef : p.extensions) {
    const Bytes e = encode_ef(ef);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

std::vector<ExtensionField> decode_efs(ByteView wire) {
  std::vector<ExtensionField> out;
  walk_efs(wire, 0, [&](uint16_t type, size_t, ByteView body) {
    out.push_back({type, Bytes(body.begin(), body.end())});
  });
  return out;
}

NtpPacket decode_packet(ByteView wire) {
  if (wire.size() < kHeaderSize) malformed("NTP packet shorter than 48 bytes");
  NtpPacket p;
  p.leap = wire[0] >> 6;
  p.version = (wire[0] >> 3) & 7;
  p.mode = wire[0] & 7;
  p.stratum = wire[1];
  p.poll = static_cast<int8_t>(wire[2]);
  p.precision = static_cast<int8_t>(wire[3]);
  p.root_delay = get_u32(wire, 4);
  p.root_dispersion = get_u32(wire, 8);
  p.reference_id = get_u32(wire, 12);
  p.reference_ts = get_u64(wire, 16);
  p.origin_ts = get_u64(wire, 24);
  p.receive_ts = get_u64(wire, 32);
  p.transmit_ts = get_u64(wire, 40);
  p.extensions = decode_efs(wire.subspan(kHeaderSize));
  return p;
}

ExtensionField make_authenticator(ByteView nonce, ByteView ciphertext) {
  ExtensionField ef;
  ef.type = static_cast<uint16_t>(EfType::Authenticator);
  put_u16(ef.body, static_cast<uint16_t>(nonce.size()));
  put_u16(ef.body, static_cast<uint16_t>(ciphertext.size()));
  ef.body.insert(ef.body.end(), nonce.begin(), nonce.end());
  ef.body.resize(4 + pad4(nonce.size()), 0);
  ef.body.insert(ef.body.end(), ciphertext.begin(), ciphertext.end());
  ef.body.resize(4 + pad4(nonce.size()) + pad4(ciphertext.size()), 0);
  return ef;
}

AuthenticatorParts parse_authenticator(const ExtensionField& ef) {
  if (ef.type != static_cast<uint16_t>(EfType::Authenticator)) malformed("not an authenticator field");
  if (ef.body.size() < 4) malformed("authenticator too short");
  const size_t nlen = get_u16(ef.body, 0);
  const size_t clen = get_u16(ef.body, 2);
  if (4 + pad4(nlen) + pad4(clen) > ef.body.size()) malformed("authenticator lengths exceed field");
  AuthenticatorParts parts;
  parts.nonce.assign(ef.body.begin() + 4, ef.body.begin() + 4 + static_cast<std::ptrdiff_t>(nlen));
  const auto ct = ef.body.begin() + 4 + static_cast<std::ptrdiff_t>(pad4(nlen));
  parts.ciphertext.assign(ct, ct + static_cast<std::ptrdiff_t>(clen));
  return parts;
}

size_t authenticator_offset(ByteView wire) {
  if (wire.size() < kHeaderSize) malformed("NTP packet shorter than 48 bytes");
  std::optional<size_t> found;
  walk_efs(wire, kHeaderSize, [&](uint16_t type, size_t off, ByteView) {
    if (type == static_cast<uint16_t>(EfType::Authenticator) && !found) found = off;
  });
  if (!found) malformed("no NTS authenticator field");
  return *found;
}

}  // namespace gtv::nts
