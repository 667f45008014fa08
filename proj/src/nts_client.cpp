#include <algorithm>
#include <chrono>
#include <cmath>

#include "gtv/nts.hpp"

namespace gtv::nts {

class QueryAccess {
 public:
  static NtsMeasurement make(SignedDuration o, SignedDuration d, Timestamp t4, MonotonicInstant rx, std::string id) {
    return NtsMeasurement(o, d, t4, rx, std::move(id));
  }
};

namespace {

constexpr size_t kUniqueIdSize = 32;
constexpr size_t kNonceSize = 16;

const ExtensionField* find_ef(const std::vector<ExtensionField>& efs, EfType type) {
  for (const auto& ef : efs) {
    if (ef.type == static_cast<uint16_t>(type)) return &ef;
  }
  return nullptr;
}

}  // namespace

NtsSession::NtsSession(std::string server_id, Bytes c2s, Bytes s2c, std::vector<Bytes> cookies, std::string ntp_host,
                       uint16_t ntp_port)
    : server_id_(std::move(server_id)),
      c2s_(c2s),
      s2c_(s2c),
      cookies_(cookies.begin(), cookies.end()),
      ntp_host_(std::move(ntp_host)),
      ntp_port_(ntp_port) {}

NtsSession NtsSession::from_psk(std::string server_id, Bytes c2s, Bytes s2c, std::vector<Bytes> cookies) {
  return NtsSession(std::move(server_id), std::move(c2s), std::move(s2c), std::move(cookies), "127.0.0.1",
                    kDefaultNtpPort);
}

Bytes NtsSession::take_cookie() {
  if (cookies_.empty()) throw NtsError(NtsFailure::NoCookies, "cookie queue empty; re-run key establishment");
  Bytes c = std::move(cookies_.front());
  cookies_.pop_front();
  return c;
}

Timestamp system_clock_now() {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  return Timestamp::from_nanos(ns);
}

OffsetDelay compute_offset_delay(Timestamp t1, Timestamp t2, Timestamp t3, Timestamp t4) {
  return {(ts_diff(t2, t1) + ts_diff(t3, t4)).half(), ts_diff(t4, t1) - ts_diff(t3, t2)};
}

NtsMeasurement nts_query(NtsSession& session, DatagramTransport& transport, crypto::RandomSource& rng,
                         const QueryOptions& opts) {
  const auto local = opts.local_clock ? opts.local_clock : system_clock_now;
  const Bytes uid = rng.bytes(kUniqueIdSize);
  const Bytes cookie = session.take_cookie();
  const size_t wanted = opts.target_cookies > session.cookies_left() + 1
                            ? opts.target_cookies - session.cookies_left() - 1
                            : 0;

  NtpPacket req;
  req.extensions.push_back({static_cast<uint16_t>(EfType::UniqueIdentifier), uid});
  req.extensions.push_back({static_cast<uint16_t>(EfType::Cookie), cookie});
  for (size_t i = 0; i < wanted; ++i) {
    req.extensions.push_back({static_cast<uint16_t>(EfType::CookiePlaceholder), Bytes(cookie.size(), 0)});
  }
  const Timestamp t1 = local();
  req.transmit_ts = to_ntp(t1, opts.era);
  const Bytes ad = encode_packet(req);
  const Bytes nonce = rng.bytes(kNonceSize);
  req.extensions.push_back(make_authenticator(nonce, session.c2s().seal(nonce, ad, {})));

  const auto reply = transport.exchange(encode_packet(req), opts.timeout);
  const Timestamp t4 = local();
  const MonotonicInstant rx = opts.mono_clock();
  if (!reply) throw UnreachableError("NTS server " + session.server_id() + " did not answer");

  const NtpPacket resp = decode_packet(*reply);
  if (resp.mode != 4) throw NtsError(NtsFailure::Malformed, "reply is not in server mode");
  if (resp.origin_ts != req.transmit_ts) throw NtsError(NtsFailure::Replay, "origin timestamp does not match");

  const size_t auth_off = authenticator_offset(*reply);
  const std::vector<ExtensionField> signed_efs = decode_efs(ByteView(*reply).subspan(48, auth_off - 48));
  const ExtensionField* echoed = find_ef(signed_efs, EfType::UniqueIdentifier);
  if (echoed == nullptr || echoed->body != uid) throw NtsError(NtsFailure::Replay, "unique identifier mismatch");

  const ExtensionField* auth = find_ef(resp.extensions, EfType::Authenticator);
  const AuthenticatorParts parts = parse_authenticator(*auth);
  const auto plaintext = session.s2c().open(parts.nonce, ByteView(*reply).first(auth_off), parts.ciphertext);
  if (!plaintext) throw NtsError(NtsFailure::Authentication, "AEAD verification failed");
  for (ExtensionField& ef : decode_efs(*plaintext)) {
    if (ef.type == static_cast<uint16_t>(EfType::Cookie)) session.add_cookie(std::move(ef.body));
  }

  const OffsetDelay od = compute_offset_delay(t1, from_ntp(resp.receive_ts, opts.era),
                                              from_ntp(resp.transmit_ts, opts.era), t4);
  if (od.delay.is_negative()) throw NtsError(NtsFailure::Malformed, "negative round-trip delay");
  return QueryAccess::make(od.offset, od.delay, t4, rx, session.server_id());
}

SignedDuration estimate_offset_sigma(const std::vector<SignedDuration>& offsets, size_t n_min) {
  n_min = std::max<size_t>(n_min, 2);
  if (offsets.size() < n_min) {
    throw CalibrationError("need at least " + std::to_string(n_min) + " NTS measurements, have " +
                           std::to_string(offsets.size()));
  }
  // Deviations from the first sample are exact, so a constant history gives exactly zero.
  double mean = 0;
  std::vector<double> d;
  d.reserve(offsets.size());
  for (const auto& o : offsets) d.push_back((o - offsets.front()).to_seconds());
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double ss = 0;
  for (double v : d) ss += (v - mean) * (v - mean);
  return SignedDuration::from_seconds_f(std::sqrt(ss / static_cast<double>(d.size() - 1)));
}

SignedDuration estimate_server_sigma(const std::vector<NtsMeasurement>& history, size_t n_min) {
  std::vector<SignedDuration> offsets;
  offsets.reserve(history.size());
  for (const auto& m : history) offsets.push_back(m.offset());
  return estimate_offset_sigma(offsets, n_min);
}

}  // namespace gtv::nts
