#pragma once

// Roughtime client: tag-value codec, request construction and the four-step
// response verification (delegation certificate, signed response, Merkle
// inclusion of the nonce, delegation validity window).

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "gtv/crypto.hpp"
#include "gtv/error.hpp"
#include "gtv/timebase.hpp"
#include "gtv/transport.hpp"

namespace gtv::roughtime {

constexpr uint32_t make_tag(const char (&s)[5]) {
  return static_cast<uint32_t>(static_cast<uint8_t>(s[0])) |
         static_cast<uint32_t>(static_cast<uint8_t>(s[1])) << 8 |
         static_cast<uint32_t>(static_cast<uint8_t>(s[2])) << 16 |
         static_cast<uint32_t>(static_cast<uint8_t>(s[3])) << 24;
}

inline constexpr uint32_t kTagSig = make_tag("SIG\0");
inline constexpr uint32_t kTagVer = make_tag("VER\0");
inline constexpr uint32_t kTagNonc = make_tag("NONC");
inline constexpr uint32_t kTagDele = make_tag("DELE");
inline constexpr uint32_t kTagPath = make_tag("PATH");
inline constexpr uint32_t kTagRadi = make_tag("RADI");
inline constexpr uint32_t kTagPubk = make_tag("PUBK");
inline constexpr uint32_t kTagMidp = make_tag("MIDP");
inline constexpr uint32_t kTagSrep = make_tag("SREP");
inline constexpr uint32_t kTagMint = make_tag("MINT");
inline constexpr uint32_t kTagRoot = make_tag("ROOT");
inline constexpr uint32_t kTagCert = make_tag("CERT");
inline constexpr uint32_t kTagMaxt = make_tag("MAXT");
inline constexpr uint32_t kTagIndx = make_tag("INDX");
inline constexpr uint32_t kTagPadGoogle = make_tag("PAD\xff");
inline constexpr uint32_t kTagPadIetf = make_tag("ZZZZ");

std::string tag_name(uint32_t tag);

/// A decoded message: tag -> value, iterated in ascending tag order, which
/// is also the wire order.
using Message = std::map<uint32_t, Bytes>;

/// Throws RoughtimeError{Malformed} on any layout violation.
Message decode_message(ByteView wire);
Bytes encode_message(const Message& msg);

enum class TimeEncoding {
  MjdMicros,   // top 24 bits Modified Julian Day, low 40 bits microseconds of day
  UnixMicros,  // microseconds since the Unix epoch
};

enum class RadiusUnit { Micros, Seconds };

/// Draft-dependent layout rules. Everything version-specific in the codec is
/// read from here.
struct WireProfile {
  std::string name;
  std::optional<uint32_t> version;  // VER value advertised in requests
  size_t nonce_size;
  uint32_t pad_tag;
  size_t min_request_size;  // whole datagram, framing included
  bool framed;              // "ROUGHTIM" magic + uint32 length prefix
  size_t tree_hash_size;    // SHA-512 truncated to this many bytes
  TimeEncoding time_encoding;
  RadiusUnit radius_unit;
};

/// Known profiles: "ietf-07" (default) and "google".
const WireProfile& profile(std::string_view name);
const WireProfile& default_profile();

inline constexpr std::string_view kResponseContext{"RoughTime v1 response signature\0", 32};
inline constexpr std::string_view kDelegationContext{"RoughTime v1 delegation signature--\0", 36};
inline constexpr uint64_t kFrameMagic = 0x4d49544847554f52ULL;  // "ROUGHTIM" little-endian

Bytes frame_packet(const WireProfile& p, ByteView message);
/// Strips framing when the profile uses it; throws Malformed on mismatch.
ByteView unframe_packet(const WireProfile& p, ByteView packet);

/// Timestamp <-> wire encoding of MIDP/MINT/MAXT.
uint64_t encode_time(const WireProfile& p, Timestamp t);
Timestamp decode_time(const WireProfile& p, uint64_t raw);
uint32_t encode_radius(const WireProfile& p, SignedDuration r);
SignedDuration decode_radius(const WireProfile& p, uint32_t raw);

Bytes build_request(const WireProfile& p, ByteView nonce);
/// Returns the nonce carried by a request (used by the mock server and tests).
Bytes decode_request_nonce(const WireProfile& p, ByteView packet);

/// Merkle hashing: leaf = H(0x00 || data), node = H(0x01 || left || right),
/// with H = SHA-512 truncated to the profile's hash size.
Bytes merkle_leaf(const WireProfile& p, ByteView data);
Bytes merkle_node(const WireProfile& p, ByteView left, ByteView right);

enum class VerifyFailure {
  Malformed,
  BadCertSignature,
  BadResponseSignature,
  MerkleMismatch,
  MidpointOutsideWindow,
};

const char* to_string(VerifyFailure f);

class RoughtimeError : public Error {
 public:
  RoughtimeError(VerifyFailure f, const std::string& detail)
      : Error(f == VerifyFailure::Malformed ? ErrorClass::Protocol : ErrorClass::Authentication,
              std::string("roughtime ") + to_string(f) + ": " + detail),
        failure_(f) {}
  VerifyFailure failure() const { return failure_; }

 private:
  VerifyFailure failure_;
};

struct ServerKey {
  crypto::Ed25519PublicKey public_key{};
  std::string address;  // host:port
  std::string version = "ietf-07";

  /// Builds a key from base64 text; throws ConfigError unless it decodes to 32 bytes.
  static ServerKey from_base64(std::string_view key_b64, std::string address, std::string version);
  std::string fingerprint() const;
};

/// A verified (midpoint, radius) pair. Only verify_response can create one.
class Measurement {
 public:
  Timestamp midpoint() const { return midpoint_; }
  SignedDuration radius() const { return radius_; }
  const std::string& server_id() const { return server_id_; }
  MonotonicInstant t_mono_rx() const { return t_mono_rx_; }

 private:
  friend Measurement verify_response(ByteView, ByteView, const ServerKey&, MonotonicInstant);
  Measurement(Timestamp m, SignedDuration r, std::string id, MonotonicInstant rx)
      : midpoint_(m), radius_(r), server_id_(std::move(id)), t_mono_rx_(rx) {}

  Timestamp midpoint_;
  SignedDuration radius_;
  std::string server_id_;
  MonotonicInstant t_mono_rx_;
};

Measurement verify_response(ByteView response, ByteView nonce, const ServerKey& key,
                            MonotonicInstant t_mono_rx);

struct PollOptions {
  int attempts = 3;
  std::chrono::milliseconds timeout{1000};
  std::function<MonotonicInstant()> clock = MonotonicInstant::now;
};

/// One Roughtime transaction with a fresh nonce per attempt. Dropped
/// packets are retried; verification failures are not.
Measurement poll(const ServerKey& server, DatagramTransport& transport,
                 crypto::RandomSource& rng = crypto::system_random(), const PollOptions& opts = {});

}  // namespace gtv::roughtime
