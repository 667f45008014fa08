#pragma once

// NTS-secured NTPv4 client: NTS-KE record codec and TLS handshake, NTP packet
// and extension-field codec, authenticated queries, and the offset spread
// estimate that calibrates the NTS threshold test.

#include <chrono>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gtv/crypto.hpp"
#include "gtv/error.hpp"
#include "gtv/timebase.hpp"
#include "gtv/transport.hpp"

namespace gtv::nts {

enum class NtsFailure {
  Tls,
  Negotiation,
  NoCookies,
  Malformed,
  Authentication,
  Replay,
};

const char* to_string(NtsFailure f);

class NtsError : public Error {
 public:
  NtsError(NtsFailure f, const std::string& detail)
      : Error(f == NtsFailure::Authentication || f == NtsFailure::Replay ? ErrorClass::Authentication
                                                                          : ErrorClass::Protocol,
              std::string("nts ") + to_string(f) + ": " + detail),
        failure_(f) {}
  NtsFailure failure() const { return failure_; }

 private:
  NtsFailure failure_;
};

// ---- NTS-KE ----------------------------------------------------------------

enum class RecordType : uint16_t {
  EndOfMessage = 0,
  NextProtocol = 1,
  Error = 2,
  Warning = 3,
  AeadAlgorithm = 4,
  NewCookie = 5,
  Server = 6,
  Port = 7,
};

struct KeRecord {
  bool critical = false;
  uint16_t type = 0;
  Bytes body;

  bool operator==(const KeRecord&) const = default;
};

inline constexpr uint16_t kNextProtocolNtpv4 = 0;
inline constexpr uint16_t kDefaultKePort = 4460;
inline constexpr uint16_t kDefaultNtpPort = 123;
inline constexpr std::string_view kAlpn = "ntske/1";
inline constexpr std::string_view kExporterLabel = "EXPORTER-network-time-security";

Bytes encode_records(const std::vector<KeRecord>& records);
/// Decodes one complete message; the last record must be End of Message.
std::vector<KeRecord> decode_records(ByteView wire);
/// Length of the first complete message in `wire`, or nullopt if more bytes are needed.
std::optional<size_t> message_length(ByteView wire);

std::vector<KeRecord> ke_request(uint16_t aead = crypto::AesSivCmac256::kIanaId);

struct KeResponse {
  uint16_t aead = 0;
  std::vector<Bytes> cookies;
  std::optional<std::string> server;
  std::optional<uint16_t> port;
};

/// Checks negotiation (NTPv4, AES-SIV-CMAC-256, at least one cookie).
KeResponse parse_ke_response(const std::vector<KeRecord>& records);

/// Exporter context for the given direction (0 = C2S, 1 = S2C).
Bytes exporter_context(uint16_t aead, uint8_t direction);

// ---- NTP packet ------------------------------------------------------------

inline constexpr int64_t kNtpUnixOffset = 2'208'988'800;  // 1900-01-01 to 1970-01-01

/// 64-bit NTP timestamp (32.32). Era 0 ends in 2036; era 1 starts there.
uint64_t to_ntp(Timestamp t, int era = 0);
Timestamp from_ntp(uint64_t ntp, int era = 0);

enum class EfType : uint16_t {
  UniqueIdentifier = 0x0104,
  Cookie = 0x0204,
  CookiePlaceholder = 0x0304,
  Authenticator = 0x0404,
};

struct ExtensionField {
  uint16_t type = 0;
  Bytes body;  // without the 4-byte header, padding included

  bool operator==(const ExtensionField&) const = default;
};

struct NtpPacket {
  uint8_t leap = 0;
  uint8_t version = 4;
  uint8_t mode = 3;
  uint8_t stratum = 0;
  int8_t poll = 0;
  int8_t precision = 0;
  uint32_t root_delay = 0;
  uint32_t root_dispersion = 0;
  uint32_t reference_id = 0;
  uint64_t reference_ts = 0;
  uint64_t origin_ts = 0;
  uint64_t receive_ts = 0;
  uint64_t transmit_ts = 0;
  std::vector<ExtensionField> extensions;

  bool operator==(const NtpPacket&) const = default;
};

Bytes encode_ef(const ExtensionField& ef);
Bytes encode_packet(const NtpPacket& p);
NtpPacket decode_packet(ByteView wire);
/// Decodes a run of extension fields (used for the encrypted authenticator payload).
std::vector<ExtensionField> decode_efs(ByteView wire);

/// Authenticator field body: nonce and ciphertext, each padded to 4 bytes.
ExtensionField make_authenticator(ByteView nonce, ByteView ciphertext);
struct AuthenticatorParts {
  Bytes nonce;
  Bytes ciphertext;
};
AuthenticatorParts parse_authenticator(const ExtensionField& ef);

/// Byte offset of the authenticator field within an encoded packet; the
/// associated data is everything before it.
size_t authenticator_offset(ByteView wire);

// ---- session and queries ---------------------------------------------------

class NtsSession {
 public:
  NtsSession(std::string server_id, Bytes c2s, Bytes s2c, std::vector<Bytes> cookies, std::string ntp_host,
             uint16_t ntp_port);

  /// Test mode: keys injected directly, no TLS.
  static NtsSession from_psk(std::string server_id, Bytes c2s, Bytes s2c, std::vector<Bytes> cookies);

  const std::string& server_id() const { return server_id_; }
  const std::string& ntp_host() const { return ntp_host_; }
  uint16_t ntp_port() const { return ntp_port_; }
  size_t cookies_left() const { return cookies_.size(); }
  bool usable() const { return !cookies_.empty(); }

  Bytes take_cookie();
  void add_cookie(Bytes c) { cookies_.push_back(std::move(c)); }
  const crypto::AesSivCmac256& c2s() const { return c2s_; }
  const crypto::AesSivCmac256& s2c() const { return s2c_; }

 private:
  std::string server_id_;
  crypto::AesSivCmac256 c2s_;
  crypto::AesSivCmac256 s2c_;
  std::deque<Bytes> cookies_;
  std::string ntp_host_;
  uint16_t ntp_port_;
};

struct TlsConfig {
  std::string ca_pem;   // trust anchors as PEM text; empty means the system store
  std::string ca_file;  // alternative: path to a PEM bundle
  std::chrono::milliseconds timeout{5000};
};

/// TLS 1.3 key establishment against host:port. Throws NtsError
/// (Tls / Negotiation / NoCookies) or UnreachableError.
NtsSession nts_ke_handshake(const std::string& host, uint16_t port, const TlsConfig& tls);

/// theta = ((T2-T1)+(T3-T4))/2, delta = (T4-T1)-(T3-T2).
struct OffsetDelay {
  SignedDuration offset;
  SignedDuration delay;
};
OffsetDelay compute_offset_delay(Timestamp t1, Timestamp t2, Timestamp t3, Timestamp t4);

class NtsMeasurement {
 public:
  SignedDuration offset() const { return offset_; }
  SignedDuration delay() const { return delay_; }
  /// Local clock reading at receipt (T4); local + offset estimates the server's time.
  Timestamp t_local_rx() const { return t4_; }
  MonotonicInstant t_mono_rx() const { return t_mono_rx_; }
  const std::string& server_id() const { return server_id_; }

 private:
  friend class QueryAccess;
  NtsMeasurement(SignedDuration o, SignedDuration d, Timestamp t4, MonotonicInstant rx, std::string id)
      : offset_(o), delay_(d), t4_(t4), t_mono_rx_(rx), server_id_(std::move(id)) {}

  SignedDuration offset_;
  SignedDuration delay_;
  Timestamp t4_;
  MonotonicInstant t_mono_rx_;
  std::string server_id_;
};

struct QueryOptions {
  std::chrono::milliseconds timeout{1000};
  size_t target_cookies = 8;  // placeholders are sent to refill the queue to this size
  int era = 0;
  std::function<Timestamp()> local_clock;                     // defaults to the system clock
  std::function<MonotonicInstant()> mono_clock = MonotonicInstant::now;
};

Timestamp system_clock_now();

/// One authenticated NTP exchange. Consumes one cookie; stores any new ones.
NtsMeasurement nts_query(NtsSession& session, DatagramTransport& transport,
                         crypto::RandomSource& rng = crypto::system_random(), const QueryOptions& opts = {});

inline constexpr size_t kDefaultSigmaMinSamples = 30;

/// Sample standard deviation of the offsets (n - 1 normalisation).
SignedDuration estimate_server_sigma(const std::vector<NtsMeasurement>& history,
                                     size_t n_min = kDefaultSigmaMinSamples);
SignedDuration estimate_offset_sigma(const std::vector<SignedDuration>& offsets,
                                     size_t n_min = kDefaultSigmaMinSamples);

}  // namespace gtv::nts
