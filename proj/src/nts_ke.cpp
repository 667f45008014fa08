#include <netdb.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <arpa/inet.h>
#include <openssl/err.h>
#include <openssl/pem.h>
#include <openssl/ssl.h>
#include <openssl/x509v3.h>

#include <cstring>
#include <memory>

#include "gtv/nts.hpp"

namespace gtv::nts {

namespace {

void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint16_t get_u16(ByteView b, size_t off) { return static_cast<uint16_t>(b[off] << 8 | b[off + 1]); }

std::string ssl_error_string() {
  std::string out;
  while (const unsigned long e = ERR_get_error()) {
    char buf[256];
    ERR_error_string_n(e, buf, sizeof buf);
    if (!out.empty()) out += "; ";
    out += buf;
  }
  return out.empty() ? "unknown TLS failure" : out;
}

struct CtxFree {
  void operator()(SSL_CTX* c) const { SSL_CTX_free(c); }
};
struct SslFree {
  void operator()(SSL* s) const { SSL_free(s); }
};

class Socket {
 public:
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

int connect_tcp(const std::string& host, uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
    throw UnreachableError("cannot resolve NTS-KE host " + host);
  }
  std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(res, freeaddrinfo);
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>(timeout.count() % 1000 * 1000);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) return fd;
    ::close(fd);
  }
  throw UnreachableError("cannot connect to NTS-KE server " + host + ":" + std::to_string(port));
}

bool is_ip_literal(const std::string& host) {
  in6_addr a6{};
  in_addr a4{};
  return inet_pton(AF_INET, host.c_str(), &a4) == 1 || inet_pton(AF_INET6, host.c_str(), &a6) == 1;
}

void load_trust(SSL_CTX* ctx, const TlsConfig& tls) {
  if (!tls.ca_pem.empty()) {
    X509_STORE* store = SSL_CTX_get_cert_store(ctx);
    std::unique_ptr<BIO, decltype(&BIO_free)> bio(BIO_new_mem_buf(tls.ca_pem.data(), static_cast<int>(tls.ca_pem.size())),
                                                  BIO_free);
    int loaded = 0;
    while (X509* cert = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr)) {
      X509_STORE_add_cert(store, cert);
      X509_free(cert);
      ++loaded;
    }
    ERR_clear_error();
    if (loaded == 0) throw ConfigError("NTS trust anchor PEM contains no certificates");
  } else if (!tls.ca_file.empty()) {
    if (SSL_CTX_load_verify_locations(ctx, tls.ca_file.c_str(), nullptr) != 1) {
      throw ConfigError("cannot load NTS trust anchors from " + tls.ca_file);
    }
  } else {
    SSL_CTX_set_default_verify_paths(ctx);
  }
}

}  // namespace

const char* to_string(NtsFailure f) {
  switch (f) {
    case NtsFailure::Tls: return "tls-failure";
    case NtsFailure::Negotiation: return "negotiation-mismatch";
    case NtsFailure::NoCookies: return "no-cookies";
    case NtsFailure::Malformed: return "malformed";
    case NtsFailure::Authentication: return "authentication-failure";
    case NtsFailure::Replay: return "unique-id-mismatch";
  }
  return "unknown";
}

Bytes encode_records(const std::vector<KeRecord>& records) {
  Bytes out;
  for (const KeRecord& r : records) {
    if (r.type > 0x7fff || r.body.size() > 0xffff) throw InputError("NTS-KE record out of range");
    put_u16(out, static_cast<uint16_t>((r.critical ? 0x8000 : 0) | r.type));
    put_u16(out, static_cast<uint16_t>(r.body.size()));
    out.insert(out.end(), r.body.begin(), r.body.end());
  }
  return out;
}

std::optional<size_t> message_length(ByteView wire) {
  size_t off = 0;
  while (off + 4 <= wire.size()) {
    const uint16_t type = get_u16(wire, off) & 0x7fff;
    const size_t len = get_u16(wire, off + 2);
    if (off + 4 + len > wire.size()) return std::nullopt;
    off += 4 + len;
    if (type == static_cast<uint16_t>(RecordType::EndOfMessage)) return off;
  }
  return std::nullopt;
}

std::vector<KeRecord> decode_records(ByteView wire) {
  std::vector<KeRecord> out;
  size_t off = 0;
  while (off < wire.size()) {
    if (off + 4 > wire.size()) throw NtsError(NtsFailure::Malformed, "truncated record header");
    const uint16_t head = get_u16(wire, off);
    const size_t len = get_u16(wire, off + 2);
    if (off + 4 + len > wire.size()) throw NtsError(NtsFailure::Malformed, "truncated record body");
    KeRecord r;
    r.critical = (head & 0x8000) != 0;
    r.type = head & 0x7fff;
    r.body.assign(wire.begin() + static_cast<std::ptrdiff_t>(off + 4),
                  wire.begin() + static_cast<std::ptrdiff_t>(off + 4 + len));
    off += 4 + len;
    out.push_back(std::move(r));
    if (out.back().type == static_cast<uint16_t>(RecordType::EndOfMessage)) {
      if (off != wire.size()) throw NtsError(NtsFailure::Malformed, "bytes after End of Message");
      return out;
    }
  }
  throw NtsError(NtsFailure::Malformed, "message without End of Message");
}

std::vector<KeRecord> ke_request(uint16_t aead) {
  std::vector<KeRecord> r;
  Bytes proto;
  put_u16(proto, kNextProtocolNtpv4);
  r.push_back({true, static_cast<uint16_t>(RecordType::NextProtocol), proto});
  Bytes alg;
  put_u16(alg, aead);
  r.push_back({false, static_cast<uint16_t>(RecordType::AeadAlgorithm), alg});
  r.push_back({true, static_cast<uint16_t>(RecordType::EndOfMessage), {}});
  return r;
}

KeResponse parse_ke_response(const std::vector<KeRecord>& records) {
  KeResponse resp;
  bool have_proto = false;
  bool have_aead = false;
  for (const KeRecord& r : records) {
    switch (static_cast<RecordType>(r.type)) {
      case RecordType::EndOfMessage:
        break;
      case RecordType::NextProtocol:
        if (r.body.size() != 2 || get_u16(r.body, 0) != kNextProtocolNtpv4) {
          throw NtsError(NtsFailure::Negotiation, "server did not select NTPv4");
        }
        have_proto = true;
        break;
      case RecordType::Error:
        throw NtsError(NtsFailure::Negotiation,
                       "server error code " + std::to_string(r.body.size() == 2 ? get_u16(r.body, 0) : 0xffff));
      case RecordType::Warning:
        break;
      case RecordType::AeadAlgorithm:
        if (r.body.size() != 2) throw NtsError(NtsFailure::Malformed, "AEAD record length");
        resp.aead = get_u16(r.body, 0);
        if (resp.aead != crypto::AesSivCmac256::kIanaId) {
          throw NtsError(NtsFailure::Negotiation, "unsupported AEAD algorithm " + std::to_string(resp.aead));
        }
        have_aead = true;
        break;
      case RecordType::NewCookie:
        resp.cookies.push_back(r.body);
        break;
      case RecordType::Server:
        resp.server = std::string(r.body.begin(), r.body.end());
        break;
      case RecordType::Port:
        if (r.body.size() != 2) throw NtsError(NtsFailure::Malformed, "port record length");
        resp.port = get_u16(r.body, 0);
        break;
      default:
        if (r.critical) throw NtsError(NtsFailure::Negotiation, "unknown critical record " + std::to_string(r.type));
    }
  }
  if (!have_proto) throw NtsError(NtsFailure::Negotiation, "no next-protocol record");
  if (!have_aead) throw NtsError(NtsFailure::Negotiation, "no AEAD record");
  if (resp.cookies.empty()) throw NtsError(NtsFailure::NoCookies, "server supplied zero cookies");
  return resp;
}

Bytes exporter_context(uint16_t aead, uint8_t direction) {
  Bytes ctx;
  put_u16(ctx, kNextProtocolNtpv4);
  put_u16(ctx, aead);
  ctx.push_back(direction);
  return ctx;
}

NtsSession nts_ke_handshake(const std::string& host, uint16_t port, const TlsConfig& tls) {
  std::unique_ptr<SSL_CTX, CtxFree> ctx(SSL_CTX_new(TLS_client_method()));
  if (!ctx) throw NtsError(NtsFailure::Tls, ssl_error_string());
  SSL_CTX_set_min_proto_version(ctx.get(), TLS1_3_VERSION);
  SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_PEER, nullptr);
  load_trust(ctx.get(), tls);
  const std::string alpn = std::string(1, static_cast<char>(kAlpn.size())) + std::string(kAlpn);
  SSL_CTX_set_alpn_protos(ctx.get(), reinterpret_cast<const unsigned char*>(alpn.data()),
                          static_cast<unsigned>(alpn.size()));

  Socket sock(connect_tcp(host, port, tls.timeout));
  std::unique_ptr<SSL, SslFree> ssl(SSL_new(ctx.get()));
  SSL_set_fd(ssl.get(), sock.get());
  if (is_ip_literal(host)) {
    X509_VERIFY_PARAM_set1_ip_asc(SSL_get0_param(ssl.get()), host.c_str());
  } else {
    SSL_set_tlsext_host_name(ssl.get(), host.c_str());
    SSL_set1_host(ssl.get(), host.c_str());
  }
  if (SSL_connect(ssl.get()) != 1) throw NtsError(NtsFailure::Tls, ssl_error_string());

  const unsigned char* selected = nullptr;
  unsigned selected_len = 0;
  SSL_get0_alpn_selected(ssl.get(), &selected, &selected_len);
  if (selected_len != kAlpn.size() || std::memcmp(selected, kAlpn.data(), selected_len) != 0) {
    throw NtsError(NtsFailure::Negotiation, "server did not select ALPN ntske/1");
  }

  const Bytes request = encode_records(ke_request());
  if (SSL_write(ssl.get(), request.data(), static_cast<int>(request.size())) != static_cast<int>(request.size())) {
    throw NtsError(NtsFailure::Tls, "write failed: " + ssl_error_string());
  }
  Bytes buf;
  std::optional<size_t> len;
  while (!(len = message_length(buf))) {
    uint8_t chunk[4096];
    const int n = SSL_read(ssl.get(), chunk, sizeof chunk);
    if (n <= 0) throw NtsError(NtsFailure::Tls, "connection closed before End of Message");
    buf.insert(buf.end(), chunk, chunk + n);
  }
  buf.resize(*len);
  const KeResponse resp = parse_ke_response(decode_records(buf));

  Bytes c2s(crypto::AesSivCmac256::kKeySize);
  Bytes s2c(crypto::AesSivCmac256::kKeySize);
  const Bytes ctx_c2s = exporter_context(resp.aead, 0);
  const Bytes ctx_s2c = exporter_context(resp.aead, 1);
  if (SSL_export_keying_material(ssl.get(), c2s.data(), c2s.size(), kExporterLabel.data(), kExporterLabel.size(),
                                 ctx_c2s.data(), ctx_c2s.size(), 1) != 1 ||
      SSL_export_keying_material(ssl.get(), s2c.data(), s2c.size(), kExporterLabel.data(), kExporterLabel.size(),
                                 ctx_s2c.data(), ctx_s2c.size(), 1) != 1) {
    throw NtsError(NtsFailure::Tls, "key export failed: " + ssl_error_string());
  }
  SSL_shutdown(ssl.get());

  return NtsSession(host + ":" + std::to_string(port), std::move(c2s), std::move(s2c), resp.cookies,
                    resp.server.value_or(host), resp.port.value_or(kDefaultNtpPort));
}

}  // namespace gtv::nts
