#include "gtv/nts_server.hpp"

#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <arpa/inet.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/ssl.h>
#include <openssl/x509v3.h>

namespace gtv::nts {

namespace {

constexpr size_t kCookieNonceSize = 16;

const ExtensionField* find_ef(const std::vector<ExtensionField>& efs, EfType type) {
  for (const auto& ef : efs) {
    if (ef.type == static_cast<uint16_t>(type)) return &ef;
  }
  return nullptr;
}

Bytes u16_body(uint16_t v) { return {static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)}; }

}  // namespace

// ---- cookies ----------------------------------------------------------------

CookieJar::CookieJar(crypto::RandomSource& rng) : rng_(rng), master_(rng.bytes(crypto::AesSivCmac256::kKeySize)) {}

Bytes CookieJar::make(const Keys& keys) {
  Bytes plain = u16_body(keys.aead);
  plain.push_back(0);
  plain.push_back(0);
  plain.insert(plain.end(), keys.c2s.begin(), keys.c2s.end());
  plain.insert(plain.end(), keys.s2c.begin(), keys.s2c.end());
  Bytes nonce;
  {
    std::lock_guard lock(mu_);
    nonce = rng_.bytes(kCookieNonceSize);
  }
  const Bytes sealed = crypto::AesSivCmac256(master_).seal(nonce, {}, plain);
  Bytes cookie = nonce;
  cookie.insert(cookie.end(), sealed.begin(), sealed.end());
  return cookie;
}

std::optional<CookieJar::Keys> CookieJar::open(ByteView cookie) const {
  constexpr size_t key = crypto::AesSivCmac256::kKeySize;
  if (cookie.size() != kCookieNonceSize + crypto::AesSivCmac256::kTagSize + 4 + 2 * key) return std::nullopt;
  const auto plain = crypto::AesSivCmac256(master_).open(cookie.first(kCookieNonceSize), {},
                                                         cookie.subspan(kCookieNonceSize));
  if (!plain) return std::nullopt;
  Keys k;
  k.aead = static_cast<uint16_t>((*plain)[0] << 8 | (*plain)[1]);
  k.c2s.assign(plain->begin() + 4, plain->begin() + 4 + key);
  k.s2c.assign(plain->begin() + 4 + key, plain->end());
  return k;
}

// ---- NTP responder ----------------------------------------------------------

MockNtpServer::MockNtpServer(std::shared_ptr<CookieJar> jar, TimeSource clock, crypto::RandomSource& rng, int era)
    : jar_(std::move(jar)), clock_(std::move(clock)), rng_(rng), era_(era) {}

NtsSession MockNtpServer::psk_session(std::string server_id, size_t cookies) {
  CookieJar::Keys keys{crypto::AesSivCmac256::kIanaId, rng_.bytes(32), rng_.bytes(32)};
  std::vector<Bytes> jar;
  for (size_t i = 0; i < cookies; ++i) jar.push_back(jar_->make(keys));
  return NtsSession::from_psk(std::move(server_id), keys.c2s, keys.s2c, std::move(jar));
}

std::optional<Bytes> MockNtpServer::handle(ByteView request) {
  std::lock_guard lock(mu_);
  if (behavior_.drop_all) return std::nullopt;
  if (behavior_.drop_next > 0) {
    --behavior_.drop_next;
    return std::nullopt;
  }
  NtpPacket req;
  size_t auth_off = 0;
  try {
    req = decode_packet(request);
    auth_off = authenticator_offset(request);
  } catch (const NtsError&) {
    return std::nullopt;
  }
  if (req.mode != 3) return std::nullopt;
  const auto signed_efs = decode_efs(request.subspan(48, auth_off - 48));
  const ExtensionField* uid = find_ef(signed_efs, EfType::UniqueIdentifier);
  const ExtensionField* cookie = find_ef(signed_efs, EfType::Cookie);
  if (uid == nullptr || cookie == nullptr) return std::nullopt;
  const auto keys = jar_->open(cookie->body);
  if (!keys) return std::nullopt;
  AuthenticatorParts parts;
  try {
    parts = parse_authenticator(*find_ef(req.extensions, EfType::Authenticator));
  } catch (const NtsError&) {
    return std::nullopt;
  }
  if (!crypto::AesSivCmac256(keys->c2s).open(parts.nonce, request.first(auth_off), parts.ciphertext)) {
    return std::nullopt;
  }
  cookies_seen_.push_back(cookie->body);
  size_t placeholders = 0;
  for (const auto& ef : signed_efs) {
    if (ef.type == static_cast<uint16_t>(EfType::CookiePlaceholder)) ++placeholders;
  }

  const Timestamp t2 = ts_add(clock_(), behavior_.bias);
  const Timestamp t3 = ts_add(t2, behavior_.processing);
  NtpPacket resp;
  resp.mode = 4;
  resp.stratum = 1;
  resp.precision = -20;
  resp.reference_id = 0x47545600;  // "GTV"
  resp.origin_ts = req.transmit_ts;
  resp.receive_ts = to_ntp(t2, era_);
  resp.reference_ts = resp.receive_ts;
  resp.transmit_ts = to_ntp(t3, era_);
  ExtensionField echo = *uid;
  if (behavior_.wrong_unique_id) echo.body[0] ^= 0x01;
  resp.extensions.push_back(echo);

  Bytes plaintext;
  for (size_t i = 0; i < placeholders + 1; ++i) {
    const Bytes ef = encode_ef({static_cast<uint16_t>(EfType::Cookie), jar_->make(*keys)});
    plaintext.insert(plaintext.end(), ef.begin(), ef.end());
  }
  const Bytes ad = encode_packet(resp);
  const Bytes nonce = rng_.bytes(16);
  Bytes ct = crypto::AesSivCmac256(keys->s2c).seal(nonce, ad, plaintext);
  if (behavior_.flip_ciphertext_bit) ct[ct.size() - 1] ^= 0x01;
  resp.extensions.push_back(make_authenticator(nonce, ct));
  return encode_packet(resp);
}

// ---- NTS-KE server ----------------------------------------------------------

struct MockKeServer::Tls {
  SSL_CTX* ctx = nullptr;
  ~Tls() { SSL_CTX_free(ctx); }
};

namespace {

int select_alpn(SSL*, const unsigned char** out, unsigned char* outlen, const unsigned char* in, unsigned inlen,
                void*) {
  static const unsigned char kWire[] = "\x07ntske/1";
  unsigned char* sel = nullptr;
  if (SSL_select_next_proto(&sel, outlen, kWire, sizeof kWire - 1, in, inlen) != OPENSSL_NPN_NEGOTIATED) {
    return SSL_TLSEXT_ERR_ALERT_FATAL;
  }
  *out = sel;
  return SSL_TLSEXT_ERR_OK;
}

std::string make_self_signed(SSL_CTX* ctx) {
  EVP_PKEY* key = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
  if (key == nullptr) throw CryptoError("test certificate key generation failed");
  X509* cert = X509_new();
  X509_set_version(cert, 2);
  ASN1_INTEGER_set(X509_get_serialNumber(cert), 1);
  X509_gmtime_adj(X509_getm_notBefore(cert), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert), 7 * 86400);
  X509_set_pubkey(cert, key);
  X509_NAME* name = X509_get_subject_name(cert);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>("localhost"), -1, -1,
                             0);
  X509_set_issuer_name(cert, name);
  X509V3_CTX v3;
  X509V3_set_ctx_nodb(&v3);
  X509V3_set_ctx(&v3, cert, cert, nullptr, nullptr, 0);
  for (const auto& [nid, value] : {std::pair{NID_subject_alt_name, "DNS:localhost,IP:127.0.0.1"},
                                   std::pair{NID_basic_constraints, "critical,CA:TRUE"}}) {
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &v3, nid, value);
    X509_add_ext(cert, ext, -1);
    X509_EXTENSION_free(ext);
  }
  X509_sign(cert, key, EVP_sha256());
  SSL_CTX_use_certificate(ctx, cert);
  SSL_CTX_use_PrivateKey(ctx, key);

  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_X509(bio, cert);
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio, &data);
  std::string pem(data, static_cast<size_t>(len));
  BIO_free(bio);
  X509_free(cert);
  EVP_PKEY_free(key);
  return pem;
}

}  // namespace

MockKeServer::MockKeServer(std::shared_ptr<CookieJar> jar, Options opts)
    : jar_(std::move(jar)), opts_(std::move(opts)), tls_(std::make_unique<Tls>()) {
  tls_->ctx = SSL_CTX_new(TLS_server_method());
  SSL_CTX_set_min_proto_version(tls_->ctx, TLS1_3_VERSION);
  SSL_CTX_set_alpn_select_cb(tls_->ctx, select_alpn, nullptr);
  cert_pem_ = make_self_signed(tls_->ctx);

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw UnreachableError("cannot create NTS-KE listening socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof addr;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 8) != 0 ||
      ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(listen_fd_);
    throw UnreachableError("cannot bind NTS-KE listening socket");
  }
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { run(); });
}

MockKeServer::~MockKeServer() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void MockKeServer::run() {
  while (!stop_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    timeval tv{2, 0};
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    serve(fd);
    ::close(fd);
  }
}

void MockKeServer::serve(int fd) {
  SSL* ssl = SSL_new(tls_->ctx);
  SSL_set_fd(ssl, fd);
  auto done = [&] {
    SSL_free(ssl);
    ERR_clear_error();
  };
  if (SSL_accept(ssl) != 1) return done();

  Bytes buf;
  std::optional<size_t> len;
  while (!(len = message_length(buf))) {
    uint8_t chunk[2048];
    const int n = SSL_read(ssl, chunk, sizeof chunk);
    if (n <= 0) return done();
    buf.insert(buf.end(), chunk, chunk + n);
  }
  buf.resize(*len);

  std::vector<KeRecord> reply;
  bool ntp_requested = false;
  try {
    for (const KeRecord& r : decode_records(buf)) {
      if (r.type == static_cast<uint16_t>(RecordType::NextProtocol)) {
        for (size_t i = 0; i + 1 < r.body.size(); i += 2) {
          if ((r.body[i] << 8 | r.body[i + 1]) == kNextProtocolNtpv4) ntp_requested = true;
        }
      }
    }
  } catch (const NtsError&) {
    ntp_requested = false;
  }
  if (!ntp_requested) {
    reply.push_back({true, static_cast<uint16_t>(RecordType::Error), u16_body(1)});
  } else {
    reply.push_back({true, static_cast<uint16_t>(RecordType::NextProtocol), u16_body(kNextProtocolNtpv4)});
    reply.push_back({false, static_cast<uint16_t>(RecordType::AeadAlgorithm), u16_body(opts_.aead)});
    CookieJar::Keys keys;
    keys.aead = crypto::AesSivCmac256::kIanaId;
    keys.c2s.resize(crypto::AesSivCmac256::kKeySize);
    keys.s2c.resize(crypto::AesSivCmac256::kKeySize);
    const Bytes c2s_ctx = exporter_context(keys.aead, 0);
    const Bytes s2c_ctx = exporter_context(keys.aead, 1);
    SSL_export_keying_material(ssl, keys.c2s.data(), keys.c2s.size(), kExporterLabel.data(), kExporterLabel.size(),
                               c2s_ctx.data(), c2s_ctx.size(), 1);
    SSL_export_keying_material(ssl, keys.s2c.data(), keys.s2c.size(), kExporterLabel.data(), kExporterLabel.size(),
                               s2c_ctx.data(), s2c_ctx.size(), 1);
    for (size_t i = 0; i < opts_.cookies; ++i) {
      reply.push_back({false, static_cast<uint16_t>(RecordType::NewCookie), jar_->make(keys)});
    }
    if (opts_.ntp_server) {
      reply.push_back({false, static_cast<uint16_t>(RecordType::Server),
                       Bytes(opts_.ntp_server->begin(), opts_.ntp_server->end())});
    }
    if (opts_.ntp_port) reply.push_back({false, static_cast<uint16_t>(RecordType::Port), u16_body(*opts_.ntp_port)});
  }
  reply.push_back({true, static_cast<uint16_t>(RecordType::EndOfMessage), {}});
  const Bytes wire = encode_records(reply);
  SSL_write(ssl, wire.data(), static_cast<int>(wire.size()));
  SSL_shutdown(ssl);
  done();
}

}  // namespace gtv::nts
