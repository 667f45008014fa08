#pragma once

// Test doubles for NTS: a stateless cookie scheme, an NTP responder that
// authenticates requests and reissues cookies, and a TLS 1.3 NTS-KE server
// with a certificate generated at startup.

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

#include "gtv/nts.hpp"

namespace gtv::nts {

/// Cookies are the session keys sealed under a server master key.
class CookieJar {
 public:
  explicit CookieJar(crypto::RandomSource& rng = crypto::system_random());

  struct Keys {
    uint16_t aead = 0;
    Bytes c2s;
    Bytes s2c;
  };

  Bytes make(const Keys& keys);
  std::optional<Keys> open(ByteView cookie) const;

 private:
  crypto::RandomSource& rng_;
  Bytes master_;
  std::mutex mu_;
};

class MockNtpServer {
 public:
  using TimeSource = std::function<Timestamp()>;

  struct Behavior {
    int drop_next = 0;
    bool drop_all = false;
    bool flip_ciphertext_bit = false;
    bool wrong_unique_id = false;
    SignedDuration bias;                                      // added to T2 and T3
    SignedDuration processing = SignedDuration::from_micros(10);  // T3 - T2
  };

  MockNtpServer(std::shared_ptr<CookieJar> jar, TimeSource clock,
                crypto::RandomSource& rng = crypto::system_random(), int era = 0);

  std::optional<Bytes> handle(ByteView request);

  /// Keys and cookies minted directly, standing in for a completed handshake.
  NtsSession psk_session(std::string server_id = "mock-nts", size_t cookies = 8);

  Behavior& behavior() { return behavior_; }
  /// Every cookie presented by a client, in arrival order.
  const std::vector<Bytes>& cookies_seen() const { return cookies_seen_; }

 private:
  std::shared_ptr<CookieJar> jar_;
  TimeSource clock_;
  crypto::RandomSource& rng_;
  int era_;
  Behavior behavior_;
  std::vector<Bytes> cookies_seen_;
  std::mutex mu_;
};

class MockKeServer {
 public:
  struct Options {
    uint16_t aead = crypto::AesSivCmac256::kIanaId;  // what the server claims to select
    size_t cookies = 8;
    std::optional<std::string> ntp_server;
    std::optional<uint16_t> ntp_port;
  };

  MockKeServer(std::shared_ptr<CookieJar> jar, Options opts);
  explicit MockKeServer(std::shared_ptr<CookieJar> jar) : MockKeServer(std::move(jar), Options{}) {}
  ~MockKeServer();
  MockKeServer(const MockKeServer&) = delete;
  MockKeServer& operator=(const MockKeServer&) = delete;

  uint16_t port() const { return port_; }
  /// Self-signed certificate for 127.0.0.1 / localhost, to use as the client trust anchor.
  const std::string& certificate_pem() const { return cert_pem_; }

 private:
  struct Tls;
  void run();
  void serve(int fd);

  std::shared_ptr<CookieJar> jar_;
  Options opts_;
  std::unique_ptr<Tls> tls_;
  std::string cert_pem_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

}  // namespace gtv::nts
