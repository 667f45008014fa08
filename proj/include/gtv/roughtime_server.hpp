#pragma once

// In-process Roughtime responder for tests and simulations. Signs with a
// delegated key certified by its long-term key and batches nonces into a
// Merkle tree the same way a public server does.

#include <functional>
#include <mutex>
#include <optional>
#include <vector>

#include "gtv/roughtime.hpp"

namespace gtv::roughtime {

class MockServer {
 public:
  using TimeSource = std::function<Timestamp()>;

  struct Options {
    std::string version = "ietf-07";
    SignedDuration radius = SignedDuration::from_seconds(1);
    /// Delegation validity; defaults to +-30 days around the clock at construction.
    std::optional<Timestamp> mint;
    std::optional<Timestamp> maxt;
  };

  /// Test hooks.
  struct Behavior {
    int drop_next = 0;             // silently drop this many requests
    bool drop_all = false;
    bool replay_previous = false;  // answer with the previous response instead
    SignedDuration midpoint_bias;  // added to the reported midpoint
  };

  MockServer(crypto::Ed25519PrivateKey long_term, crypto::RandomSource& rng, TimeSource clock, Options opts);
  MockServer(crypto::Ed25519PrivateKey long_term, crypto::RandomSource& rng, TimeSource clock)
      : MockServer(std::move(long_term), rng, std::move(clock), Options{}) {}

  ServerKey key(std::string address = "127.0.0.1:2002") const;
  const WireProfile& wire_profile() const { return profile_; }

  /// Answers one request packet; nullopt when the request is dropped or malformed.
  std::optional<Bytes> handle(ByteView request);
  /// Signs one tree covering all nonces and returns one response per nonce.
  std::vector<Bytes> respond_batch(const std::vector<Bytes>& nonces);

  Behavior& behavior() { return behavior_; }
  size_t requests_seen() const { return requests_; }

 private:
  const WireProfile& profile_;
  crypto::Ed25519PrivateKey long_term_;
  crypto::Ed25519PrivateKey delegated_;
  TimeSource clock_;
  Options opts_;
  Bytes cert_;
  Behavior behavior_;
  std::optional<Bytes> previous_;
  size_t requests_ = 0;
  std::mutex mu_;
};

}  // namespace gtv::roughtime
