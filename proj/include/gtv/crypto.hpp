#pragma once

// Thin RAII wrappers over OpenSSL for the primitives the providers need:
// SHA-512, Ed25519 and AEAD_AES_SIV_CMAC_256 (RFC 5297 / RFC 5116).

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gtv {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

std::string to_hex(ByteView b);
Bytes from_hex(std::string_view hex);
std::string to_base64(ByteView b);
Bytes from_base64(std::string_view text);

}  // namespace gtv

namespace gtv::crypto {

/// Source of nonces and key material. Live operation draws from the OS
/// CSPRNG; simulations inject a seeded generator so traces are reproducible.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<uint8_t> out) = 0;

  template <size_t N>
  std::array<uint8_t, N> array() {
    std::array<uint8_t, N> a{};
    fill(a);
    return a;
  }
  Bytes bytes(size_t n) {
    Bytes b(n);
    fill(b);
    return b;
  }
};

class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<uint8_t> out) override;
};

/// Process-wide CSPRNG instance.
RandomSource& system_random();

using Sha512Digest = std::array<uint8_t, 64>;

Sha512Digest sha512(ByteView data);

class Sha512 {
 public:
  Sha512();
  ~Sha512();
  Sha512(const Sha512&) = delete;
  Sha512& operator=(const Sha512&) = delete;

  Sha512& update(ByteView data);
  Sha512& update(uint8_t byte) { return update(ByteView(&byte, 1)); }
  Sha512Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

using Ed25519PublicKey = std::array<uint8_t, 32>;
using Ed25519Signature = std::array<uint8_t, 64>;

class Ed25519PrivateKey {
 public:
  static Ed25519PrivateKey generate(RandomSource& rng = system_random());
  static Ed25519PrivateKey from_seed(std::span<const uint8_t, 32> seed);

  const Ed25519PublicKey& public_key() const { return public_; }
  Ed25519Signature sign(ByteView message) const;

 private:
  std::array<uint8_t, 32> seed_{};
  Ed25519PublicKey public_{};
};

bool ed25519_verify(const Ed25519PublicKey& key, ByteView message, const Ed25519Signature& sig);

/// AEAD_AES_SIV_CMAC_256: 32-byte key, 16-byte synthetic IV prepended to the
/// ciphertext. The nonce is processed as the final associated-data component.
class AesSivCmac256 {
 public:
  static constexpr size_t kKeySize = 32;
  static constexpr size_t kTagSize = 16;
  static constexpr uint16_t kIanaId = 15;

  explicit AesSivCmac256(ByteView key);

  Bytes seal(ByteView nonce, ByteView associated_data, ByteView plaintext) const;
  /// Returns nullopt when authentication fails.
  std::optional<Bytes> open(ByteView nonce, ByteView associated_data, ByteView ciphertext) const;

  /// S2V over an explicit list of associated-data components (the nonce, if
  /// any, is simply the last one).
  Bytes seal_components(std::span<const ByteView> components, ByteView plaintext) const;
  std::optional<Bytes> open_components(std::span<const ByteView> components, ByteView ciphertext) const;

 private:
  std::array<uint8_t, kKeySize> key_{};
};

}  // namespace gtv::crypto
