#include "gtv/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/crypto.h>
#include <openssl/rand.h>

#include <cstring>

#include "gtv/error.hpp"

namespace gtv {

std::string to_hex(ByteView b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (uint8_t v : b) {
    out.push_back(kDigits[v >> 4]);
    out.push_back(kDigits[v & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  int hi = -1;
  for (char c : hex) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    const int v = nibble(c);
    if (v < 0) throw InputError("invalid hex digit");
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<uint8_t>(hi << 4 | v));
      hi = -1;
    }
  }
  if (hi >= 0) throw InputError("odd number of hex digits");
  return out;
}

std::string to_base64(ByteView b) {
  std::string out(4 * ((b.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), b.data(),
                                static_cast<int>(b.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

Bytes from_base64(std::string_view text) {
  std::string clean;
  for (char c : text) {
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') clean.push_back(c);
  }
  if (clean.size() % 4 != 0) throw InputError("base64 length not a multiple of 4");
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw InputError("invalid base64");
  size_t len = static_cast<size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  if (!clean.empty() && clean.back() == '=') --len;
  if (clean.size() >= 2 && clean[clean.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

}  // namespace gtv

namespace gtv::crypto {

namespace {

struct CtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
  void operator()(EVP_MAC* m) const { EVP_MAC_free(m); }
  void operator()(EVP_MAC_CTX* c) const { EVP_MAC_CTX_free(c); }
};

using MdCtx = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;
using PKey = std::unique_ptr<EVP_PKEY, CtxDeleter>;

PKey ed25519_private(std::span<const uint8_t, 32> seed) {
  PKey k(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size()));
  if (!k) throw CryptoError("Ed25519 key construction failed");
  return k;
}

}  // namespace

void SystemRandom::fill(std::span<uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw CryptoError("RAND_bytes failed");
  }
}

RandomSource& system_random() {
  static SystemRandom rng;
  return rng;
}

struct Sha512::Impl {
  MdCtx ctx{EVP_MD_CTX_new()};
};

Sha512::Sha512() : impl_(std::make_unique<Impl>()) {
  if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx.get(), EVP_sha512(), nullptr) != 1) {
    throw CryptoError("SHA-512 init failed");
  }
}

Sha512::~Sha512() = default;

Sha512& Sha512::update(ByteView data) {
  if (EVP_DigestUpdate(impl_->ctx.get(), data.data(), data.size()) != 1) {
    throw CryptoError("SHA-512 update failed");
  }
  return *this;
}

Sha512Digest Sha512::finish() {
  Sha512Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(impl_->ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw CryptoError("SHA-512 final failed");
  }
  return out;
}

Sha512Digest sha512(ByteView data) {
  return Sha512().update(data).finish();
}

Ed25519PrivateKey Ed25519PrivateKey::generate(RandomSource& rng) {
  const auto seed = rng.array<32>();
  return from_seed(seed);
}

Ed25519PrivateKey Ed25519PrivateKey::from_seed(std::span<const uint8_t, 32> seed) {
  Ed25519PrivateKey key;
  std::memcpy(key.seed_.data(), seed.data(), 32);
  const PKey pkey = ed25519_private(seed);
  size_t len = key.public_.size();
  if (EVP_PKEY_get_raw_public_key(pkey.get(), key.public_.data(), &len) != 1 || len != 32) {
    throw CryptoError("Ed25519 public key derivation failed");
  }
  return key;
}

Ed25519Signature Ed25519PrivateKey::sign(ByteView message) const {
  const PKey pkey = ed25519_private(seed_);
  MdCtx ctx(EVP_MD_CTX_new());
  Ed25519Signature sig{};
  size_t len = sig.size();
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1 ||
      EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1) {
    throw CryptoError("Ed25519 signing failed");
  }
  return sig;
}

bool ed25519_verify(const Ed25519PublicKey& key, ByteView message, const Ed25519Signature& sig) {
  PKey pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, key.data(), key.size()));
  if (!pkey) return false;
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1) {
    throw CryptoError("Ed25519 verify init failed");
  }
  return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), message.data(), message.size()) == 1;
}

AesSivCmac256::AesSivCmac256(ByteView key) {
  if (key.size() != kKeySize) throw CryptoError("AES-SIV-CMAC-256 requires a 32-byte key");
  std::memcpy(key_.data(), key.data(), kKeySize);
}

namespace {

using Block = std::array<uint8_t, 16>;

// CMAC-AES-128 keyed with the first half of the SIV key (RFC 4493).
class Cmac {
 public:
  explicit Cmac(ByteView key) : key_(key) {
    static const std::unique_ptr<EVP_MAC, CtxDeleter> mac(EVP_MAC_fetch(nullptr, "CMAC", nullptr));
    if (!mac) throw CryptoError("CMAC unavailable in this OpenSSL build");
    ctx_.reset(EVP_MAC_CTX_new(mac.get()));
    if (!ctx_) throw CryptoError("CMAC context allocation failed");
  }

  Block operator()(ByteView a, ByteView b = {}) {
    static char cipher[] = "AES-128-CBC";
    const OSSL_PARAM params[] = {OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_CIPHER, cipher, 0),
                                 OSSL_PARAM_construct_end()};
    Block out{};
    size_t len = 0;
    if (EVP_MAC_init(ctx_.get(), key_.data(), key_.size(), params) != 1 ||
        (!a.empty() && EVP_MAC_update(ctx_.get(), a.data(), a.size()) != 1) ||
        (!b.empty() && EVP_MAC_update(ctx_.get(), b.data(), b.size()) != 1) ||
        EVP_MAC_final(ctx_.get(), out.data(), &len, out.size()) != 1 || len != out.size()) {
      throw CryptoError("CMAC computation failed");
    }
    return out;
  }

 private:
  ByteView key_;
  std::unique_ptr<EVP_MAC_CTX, CtxDeleter> ctx_;
};

Block dbl(const Block& in) {
  Block out{};
  for (size_t i = 0; i < 16; ++i) {
    out[i] = static_cast<uint8_t>(in[i] << 1 | (i + 1 < 16 ? in[i + 1] >> 7 : 0));
  }
  if (in[0] & 0x80) out[15] ^= 0x87;
  return out;
}

void xor_into(Block& d, ByteView s) {
  for (size_t i = 0; i < 16; ++i) d[i] ^= s[i];
}

// RFC 5297 S2V: the plaintext is the final string after the header components.
Block s2v(ByteView mac_key, std::span<const ByteView> components, ByteView plaintext) {
  Cmac cmac(mac_key);
  Block d = cmac(Block{});
  for (const ByteView c : components) {
    d = dbl(d);
    xor_into(d, cmac(c));
  }
  if (plaintext.size() >= 16) {
    // xorend: D is folded into the last 16 bytes of the plaintext
    Block tail;
    std::memcpy(tail.data(), plaintext.data() + plaintext.size() - 16, 16);
    xor_into(tail, d);
    return cmac(plaintext.first(plaintext.size() - 16), tail);
  }
  Block t = dbl(d);
  Block padded{};
  std::memcpy(padded.data(), plaintext.data(), plaintext.size());
  padded[plaintext.size()] = 0x80;
  xor_into(t, padded);
  return cmac(t);
}

Bytes aes_ctr(ByteView ctr_key, const Block& v, ByteView in) {
  Block iv = v;
  iv[8] &= 0x7f;
  iv[12] &= 0x7f;
  Bytes out(in.size());
  if (in.empty()) return out;
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  int fin = 0;
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, ctr_key.data(), iv.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, in.data(), static_cast<int>(in.size())) != 1 ||
      EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) {
    throw CryptoError("AES-CTR failed");
  }
  return out;
}

}  // namespace

Bytes AesSivCmac256::seal(ByteView nonce, ByteView associated_data, ByteView plaintext) const {
  const ByteView parts[] = {associated_data, nonce};
  return seal_components(parts, plaintext);
}

std::optional<Bytes> AesSivCmac256::open(ByteView nonce, ByteView associated_data, ByteView ciphertext) const {
  const ByteView parts[] = {associated_data, nonce};
  return open_components(parts, ciphertext);
}

Bytes AesSivCmac256::seal_components(std::span<const ByteView> components, ByteView plaintext) const {
  const ByteView key(key_);
  const Block v = s2v(key.first(16), components, plaintext);
  Bytes out(v.begin(), v.end());
  const Bytes ct = aes_ctr(key.subspan(16), v, plaintext);
  out.insert(out.end(), ct.begin(), ct.end());
  return out;
}

std::optional<Bytes> AesSivCmac256::open_components(std::span<const ByteView> components,
                                                    ByteView ciphertext) const {
  if (ciphertext.size() < kTagSize) return std::nullopt;
  const ByteView key(key_);
  Block v;
  std::memcpy(v.data(), ciphertext.data(), kTagSize);
  Bytes plain = aes_ctr(key.subspan(16), v, ciphertext.subspan(kTagSize));
  const Block check = s2v(key.first(16), components, plain);
  if (CRYPTO_memcmp(check.data(), v.data(), kTagSize) != 0) return std::nullopt;
  return plain;
}

}  // namespace gtv::crypto
