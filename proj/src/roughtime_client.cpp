#include <cstring>

#include "gtv/roughtime.hpp"

namespace gtv::roughtime {

namespace {

const Bytes& require(const Message& m, uint32_t tag, size_t size, const char* where) {
  const auto it = m.find(tag);
  if (it == m.end()) {
    throw RoughtimeError(VerifyFailure::Malformed, std::string(where) + " lacks " + tag_name(tag));
  }
  if (size != 0 && it->second.size() != size) {
    throw RoughtimeError(VerifyFailure::Malformed, std::string(where) + "." + tag_name(tag) + " has length " +
                                                       std::to_string(it->second.size()));
  }
  return it->second;
}

uint64_t le64(const Bytes& b) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | b[static_cast<size_t>(i)];
  return v;
}

uint32_t le32(const Bytes& b) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = v << 8 | b[static_cast<size_t>(i)];
  return v;
}

Bytes with_context(std::string_view ctx, const Bytes& body) {
  Bytes out(ctx.begin(), ctx.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

crypto::Ed25519Signature as_signature(const Bytes& b) {
  crypto::Ed25519Signature s{};
  std::memcpy(s.data(), b.data(), s.size());
  return s;
}

}  // namespace

const char* to_string(VerifyFailure f) {
  switch (f) {
    case VerifyFailure::Malformed: return "malformed-tags";
    case VerifyFailure::BadCertSignature: return "bad-cert-signature";
    case VerifyFailure::BadResponseSignature: return "bad-response-signature";
    case VerifyFailure::MerkleMismatch: return "merkle-mismatch";
    case VerifyFailure::MidpointOutsideWindow: return "midpoint-outside-window";
  }
  return "unknown";
}

ServerKey ServerKey::from_base64(std::string_view key_b64, std::string address, std::string version) {
  Bytes raw;
  try {
    raw = gtv::from_base64(key_b64);
  } catch (const InputError& e) {
    throw ConfigError(std::string("Roughtime key: ") + e.what());
  }
  if (raw.size() != 32) throw ConfigError("Roughtime public key must be exactly 32 bytes");
  profile(version);  // rejects unknown versions early
  ServerKey k;
  std::memcpy(k.public_key.data(), raw.data(), 32);
  k.address = std::move(address);
  k.version = std::move(version);
  return k;
}

std::string ServerKey::fingerprint() const {
  const auto d = crypto::sha512(public_key);
  return to_hex(ByteView(d.data(), 8));
}

Measurement verify_response(ByteView response, ByteView nonce, const ServerKey& key,
                            MonotonicInstant t_mono_rx) {
  const WireProfile& p = profile(key.version);
  if (nonce.size() != p.nonce_size) throw InputError("nonce size does not match the pinned profile");

  const Message top = decode_message(unframe_packet(p, response));
  const Bytes& sig = require(top, kTagSig, 64, "response");
  const Bytes& srep_bytes = require(top, kTagSrep, 0, "response");
  const Bytes& cert_bytes = require(top, kTagCert, 0, "response");
  const Bytes& indx = require(top, kTagIndx, 4, "response");
  const Bytes& path = require(top, kTagPath, 0, "response");
  if (path.size() % p.tree_hash_size != 0 || path.size() / p.tree_hash_size > 32) {
    throw RoughtimeError(VerifyFailure::Malformed, "PATH length invalid");
  }

  const Message cert = decode_message(cert_bytes);
  const Bytes& dele_bytes = require(cert, kTagDele, 0, "CERT");
  const Bytes& cert_sig = require(cert, kTagSig, 64, "CERT");
  const Message dele = decode_message(dele_bytes);
  const Bytes& pubk = require(dele, kTagPubk, 32, "DELE");
  const Bytes& mint = require(dele, kTagMint, 8, "DELE");
  const Bytes& maxt = require(dele, kTagMaxt, 8, "DELE");

  const Message srep = decode_message(srep_bytes);
  const Bytes& root = require(srep, kTagRoot, p.tree_hash_size, "SREP");
  const Bytes& midp = require(srep, kTagMidp, 8, "SREP");
  const Bytes& radi = require(srep, kTagRadi, 4, "SREP");

  // (1) delegation certificate signed by the long-term key
  if (!crypto::ed25519_verify(key.public_key, with_context(kDelegationContext, dele_bytes), as_signature(cert_sig))) {
    throw RoughtimeError(VerifyFailure::BadCertSignature, "delegation not signed by " + key.fingerprint());
  }
  // (2) signed response under the delegated key
  crypto::Ed25519PublicKey delegated{};
  std::memcpy(delegated.data(), pubk.data(), 32);
  if (!crypto::ed25519_verify(delegated, with_context(kResponseContext, srep_bytes), as_signature(sig))) {
    throw RoughtimeError(VerifyFailure::BadResponseSignature, "SREP signature invalid");
  }
  // (3) the request nonce is a leaf of the signed tree
  uint32_t index = le32(indx);
  Bytes hash = merkle_leaf(p, nonce);
  for (size_t off = 0; off < path.size(); off += p.tree_hash_size) {
    const ByteView sibling(path.data() + off, p.tree_hash_size);
    hash = (index & 1) == 0 ? merkle_node(p, hash, sibling) : merkle_node(p, sibling, hash);
    index >>= 1;
  }
  if (index != 0 || hash != root) {
    throw RoughtimeError(VerifyFailure::MerkleMismatch, "nonce not covered by the signed Merkle root");
  }
  // (4) midpoint inside the delegation window
  const Timestamp midpoint = decode_time(p, le64(midp));
  const Timestamp lo = decode_time(p, le64(mint));
  const Timestamp hi = decode_time(p, le64(maxt));
  if (midpoint < lo || midpoint > hi) {
    throw RoughtimeError(VerifyFailure::MidpointOutsideWindow,
                         "midpoint " + midpoint.to_string() + " outside [" + lo.to_string() + ", " +
                             hi.to_string() + "]");
  }
  return Measurement(midpoint, decode_radius(p, le32(radi)), key.fingerprint(), t_mono_rx);
}

Measurement poll(const ServerKey& server, DatagramTransport& transport, crypto::RandomSource& rng,
                 const PollOptions& opts) {
  const WireProfile& p = profile(server.version);
  for (int attempt = 0; attempt < opts.attempts; ++attempt) {
    const Bytes nonce = rng.bytes(p.nonce_size);
    const Bytes request = build_request(p, nonce);
    const auto reply = transport.exchange(request, opts.timeout);
    if (!reply) continue;
    return verify_response(*reply, nonce, server, opts.clock());
  }
  throw UnreachableError("Roughtime server " + server.address + " did not answer after " +
                         std::to_string(opts.attempts) + " attempts");
}

}  // namespace gtv::roughtime
