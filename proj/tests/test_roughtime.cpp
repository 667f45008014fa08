#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "gtv/rng.hpp"
#include "gtv/roughtime.hpp"
#include "gtv/roughtime_server.hpp"

using namespace gtv;
using namespace gtv::roughtime;

namespace {

const Timestamp kNow{1689182889, 0};

Bytes fixed_nonce() {
  Bytes n(32);
  for (size_t i = 0; i < n.size(); ++i) n[i] = static_cast<uint8_t>(i);
  return n;
}

struct Fixture {
  sim::SeededRandom rng{42};
  MockServer server{crypto::Ed25519PrivateKey::generate(rng), rng, [] { return kNow; }};
  ServerKey key = server.key();
};

Bytes read_golden(const std::string& name) {
  std::ifstream in(std::string(GTV_TEST_DATA) + "/" + name);
  std::string hex;
  in >> hex;
  return from_hex(hex);
}

// Offset of `needle` inside `hay`, asserting it occurs.
size_t find_bytes(const Bytes& hay, const Bytes& needle) {
  const auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end());
  EXPECT_NE(it, hay.end());
  return static_cast<size_t>(it - hay.begin());
}

}  // namespace

TEST(BuildRequest, GoldenFile) {
  const auto req = build_request(default_profile(), fixed_nonce());
  EXPECT_EQ(req, read_golden("roughtime_request_ietf07.hex"));
  ASSERT_EQ(req.size(), 1024u);
  // Layout: 8-byte magic, 4-byte length, then 3 tags (VER, NONC, ZZZZ).
  EXPECT_EQ(std::string(req.begin(), req.begin() + 8), "ROUGHTIM");
  EXPECT_EQ(req[12], 3);
}

TEST(BuildRequest, NoncesDifferOnlyInNonceField) {
  auto other = fixed_nonce();
  std::reverse(other.begin(), other.end());
  const auto a = build_request(default_profile(), fixed_nonce());
  const auto b = build_request(default_profile(), other);
  ASSERT_EQ(a.size(), b.size());
  const size_t at = find_bytes(a, fixed_nonce());
  for (size_t i = 0; i < a.size(); ++i) {
    if (i >= at && i < at + 32) continue;
    ASSERT_EQ(a[i], b[i]) << "byte " << i;
  }
}

TEST(BuildRequest, NonceRoundTrip) {
  for (const char* name : {"ietf-07", "google"}) {
    const auto& p = profile(name);
    Bytes n(p.nonce_size, 0x5a);
    n[0] = 1;
    EXPECT_EQ(decode_request_nonce(p, build_request(p, n)), n) << name;
    EXPECT_GE(build_request(p, n).size(), p.min_request_size);
  }
}

TEST(Codec, RoundTripArbitraryMessages) {
  sim::CounterRng g(31);
  for (int trial = 0; trial < 2000; ++trial) {
    Message m;
    const int tags = static_cast<int>(g.next_u64() % 8);
    for (int t = 0; t < tags; ++t) {
      const uint32_t tag = static_cast<uint32_t>(g.next_u64());
      Bytes v(4 * (g.next_u64() % 10));
      for (auto& b : v) b = static_cast<uint8_t>(g.next_u64());
      m[tag] = v;
    }
    ASSERT_EQ(decode_message(encode_message(m)), m);
  }
}

TEST(Codec, MalformedInputs) {
  EXPECT_THROW(decode_message(Bytes{1, 0, 0}), RoughtimeError);
  // Two tags, offset pointing past the end.
  const Bytes bad = {2, 0, 0, 0, 64, 0, 0, 0, 'A', 'A', 'A', 'A', 'B', 'B', 'B', 'B'};
  try {
    decode_message(bad);
    FAIL();
  } catch (const RoughtimeError& e) {
    EXPECT_EQ(e.failure(), VerifyFailure::Malformed);
  }
}

TEST(Merkle, SingleLeafRootIsLeafHash) {
  Fixture f;
  const auto nonce = fixed_nonce();
  const auto resp = f.server.handle(build_request(default_profile(), nonce));
  ASSERT_TRUE(resp);
  const auto msg = decode_message(unframe_packet(default_profile(), *resp));
  const auto srep = decode_message(msg.at(kTagSrep));

  // Direct recomputation: SHA-512(0x00 || nonce) truncated to 32 bytes.
  Bytes prefixed = {0x00};
  prefixed.insert(prefixed.end(), nonce.begin(), nonce.end());
  const auto digest = crypto::sha512(prefixed);
  const Bytes expect(digest.begin(), digest.begin() + 32);
  EXPECT_EQ(srep.at(kTagRoot), expect);
  EXPECT_EQ(merkle_leaf(default_profile(), nonce), expect);
  EXPECT_NO_THROW(verify_response(*resp, nonce, f.key, {1}));
}

TEST(Verify, SelfSignedChainSucceeds) {
  Fixture f;
  const auto nonce = fixed_nonce();
  const auto resp = f.server.handle(build_request(default_profile(), nonce));
  const auto m = verify_response(*resp, nonce, f.key, {99});
  EXPECT_EQ(m.midpoint(), kNow);
  EXPECT_EQ(m.radius(), SignedDuration::from_seconds(1));
  EXPECT_EQ(m.t_mono_rx().nanos, 99u);
  EXPECT_EQ(m.server_id(), f.key.fingerprint());
}

TEST(Verify, BatchedTreeEveryLeafVerifies) {
  Fixture f;
  std::vector<Bytes> nonces;
  for (int i = 0; i < 7; ++i) nonces.push_back(f.rng.bytes(32));
  const auto resps = f.server.respond_batch(nonces);
  ASSERT_EQ(resps.size(), nonces.size());
  for (size_t i = 0; i < nonces.size(); ++i) {
    EXPECT_NO_THROW(verify_response(resps[i], nonces[i], f.key, {})) << i;
    EXPECT_THROW(verify_response(resps[i], nonces[(i + 1) % nonces.size()], f.key, {}), RoughtimeError);
  }
}

TEST(Verify, BitFlipInSignedRegionsAlwaysRejected) {
  Fixture f;
  const auto nonce = fixed_nonce();
  const auto resp = *f.server.handle(build_request(default_profile(), nonce));
  const auto msg = decode_message(unframe_packet(default_profile(), resp));
  const auto cert = decode_message(msg.at(kTagCert));

  // Signed regions: SREP, the DELE inside CERT, and both signatures.
  std::vector<std::pair<size_t, size_t>> regions;
  for (const auto& v : {msg.at(kTagSrep), cert.at(kTagDele), msg.at(kTagSig), cert.at(kTagSig)}) {
    regions.emplace_back(find_bytes(resp, v), v.size());
  }
  size_t flips = 0, rejected = 0;
  for (const auto& [start, len] : regions) {
    for (size_t i = start; i < start + len; ++i) {
      for (int bit = 0; bit < 8; ++bit) {
        auto bad = resp;
        bad[i] ^= static_cast<uint8_t>(1u << bit);
        ++flips;
        try {
          verify_response(bad, nonce, f.key, {});
        } catch (const RoughtimeError&) {
          ++rejected;
        }
      }
    }
  }
  EXPECT_GT(flips, 0u);
  EXPECT_EQ(rejected, flips);
}

TEST(Verify, DistinctFailureCodes) {
  Fixture f;
  const auto nonce = fixed_nonce();
  const auto resp = *f.server.handle(build_request(default_profile(), nonce));
  auto failure = [&](const Bytes& r, const ServerKey& k) {
    try {
      verify_response(r, nonce, k, {});
    } catch (const RoughtimeError& e) {
      return e.failure();
    }
    ADD_FAILURE() << "accepted";
    return VerifyFailure::Malformed;
  };
  EXPECT_EQ(failure(Bytes(resp.begin(), resp.begin() + 20), f.key), VerifyFailure::Malformed);

  ServerKey wrong = f.key;
  wrong.public_key[0] ^= 1;
  EXPECT_EQ(failure(resp, wrong), VerifyFailure::BadCertSignature);

  const auto msg = decode_message(unframe_packet(default_profile(), resp));
  auto sig_bad = resp;
  sig_bad[find_bytes(resp, msg.at(kTagSig))] ^= 1;
  EXPECT_EQ(failure(sig_bad, f.key), VerifyFailure::BadResponseSignature);

  auto other = nonce;
  other[0] ^= 1;
  EXPECT_THROW(
      {
        try {
          verify_response(resp, other, f.key, {});
        } catch (const RoughtimeError& e) {
          EXPECT_EQ(e.failure(), VerifyFailure::MerkleMismatch);
          throw;
        }
      },
      RoughtimeError);
}

TEST(Verify, MidpointOutsideDelegationWindow) {
  sim::SeededRandom rng(7);
  MockServer::Options o;
  o.mint = Timestamp{kNow.seconds - 10, 0};
  o.maxt = Timestamp{kNow.seconds + 10, 0};
  MockServer server(crypto::Ed25519PrivateKey::generate(rng), rng, [] { return kNow; }, o);
  server.behavior().midpoint_bias = SignedDuration::from_seconds(60);
  const auto nonce = fixed_nonce();
  const auto resp = *server.handle(build_request(default_profile(), nonce));
  try {
    verify_response(resp, nonce, server.key(), {});
    FAIL();
  } catch (const RoughtimeError& e) {
    EXPECT_EQ(e.failure(), VerifyFailure::MidpointOutsideWindow);
  }
}

TEST(Verify, GoogleProfileRoundTrip) {
  sim::SeededRandom rng(8);
  MockServer::Options o;
  o.version = "google";
  MockServer server(crypto::Ed25519PrivateKey::generate(rng), rng, [] { return kNow; }, o);
  const Bytes nonce = rng.bytes(64);
  const auto resp = *server.handle(build_request(profile("google"), nonce));
  const auto m = verify_response(resp, nonce, server.key(), {});
  EXPECT_EQ(m.midpoint(), kNow);
}

TEST(Poll, MockServerReturnsMeasurement) {
  Fixture f;
  LoopbackTransport t([&](ByteView r) { return f.server.handle(r); });
  const auto m = poll(f.key, t, f.rng);
  EXPECT_EQ(m.midpoint(), kNow);
}

TEST(Poll, DroppedPacketsRetryThenUnreachable) {
  Fixture f;
  LoopbackTransport t([&](ByteView r) { return f.server.handle(r); });
  f.server.behavior().drop_next = 2;
  EXPECT_NO_THROW(poll(f.key, t, f.rng));
  EXPECT_EQ(f.server.requests_seen(), 3u);

  f.server.behavior().drop_all = true;
  EXPECT_THROW(poll(f.key, t, f.rng), UnreachableError);
  EXPECT_EQ(f.server.requests_seen(), 6u);
}

TEST(Poll, ReplayedResponseIsMerkleMismatch) {
  Fixture f;
  LoopbackTransport t([&](ByteView r) { return f.server.handle(r); });
  poll(f.key, t, f.rng);
  f.server.behavior().replay_previous = true;
  try {
    poll(f.key, t, f.rng);
    FAIL();
  } catch (const RoughtimeError& e) {
    EXPECT_EQ(e.failure(), VerifyFailure::MerkleMismatch);
  }
}

TEST(Poll, OverUdp) {
  Fixture f;
  UdpServer udp([&](ByteView r) { return f.server.handle(r); });
  UdpTransport t("127.0.0.1", udp.port());
  const auto m = poll(f.server.key("127.0.0.1:" + std::to_string(udp.port())), t, f.rng);
  EXPECT_EQ(m.radius(), SignedDuration::from_seconds(1));
}

TEST(NonceProperty, NoDuplicatesInMillionDraws) {
  std::set<std::array<uint8_t, 32>> seen;
  auto& rng = crypto::system_random();
  for (int i = 0; i < 1'000'000; ++i) ASSERT_TRUE(seen.insert(rng.array<32>()).second);
}

TEST(Time, WireEncodingRoundTrip) {
  const auto& p = default_profile();
  EXPECT_EQ(decode_time(p, encode_time(p, kNow)), kNow);
  EXPECT_EQ(decode_radius(p, encode_radius(p, SignedDuration::from_seconds(1))), SignedDuration::from_seconds(1));
}

TEST(ServerKeyParse, RejectsWrongLength) {
  EXPECT_THROW(ServerKey::from_base64(to_base64(Bytes(31, 1)), "x:1", "ietf-07"), ConfigError);
  EXPECT_NO_THROW(ServerKey::from_base64(to_base64(Bytes(32, 1)), "x:1", "ietf-07"));
}
