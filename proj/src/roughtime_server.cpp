#include "gtv/roughtime_server.hpp"

namespace gtv::roughtime {

namespace {

Bytes le_bytes(uint64_t v, int n) {
  Bytes b;
  for (int i = 0; i < n; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
  return b;
}

Bytes signed_body(std::string_view ctx, const Bytes& body) {
  Bytes out(ctx.begin(), ctx.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

}  // namespace

MockServer::MockServer(crypto::Ed25519PrivateKey long_term, crypto::RandomSource& rng, TimeSource clock,
                       Options opts)
    : profile_(profile(opts.version)),
      long_term_(std::move(long_term)),
      delegated_(crypto::Ed25519PrivateKey::generate(rng)),
      clock_(std::move(clock)),
      opts_(std::move(opts)) {
  const Timestamp now = clock_();
  const SignedDuration month = SignedDuration::from_seconds(30 * 86400);
  const Timestamp mint = opts_.mint.value_or(ts_add(now, -month));
  const Timestamp maxt = opts_.maxt.value_or(ts_add(now, month));

  Message dele;
  dele[kTagPubk] = Bytes(delegated_.public_key().begin(), delegated_.public_key().end());
  dele[kTagMint] = le_bytes(encode_time(profile_, mint), 8);
  dele[kTagMaxt] = le_bytes(encode_time(profile_, maxt), 8);
  const Bytes dele_bytes = encode_message(dele);
  const auto sig = long_term_.sign(signed_body(kDelegationContext, dele_bytes));

  Message cert;
  cert[kTagDele] = dele_bytes;
  cert[kTagSig] = Bytes(sig.begin(), sig.end());
  cert_ = encode_message(cert);
}

ServerKey MockServer::key(std::string address) const {
  ServerKey k;
  k.public_key = long_term_.public_key();
  k.address = std::move(address);
  k.version = profile_.name;
  return k;
}

std::vector<Bytes> MockServer::respond_batch(const std::vector<Bytes>& nonces) {
  if (nonces.empty()) return {};
  std::vector<std::vector<Bytes>> levels(1);
  for (const Bytes& n : nonces) levels[0].push_back(merkle_leaf(profile_, n));
  size_t width = 1;
  while (width < levels[0].size()) width <<= 1;
  while (levels[0].size() < width) levels[0].push_back(levels[0].back());
  while (levels.back().size() > 1) {
    const auto& below = levels.back();
    std::vector<Bytes> up;
    for (size_t i = 0; i < below.size(); i += 2) up.push_back(merkle_node(profile_, below[i], below[i + 1]));
    levels.push_back(std::move(up));
  }

  Message srep;
  srep[kTagRoot] = levels.back()[0];
  srep[kTagMidp] = le_bytes(encode_time(profile_, ts_add(clock_(), behavior_.midpoint_bias)), 8);
  srep[kTagRadi] = le_bytes(encode_radius(profile_, opts_.radius), 4);
  const Bytes srep_bytes = encode_message(srep);
  const auto sig = delegated_.sign(signed_body(kResponseContext, srep_bytes));

  std::vector<Bytes> out;
  for (size_t i = 0; i < nonces.size(); ++i) {
    Bytes path;
    size_t idx = i;
    for (size_t level = 0; level + 1 < levels.size(); ++level) {
      const Bytes& sibling = levels[level][idx ^ 1];
      path.insert(path.end(), sibling.begin(), sibling.end());
      idx >>= 1;
    }
    Message top;
    top[kTagSig] = Bytes(sig.begin(), sig.end());
    top[kTagSrep] = srep_bytes;
    top[kTagCert] = cert_;
    top[kTagIndx] = le_bytes(i, 4);
    top[kTagPath] = path;
    if (profile_.version) top[kTagVer] = le_bytes(*profile_.version, 4);
    out.push_back(frame_packet(profile_, encode_message(top)));
  }
  return out;
}

std::optional<Bytes> MockServer::handle(ByteView request) {
  std::lock_guard lock(mu_);
  ++requests_;
  if (behavior_.drop_all) return std::nullopt;
  if (behavior_.drop_next > 0) {
    --behavior_.drop_next;
    return std::nullopt;
  }
  if (request.size() < profile_.min_request_size) return std::nullopt;
  Bytes nonce;
  try {
    nonce = decode_request_nonce(profile_, request);
  } catch (const RoughtimeError&) {
    return std::nullopt;
  }
  Bytes resp = respond_batch({nonce})[0];
  if (behavior_.replay_previous && previous_) {
    std::swap(resp, *previous_);
    return resp;
  }
  previous_ = resp;
  return resp;
}

}  // namespace gtv::roughtime
