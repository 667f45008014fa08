#include "gtv/bench.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "gtv/crypto.hpp"
#include "gtv/error.hpp"
#include "json.hpp"

namespace gtv::bench {

namespace {

// Keeps the optimiser from discarding a result.
volatile uint8_t g_sink = 0;

template <typename F>
BenchRow measure(const std::string& op, size_t payload, uint64_t iterations, F&& f) {
  f();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (uint64_t i = 0; i < iterations; ++i) f();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  BenchRow r;
  r.operation = op;
  r.payload = payload;
  r.iterations = iterations;
  r.mean_latency_s = total / static_cast<double>(iterations);
  r.ops_per_s = total > 0 ? static_cast<double>(iterations) / total : 0;
  return r;
}

}  // namespace

BenchReport bench_crypto(uint64_t iterations, const std::vector<size_t>& payloads) {
  if (iterations == 0) throw InputError("iterations must be >= 1");
  auto& rng = crypto::system_random();
  const auto key = crypto::Ed25519PrivateKey::generate(rng);
  const crypto::AesSivCmac256 aead(rng.bytes(crypto::AesSivCmac256::kKeySize));
  const Bytes nonce = rng.bytes(16);
  const Bytes ad = rng.bytes(48);

  BenchReport report;
  for (const size_t n : payloads) {
    const Bytes msg = rng.bytes(n);
    const auto sig = key.sign(msg);
    const Bytes sealed = aead.seal(nonce, ad, msg);

    report.rows.push_back(measure("sign", n, iterations, [&] { g_sink = g_sink ^ key.sign(msg)[0]; }));
    report.rows.push_back(measure("verify", n, iterations, [&] {
      g_sink = g_sink ^ static_cast<uint8_t>(crypto::ed25519_verify(key.public_key(), msg, sig));
    }));
    report.rows.push_back(
        measure("aead-encrypt", n, iterations, [&] { g_sink = g_sink ^ aead.seal(nonce, ad, msg)[0]; }));
    report.rows.push_back(measure("aead-decrypt", n, iterations, [&] {
      const auto pt = aead.open(nonce, ad, sealed);
      if (!pt) throw CryptoError("benchmark open failed");
      g_sink = g_sink ^ (*pt)[0];
    }));
  }
  return report;
}

const BenchRow* BenchReport::find(const std::string& operation, size_t payload) const {
  for (const auto& r : rows) {
    if (r.operation == operation && r.payload == payload) return &r;
  }
  return nullptr;
}

std::string BenchReport::table() const {
  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %10s %16s %14s\n", "operation", "payload", "iterations",
                "mean latency ms", "ops/s");
  s << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %8zu %10llu %16.6g %14.6g\n", r.operation.c_str(), r.payload,
                  static_cast<unsigned long long>(r.iterations), r.mean_latency_s * 1e3, r.ops_per_s);
    s << line;
  }
  return s.str();
}

std::string BenchReport::csv() const {
  std::ostringstream s;
  s.precision(9);
  s << "operation,payload_bytes,iterations,mean_latency_s,ops_per_s\n";
  for (const auto& r : rows) {
    s << r.operation << ',' << r.payload << ',' << r.iterations << ',' << r.mean_latency_s << ',' << r.ops_per_s
      << '\n';
  }
  return s.str();
}

std::string BenchReport::jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["operation"] = r.operation;
    j["payload_bytes"] = r.payload;
    j["iterations"] = r.iterations;
    j["mean_latency_s"] = r.mean_latency_s;
    j["ops_per_s"] = r.ops_per_s;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace gtv::bench
