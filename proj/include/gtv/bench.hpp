#pragma once

// Per-operation latency of the cryptographic primitives the providers use:
// Ed25519 sign/verify and AEAD_AES_SIV_CMAC_256 seal/open.

#include <cstdint>
#include <string>
#include <vector>

namespace gtv::bench {

struct BenchRow {
  std::string operation;  // sign | verify | aead-encrypt | aead-decrypt
  size_t payload = 0;     // bytes
  uint64_t iterations = 0;
  double mean_latency_s = 0;
  double ops_per_s = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow* find(const std::string& operation, size_t payload) const;
  std::string table() const;
  std::string csv() const;
  std::string jsonl() const;
};

/// iterations == 0 is a usage error (InputError).
BenchReport bench_crypto(uint64_t iterations, const std::vector<size_t>& payloads = {1024, 8192});

}  // namespace gtv::bench
