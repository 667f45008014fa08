#pragma once

// Counter-based generator for simulations. Output k of stream s is a pure
// function of (seed, s, k), so any implementation of the same algorithm
// reproduces a run bit for bit.
//
// Algorithm "splitmix64-ctr-v1":
//   key(seed, s)   = mix(seed ^ mix(s + 0x9e3779b97f4a7c15))
//   u64(k)         = mix(key + (k + 1) * 0x9e3779b97f4a7c15)
//   uniform        = (u64 >> 11) * 2^-53                      in [0, 1)
//   gaussian       = Box-Muller on two fresh uniforms u1, u2:
//                    sqrt(-2 ln(1 - u1)) * cos(2 pi u2)   (one output per pair)
// where mix is the SplitMix64 finaliser.

#include <cstdint>
#include <span>

#include "gtv/crypto.hpp"

namespace gtv::sim {

inline constexpr const char* kPrngAlgorithm = "splitmix64-ctr-v1";

uint64_t splitmix64_mix(uint64_t z);

class CounterRng {
 public:
  explicit CounterRng(uint64_t seed, uint64_t stream = 0);

  uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double gaussian();
  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  uint64_t counter() const { return counter_; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

/// Deterministic byte source for keys and nonces inside simulations.
class SeededRandom final : public crypto::RandomSource {
 public:
  explicit SeededRandom(uint64_t seed, uint64_t stream = 0) : rng_(seed, stream) {}
  void fill(std::span<uint8_t> out) override;

 private:
  CounterRng rng_;
};

}  // namespace gtv::sim
