#pragma once

// Seeded scenario generator: benign receiver epochs with jitter, oscillator
// noise, per-epoch remote-provider scripts, and additive attack profiles.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "gtv/ensemble.hpp"
#include "gtv/error.hpp"
#include "gtv/receiver_feed.hpp"
#include "gtv/timebase.hpp"

namespace gtv::sim {

class ScenarioError : public Error {
 public:
  explicit ScenarioError(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

struct NoAttack {};
struct StepAttack {
  SignedDuration offset;
  uint64_t onset = 0;
};
struct IncrementalAttack {
  SignedDuration delta;
  uint64_t every_k = 30;
  uint64_t onset = 0;
};
enum class RampProfile { RaisedCosine, Linear };
struct SmoothPull {
  SignedDuration total;
  uint64_t span = 600;  // epochs
  uint64_t onset = 0;
  RampProfile profile = RampProfile::RaisedCosine;
};
struct MeaconDelay {
  SignedDuration d;
  uint64_t onset = 0;
};
using Attack = std::variant<NoAttack, StepAttack, IncrementalAttack, SmoothPull, MeaconDelay>;

struct AlwaysOn {};
/// Providers unreachable for epochs t1..t2 inclusive.
struct NetworkDown {
  uint64_t t1 = 0;
  uint64_t t2 = 0;
};
/// The NTS provider reports time shifted by `bias` from `onset` on.
struct ProviderCompromise {
  SignedDuration bias;
  uint64_t onset = 0;
};
using Network = std::variant<AlwaysOn, NetworkDown, ProviderCompromise>;

const char* attack_name(const Attack& a);
const char* network_name(const Network& n);
const char* to_string(RampProfile p);
RampProfile ramp_profile_from_string(const std::string& s);

struct ScenarioSpec {
  std::string id = "scenario";
  uint64_t duration_epochs = 1000;
  double epoch_period_s = 1.0;
  double benign_jitter_sigma = 10e-9;
  Attack attack = NoAttack{};
  Network network = AlwaysOn{};
  uint64_t seed = 1;

  Timestamp start = Timestamp{1689120000, 0};  // 2023-07-12T00:00:00Z
  uint64_t mono_start_ns = 1'000'000'000;
  std::vector<ensemble::OscillatorSpec> oscillators{ensemble::OscillatorSpec{}};

  // Remote providers.
  double delay_min_s = 1e-3;  // round-trip path delay, uniform
  double delay_max_s = 20e-3;
  double nts_offset_sigma_s = 0;         // path asymmetry noise during the run
  double nts_calibration_sigma_s = 50e-6;  // path asymmetry noise of the calibration history
  double rt_radius_s = 1.0;
  // Poll cadences in epochs; unset means the run configuration decides.
  std::optional<uint64_t> rt_poll_every;
  std::optional<uint64_t> nts_poll_every;

  /// Throws ScenarioError naming every invalid field.
  void validate() const;
  std::optional<uint64_t> onset() const;
};

/// Injected offset at epoch n.
SignedDuration attack_offset(const Attack& attack, uint64_t n);
/// Raised-cosine (or linear) ramp, 0 at u <= 0 and 1 at u >= 1.
double ramp(RampProfile p, double u);

struct ProviderScript {
  bool reachable = true;
  SignedDuration nts_bias;
  double rt_delay_s = 0;  // round trip
  double nts_delay_s = 0;
  double nts_asymmetry_s = 0;  // forward minus return leg, halved
};

struct SimOutputs {
  std::string scenario_id;
  uint64_t seed = 0;
  std::string prng = "";
  std::vector<EpochRecord> epochs;
  std::vector<Timestamp> true_time;
  std::vector<SignedDuration> ground_truth;
  std::vector<std::vector<double>> oscillator_bias;  // [oscillator][epoch], local minus true, s
  std::vector<ProviderScript> providers;

  /// Local reading of oscillator i at epoch n.
  Timestamp local_time(size_t oscillator, uint64_t n) const;
};

SimOutputs gen_scenario(const ScenarioSpec& spec);

/// Phase samples b(k * period), k = 0..n-1, of the two-state model started at
/// (b0, d0). The noise is drawn from the same Q(tau) the filter predicts with.
std::vector<double> simulate_oscillator(const ensemble::OscillatorSpec& spec, uint64_t n, double period_s,
                                        uint64_t seed, double b0 = 0, double d0 = 0);

/// "epoch,injected_offset_ns" preceded by a "# prng=... seed=..." line.
struct OscillatorTruth {
  std::vector<double> bias;   // s
  std::vector<double> drift;  // s/s
};
/// Same draws as simulate_oscillator, keeping the drift state as well.
OscillatorTruth simulate_oscillator_states(const ensemble::OscillatorSpec& spec, uint64_t n, double period_s,
                                           uint64_t seed, double b0 = 0, double d0 = 0);

void write_ground_truth_csv(std::ostream& out, const SimOutputs& sim);
void write_epochs_jsonl(std::ostream& out, const SimOutputs& sim);

}  // namespace gtv::sim
