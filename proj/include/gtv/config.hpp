#pragma once

// Run configuration and scenario files. Both are flat INI: sections of
// key = value lines. Every key has a default; `gtv config dump` prints them.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gtv/attack_sim.hpp"
#include "gtv/detector.hpp"
#include "gtv/ensemble.hpp"
#include "gtv/orchestrator.hpp"

namespace gtv::config {

/// Exact decimal duration with an optional unit suffix: "4", "4s", "150us",
/// "2.5ms", "-10ns". A bare number is seconds.
SignedDuration parse_duration(const std::string& text);

/// Same syntax for parameters held as double seconds; accepts exponents ("1e-8s").
double parse_seconds(const std::string& text);

struct RunConfig {
  // [ensemble] and [oscillator.<label>]
  std::vector<ensemble::OscillatorSpec> oscillators{ensemble::OscillatorSpec{}};
  double gate_k = 3.0;
  double init_sigma_bias_s = 1e-6;
  double init_sigma_drift = 1e-9;

  // [detector]
  double rt_radius_max_s = 10.0;
  double max_age_s = 2.0;
  double pairing_max_gap_s = 2.0;
  std::optional<double> nts_lambda_s;
  double nts_auto_k = 3.0;
  size_t nts_min_samples = 30;
  size_t nts_calibration_samples = 200;

  // [ll]
  detector::LlConfig ll;
  double ll_target_fa = 1e-3;
  uint64_t ll_calibration_epochs = 10000;
  uint64_t ll_calibration_seed = 7;

  // [orchestrator]
  orchestrator::Config orchestrator;

  // [roughtime]
  std::string rt_server;  // host:port
  std::string rt_public_key;  // base64
  std::string rt_version = "ietf-07";
  int rt_attempts = 3;
  int rt_timeout_ms = 1000;
  uint64_t rt_poll_every = 0;  // epochs; 0 = cold start and on demand only

  // [nts]
  std::string nts_server;  // host:port of the NTS-KE server
  std::string nts_ca_file;
  int nts_era = 0;
  size_t nts_target_cookies = 8;
  int nts_timeout_ms = 1000;
  uint64_t nts_poll_every = 60;
  uint64_t nts_fast_poll_every = 10;  // after any H1 ...
  uint64_t nts_fast_poll_window = 600;  // ... for this many epochs

  void validate() const;
  /// Provider addresses from GTV_ROUGHTIME_SERVER, GTV_ROUGHTIME_KEY, GTV_NTS_SERVER, GTV_NTS_CA_FILE.
  void apply_env();
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& ini_text);
/// Every key with its effective value, in a form parse_config accepts.
void dump_config(std::ostream& out, const RunConfig& cfg);
/// Hex digest binding a report to the exact configuration and scenario.
std::string config_hash(const RunConfig& cfg, const sim::ScenarioSpec* scenario = nullptr);

sim::ScenarioSpec load_scenario(const std::string& path);
sim::ScenarioSpec parse_scenario(const std::string& ini_text);
void dump_scenario(std::ostream& out, const sim::ScenarioSpec& spec);

/// Scenarios shipped with the tool: step4s, incr2us, pull2us, benign10k, holdover, compromise.
std::optional<sim::ScenarioSpec> builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();
/// A builtin name or a path to a scenario file.
sim::ScenarioSpec resolve_scenario(const std::string& name_or_path);

}  // namespace gtv::config
