#pragma once

// End-to-end monitoring: epochs feed the ensemble filter and log-likelihood
// detector, provider measurements feed the Roughtime and NTS tests, and every
// verdict drives the orchestrator. The same Monitor serves simulated and live
// runs; only the drivers differ.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gtv/attack_sim.hpp"
#include "gtv/config.hpp"
#include "gtv/detector.hpp"
#include "gtv/ensemble.hpp"
#include "gtv/orchestrator.hpp"

namespace gtv::pipeline {

/// Bias filter over the oscillator ensemble plus the residual LL detector.
class EnsembleTracker {
 public:
  explicit EnsembleTracker(const config::RunConfig& cfg);

  struct Step {
    double residual = 0;  // measurement minus predicted bias
    bool accepted = false;
    std::optional<double> z;  // smoothed log-likelihood once the window is full
    ensemble::TraceRow row;
  };

  /// Records the epoch's raw readings (GNSS minus local, per oscillator) and,
  /// once aligned, runs predict/update. nullopt before alignment or without a fix.
  std::optional<Step> on_epoch(uint64_t epoch, const EpochRecord& rec, const std::vector<Timestamp>& local);
  /// Restarts the filter at zero offset against the most recent readings.
  void align();
  void reset();

  bool aligned() const { return state_.has_value(); }
  double drift() const { return state_ ? state_->x(1) : 0.0; }
  const std::optional<ensemble::ClockKfState>& state() const { return state_; }
  detector::LlDetector& ll() { return ll_; }

 private:
  const config::RunConfig& cfg_;
  ensemble::OscillatorSpec model_;
  std::optional<ensemble::ClockKfState> state_;
  std::vector<double> last_raw_;
  std::optional<MonotonicInstant> last_raw_mono_;
  std::vector<double> offsets_;
  detector::LlDetector ll_;
};

struct DetectorOutcome {
  bool detected = false;
  std::optional<uint64_t> latency_epochs;  // only when detected
  std::optional<uint64_t> first_h1_epoch;
  uint64_t verdicts = 0;
  uint64_t h1 = 0;
  uint64_t false_alarms = 0;  // H1 before onset, or any H1 without an attack
};

struct Sinks {
  std::ostream* verdicts = nullptr;
  bool verdicts_csv = false;
  std::ostream* transitions = nullptr;
  std::ostream* events = nullptr;
  std::ostream* trace = nullptr;
  std::ostream* log = nullptr;
};

class Monitor {
 public:
  Monitor(const config::RunConfig& cfg, Sinks sinks, std::optional<uint64_t> onset_epoch = std::nullopt);

  void set_nts_lambda(SignedDuration lambda) { nts_cfg_.lambda = lambda; }
  void set_ll_lambda(double lambda) { tracker_.ll().set_lambda(lambda); }
  void set_cadence(uint64_t rt_every, uint64_t nts_every) {
    rt_every_ = rt_every;
    nts_every_ = nts_every;
  }

  void on_epoch(const EpochRecord& rec, const std::vector<Timestamp>& local);
  void on_rt(const roughtime::Measurement& m, MonotonicInstant now);
  void on_nts(const nts::NtsMeasurement& m, MonotonicInstant now);
  /// A provider answered; brings connectivity back if it was down.
  void on_reachable(MonotonicInstant t);
  void on_unreachable(MonotonicInstant t, const std::string& provider);
  /// Verification or protocol failure: logged, never fatal.
  void on_provider_error(MonotonicInstant t, const std::string& provider, const std::string& what);
  void on_feed_lost(MonotonicInstant t);
  void on_clear(MonotonicInstant t);
  void tick(MonotonicInstant t);

  struct Polls {
    bool rt = false;
    bool nts = false;
    bool any() const { return rt || nts; }
  };
  /// Polls to run now: orchestrator requests plus the periodic cadence
  /// (counted once per epoch). Consumes the requests.
  Polls due();

  const orchestrator::State& state() const { return state_; }
  const DetectorOutcome& outcome(detector::TestKind t) const;
  uint64_t epochs() const { return epochs_; }
  uint64_t provider_errors() const { return provider_errors_; }
  const std::vector<double>& ll_statistics() const { return ll_stats_; }
  const EnsembleTracker& tracker() const { return tracker_; }
  MonotonicInstant last_event() const { return last_t_; }

 private:
  void dispatch(const orchestrator::Event& e);
  void record(const detector::Verdict& v);
  void log(MonotonicInstant t, const std::string& what);
  MonotonicInstant clamp(MonotonicInstant t);

  const config::RunConfig& cfg_;
  Sinks sinks_;
  std::optional<uint64_t> onset_;
  orchestrator::State state_;
  EnsembleTracker tracker_;
  detector::EpochHistory history_;
  detector::RtConfig rt_cfg_;
  detector::NtsConfig nts_cfg_;
  DetectorOutcome rt_, nts_, ll_;
  std::vector<double> ll_stats_;
  uint64_t epochs_ = 0;
  uint64_t epoch_ = 0;  // index of the epoch being processed
  uint64_t rt_every_ = 0;
  uint64_t nts_every_ = 0;
  std::optional<uint64_t> periodic_done_for_;
  std::optional<uint64_t> fast_until_;
  bool want_rt_ = false;
  bool want_nts_ = false;
  bool rt_failed_ = false;  // Roughtime unreachable since the last cold start
  uint64_t provider_errors_ = 0;
  MonotonicInstant last_t_;
};

struct RunReport {
  std::string scenario_id;
  uint64_t seed = 0;
  std::string prng;
  std::string config_hash;
  uint64_t epochs = 0;
  std::optional<uint64_t> onset;
  DetectorOutcome rt, nts, ll;
  uint64_t false_alarms = 0;
  std::string final_phase;
  std::string active_source;
  uint64_t provider_errors = 0;
  std::optional<double> nts_lambda_s;
  std::optional<double> ll_lambda;

  bool any_h1() const { return rt.h1 + nts.h1 + ll.h1 > 0; }
  /// 0 clean, 2 when any detector reported H1.
  int exit_code() const { return any_h1() ? 2 : 0; }
  std::string to_json() const;
  std::string summary() const;
};

struct LlCalibration {
  double lambda = 0;
  double mu0 = 0;
  double sigma0_sq = 0;  // variance of the benign residuals
  size_t statistics = 0;
  double rate_on_calibration = 0;
};

/// Benign run (no attack, providers up) of the scenario's oscillators and
/// jitter for cfg.ll_calibration_epochs at cfg.ll_calibration_seed; lambda is
/// the smallest threshold meeting cfg.ll_target_fa on its statistics.
LlCalibration calibrate_ll(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg);
/// LL statistics of a benign run, for checking a threshold out of sample.
std::vector<double> benign_ll_statistics(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg,
                                         uint64_t epochs, uint64_t seed);

struct NtsCalibration {
  SignedDuration sigma;
  SignedDuration lambda;
  size_t samples = 0;
};

/// Queries the simulated NTS provider cfg.nts_calibration_samples times with
/// the scenario's calibration asymmetry noise; lambda = nts_auto_k * sigma.
NtsCalibration calibrate_nts(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg);

struct SimOptions {
  std::optional<std::string> out_dir;
  bool verdicts_csv = false;
  /// Optional in-memory sinks (used when out_dir is unset).
  Sinks sinks;
};

RunReport run_simulation(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg,
                         const SimOptions& opts = {});

}  // namespace gtv::pipeline
