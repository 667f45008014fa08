#pragma once

// Hypothesis tests on the GNSS time solution: the Roughtime radius test, the
// NTS threshold test, and the windowed smoothed log-likelihood test on the
// ensemble filter residuals.

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gtv/nts.hpp"
#include "gtv/receiver_feed.hpp"
#include "gtv/roughtime.hpp"
#include "gtv/timebase.hpp"

namespace gtv::detector {

enum class Hypothesis { H0, H1 };
enum class TestKind { Rt, Nts, Ll };

const char* to_string(Hypothesis h);
const char* to_string(TestKind t);

struct Verdict {
  TestKind test = TestKind::Rt;
  Hypothesis hypothesis = Hypothesis::H0;
  double statistic = 0;
  double threshold = 0;
  std::string source_id;
  MonotonicInstant t_mono;

  bool operator==(const Verdict&) const = default;
};

/// {"t_mono_ns":..,"test":"rt|nts|ll","statistic":..,"threshold":..,"hypothesis":"H0|H1","source_id":..}
std::string to_jsonl(const Verdict& v);

// ---- Roughtime and NTS tests ---------------------------------------------------

struct RtConfig {
  /// Upper bound on the radius used in the test; a larger declared radius is clamped.
  SignedDuration radius_max = SignedDuration::from_seconds(10);
  double max_age_s = 2.0;
};

/// H0 iff |t_gnss - midpoint| < min(radius, radius_max), with t_gnss the GNSS
/// time paired to the measurement's receipt instant. A measurement received
/// more than max_age_s before `now` is stale (StalenessError, no verdict).
Verdict roughtime_test(Timestamp t_gnss, MonotonicInstant now, const roughtime::Measurement& meas,
                       const RtConfig& cfg = {});

/// Pure form of the radius test, shared with the measurement overload.
Hypothesis radius_test(Timestamp t_gnss, Timestamp midpoint, SignedDuration radius);

struct NtsConfig {
  std::optional<SignedDuration> lambda;  // unset until calibrated
  double auto_k = 3.0;                   // lambda = auto_k * sigma when calibrated from history
  double max_age_s = 2.0;
};

/// H0 iff |t_gnss - (T4_local + theta)| < lambda. Unset lambda is a configuration error.
Verdict nts_test(Timestamp t_gnss, MonotonicInstant now, const nts::NtsMeasurement& meas,
                 const NtsConfig& cfg);

Hypothesis threshold_test(Timestamp t_gnss, Timestamp t_reference, SignedDuration lambda);

/// lambda = k * sigma.
SignedDuration lambda_from_sigma(SignedDuration sigma, double k = 3.0);

// ---- log-likelihood test --------------------------------------------------------

enum class WindowMode { Literal, Gaussian };
enum class Polarity { AsPrinted, NegLl };

const char* to_string(WindowMode m);
const char* to_string(Polarity p);
WindowMode window_mode_from_string(const std::string& s);
Polarity polarity_from_string(const std::string& s);

inline constexpr double kDefaultSigma2Floor = 1e-18;  // (1 ns)^2

/// ln p(x_m) for a full window of m samples; nullopt while warming up.
std::optional<double> window_log_stat(std::span<const double> window, size_t m, double mu0, double sigma2_floor,
                                      WindowMode mode);
/// p(x_m) = exp(window_log_stat).
std::optional<double> window_stat(std::span<const double> window, size_t m, double mu0, double sigma2_floor,
                                  WindowMode mode);

/// Z = alpha * Z_prev + (1 - alpha) * ln p. p <= 0 is a domain error.
double smooth_ll_update(double z_prev, double p, double alpha);
/// Same recursion taking ln p directly (no underflow for tiny densities).
double smooth_ll_update_log(double z_prev, double ln_p, double alpha);

/// as-printed: H0 iff Z < lambda. neg-ll: statistic -Z, H1 iff -Z >= lambda.
Verdict ll_test(double z, double lambda, Polarity polarity);

/// The value compared against lambda for the given polarity.
double ll_statistic(double z, Polarity polarity);

struct LlConfig {
  size_t m = 30;
  double alpha = 0.9;
  std::optional<double> lambda;
  WindowMode mode = WindowMode::Gaussian;
  Polarity polarity = Polarity::NegLl;
  double mu0 = 0;
  double sigma0_sq = 0;  // benign reference variance, recorded by calibration
  double sigma2_floor = kDefaultSigma2Floor;

  void validate() const;
};

struct LlDetectorState {
  std::deque<double> window;
  std::optional<double> z;
};

class LlDetector {
 public:
  explicit LlDetector(LlConfig cfg);

  /// Adds one sample; returns the smoothed Z once the window is full.
  std::optional<double> push(double sample);
  /// push + ll_test. No verdict while warming up; an unset lambda is a configuration error.
  std::optional<Verdict> observe(double sample, MonotonicInstant t, const std::string& source_id);

  void reset();
  const LlDetectorState& state() const { return state_; }
  const LlConfig& config() const { return cfg_; }
  void set_lambda(double lambda) { cfg_.lambda = lambda; }

 private:
  LlConfig cfg_;
  LlDetectorState state_;
};

/// Smallest threshold whose empirical false-alarm rate on `statistics`
/// (H1 iff statistic >= lambda) does not exceed `target_rate`.
double calibrate_threshold(std::vector<double> statistics, double target_rate = 1e-3);

/// Fraction of statistics at or above lambda.
double false_alarm_rate(const std::vector<double>& statistics, double lambda);

// ---- pairing -------------------------------------------------------------------

/// Recent fix-valid epochs, used to find the GNSS time at a measurement's
/// receipt instant.
class EpochHistory {
 public:
  explicit EpochHistory(size_t capacity = 64) : capacity_(capacity) {}

  /// Records only fix-valid epochs.
  void push(const EpochRecord& rec);
  void clear() { points_.clear(); }

  struct Paired {
    Timestamp t_gnss;
    MonotonicInstant t_mono;  // the instant t_gnss was extrapolated to
    double gap_s = 0;         // signed distance to the nearest epoch
  };

  /// GNSS time at `t`, extrapolated from the nearest epoch along the drift
  /// estimate; nullopt when no epoch lies within max_gap_s.
  std::optional<Paired> gnss_at(MonotonicInstant t, double drift, double max_gap_s = 2.0) const;

 private:
  size_t capacity_;
  std::deque<std::pair<MonotonicInstant, Timestamp>> points_;
};

}  // namespace gtv::detector
