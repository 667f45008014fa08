#include "gtv/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace gtv::detector {

namespace {

void check_age(MonotonicInstant rx, MonotonicInstant now, double max_age_s, const char* what) {
  const double age = mono_elapsed_s(rx, now);
  if (age > max_age_s) {
    throw StalenessError(std::string(what) + " measurement is " + std::to_string(age) + " s old (max " +
                         std::to_string(max_age_s) + " s)");
  }
}

}  // namespace

const char* to_string(Hypothesis h) { return h == Hypothesis::H0 ? "H0" : "H1"; }

const char* to_string(TestKind t) {
  switch (t) {
    case TestKind::Rt: return "rt";
    case TestKind::Nts: return "nts";
    case TestKind::Ll: return "ll";
  }
  return "?";
}

const char* to_string(WindowMode m) { return m == WindowMode::Literal ? "literal" : "gaussian"; }
const char* to_string(Polarity p) { return p == Polarity::AsPrinted ? "as-printed" : "neg-ll"; }

WindowMode window_mode_from_string(const std::string& s) {
  if (s == "literal") return WindowMode::Literal;
  if (s == "gaussian") return WindowMode::Gaussian;
  throw ConfigError("unknown window mode '" + s + "' (literal|gaussian)");
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "as-printed") return Polarity::AsPrinted;
  if (s == "neg-ll") return Polarity::NegLl;
  throw ConfigError("unknown polarity '" + s + "' (as-printed|neg-ll)");
}

std::string to_jsonl(const Verdict& v) {
  nlohmann::ordered_json j;
  j["t_mono_ns"] = v.t_mono.nanos;
  j["test"] = to_string(v.test);
  j["statistic"] = v.statistic;
  j["threshold"] = v.threshold;
  j["hypothesis"] = to_string(v.hypothesis);
  j["source_id"] = v.source_id;
  return j.dump();
}

Hypothesis radius_test(Timestamp t_gnss, Timestamp midpoint, SignedDuration radius) {
  return ts_diff(t_gnss, midpoint).abs() < radius ? Hypothesis::H0 : Hypothesis::H1;
}

Verdict roughtime_test(Timestamp t_gnss, MonotonicInstant now, const roughtime::Measurement& meas,
                       const RtConfig& cfg) {
  check_age(meas.t_mono_rx(), now, cfg.max_age_s, "Roughtime");
  const SignedDuration radius = std::min(meas.radius(), cfg.radius_max);
  Verdict v;
  v.test = TestKind::Rt;
  v.hypothesis = radius_test(t_gnss, meas.midpoint(), radius);
  v.statistic = ts_diff(t_gnss, meas.midpoint()).abs().to_seconds();
  v.threshold = radius.to_seconds();
  v.source_id = meas.server_id();
  v.t_mono = meas.t_mono_rx();
  return v;
}

Hypothesis threshold_test(Timestamp t_gnss, Timestamp t_reference, SignedDuration lambda) {
  return ts_diff(t_gnss, t_reference).abs() < lambda ? Hypothesis::H0 : Hypothesis::H1;
}

SignedDuration lambda_from_sigma(SignedDuration sigma, double k) {
  return SignedDuration::from_seconds_f(k * sigma.to_seconds());
}

Verdict nts_test(Timestamp t_gnss, MonotonicInstant now, const nts::NtsMeasurement& meas, const NtsConfig& cfg) {
  if (!cfg.lambda || *cfg.lambda <= SignedDuration()) {
    throw ConfigError("NTS threshold not calibrated; run calibrate or set nts_lambda_s");
  }
  check_age(meas.t_mono_rx(), now, cfg.max_age_s, "NTS");
  const Timestamp t_nts = ts_add(meas.t_local_rx(), meas.offset());
  Verdict v;
  v.test = TestKind::Nts;
  v.hypothesis = threshold_test(t_gnss, t_nts, *cfg.lambda);
  v.statistic = ts_diff(t_gnss, t_nts).abs().to_seconds();
  v.threshold = cfg.lambda->to_seconds();
  v.source_id = meas.server_id();
  v.t_mono = meas.t_mono_rx();
  return v;
}

std::optional<double> window_log_stat(std::span<const double> window, size_t m, double mu0, double sigma2_floor,
                                      WindowMode mode) {
  if (m < 2) throw ConfigError("window length m must be >= 2");
  if (window.size() < m) return std::nullopt;
  const auto w = window.last(m);
  double mean = 0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(m);
  double ss = 0;
  for (double x : w) ss += (x - mean) * (x - mean);
  const double var = std::max(ss / static_cast<double>(m - 1), sigma2_floor);
  const double norm = -0.5 * std::log(2 * std::numbers::pi * var);
  if (mode == WindowMode::Literal) return norm - mean / var;
  return norm - (mean - mu0) * (mean - mu0) / (2 * var);
}

std::optional<double> window_stat(std::span<const double> window, size_t m, double mu0, double sigma2_floor,
                                  WindowMode mode) {
  const auto l = window_log_stat(window, m, mu0, sigma2_floor, mode);
  if (!l) return std::nullopt;
  return std::exp(*l);
}

double smooth_ll_update_log(double z_prev, double ln_p, double alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw DomainError("alpha must lie in [0, 1]");
  if (std::isnan(ln_p)) throw DomainError("log density is NaN");
  return alpha * z_prev + (1 - alpha) * ln_p;
}

double smooth_ll_update(double z_prev, double p, double alpha) {
  if (!(p > 0)) throw DomainError("density must be positive");
  return smooth_ll_update_log(z_prev, std::log(p), alpha);
}

double ll_statistic(double z, Polarity polarity) { return polarity == Polarity::NegLl ? -z : z; }

Verdict ll_test(double z, double lambda, Polarity polarity) {
  Verdict v;
  v.test = TestKind::Ll;
  v.statistic = ll_statistic(z, polarity);
  v.threshold = lambda;
  v.hypothesis = v.statistic >= lambda ? Hypothesis::H1 : Hypothesis::H0;
  return v;
}

void LlConfig::validate() const {
  if (m < 2) throw ConfigError("ll window length m must be >= 2");
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("ll alpha must lie in [0, 1]");
  if (!(sigma2_floor > 0)) throw ConfigError("ll sigma2_floor must be > 0");
  if (lambda && !std::isfinite(*lambda)) throw ConfigError("ll lambda must be finite");
}

LlDetector::LlDetector(LlConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::optional<double> LlDetector::push(double sample) {
  if (!std::isfinite(sample)) throw InputError("ll sample is not finite");
  state_.window.push_back(sample);
  while (state_.window.size() > cfg_.m) state_.window.pop_front();
  const std::vector<double> w(state_.window.begin(), state_.window.end());
  const auto ln_p = window_log_stat(w, cfg_.m, cfg_.mu0, cfg_.sigma2_floor, cfg_.mode);
  if (!ln_p) return std::nullopt;
  state_.z = state_.z ? smooth_ll_update_log(*state_.z, *ln_p, cfg_.alpha) : *ln_p;
  return state_.z;
}

std::optional<Verdict> LlDetector::observe(double sample, MonotonicInstant t, const std::string& source_id) {
  if (!cfg_.lambda) throw ConfigError("ll threshold not calibrated");
  const auto z = push(sample);
  if (!z) return std::nullopt;
  Verdict v = ll_test(*z, *cfg_.lambda, cfg_.polarity);
  v.t_mono = t;
  v.source_id = source_id;
  return v;
}

void LlDetector::reset() { state_ = {}; }

double calibrate_threshold(std::vector<double> statistics, double target_rate) {
  if (statistics.empty()) throw CalibrationError("no calibration statistics");
  if (!(target_rate >= 0 && target_rate < 1)) throw CalibrationError("target rate must lie in [0, 1)");
  std::sort(statistics.begin(), statistics.end(), std::greater<>());
  const auto allowed = static_cast<size_t>(std::floor(target_rate * static_cast<double>(statistics.size())));
  // Everything strictly above statistics[allowed] may alarm; statistics[allowed] must not.
  return std::nextafter(statistics[allowed], std::numeric_limits<double>::infinity());
}

double false_alarm_rate(const std::vector<double>& statistics, double lambda) {
  if (statistics.empty()) return 0;
  const auto n = std::count_if(statistics.begin(), statistics.end(), [&](double s) { return s >= lambda; });
  return static_cast<double>(n) / static_cast<double>(statistics.size());
}

void EpochHistory::push(const EpochRecord& rec) {
  if (!rec.fix_valid) return;
  points_.emplace_back(rec.t_mono, rec.t_gnss);
  while (points_.size() > capacity_) points_.pop_front();
}

std::optional<EpochHistory::Paired> EpochHistory::gnss_at(MonotonicInstant t, double drift, double max_gap_s) const {
  const std::pair<MonotonicInstant, Timestamp>* best = nullptr;
  double best_gap = 0;
  for (const auto& p : points_) {
    const double gap = mono_elapsed_s(p.first, t);
    if (best == nullptr || std::abs(gap) < std::abs(best_gap)) {
      best = &p;
      best_gap = gap;
    }
  }
  if (best == nullptr || std::abs(best_gap) > max_gap_s) return std::nullopt;
  // Elapsed GNSS time is elapsed local time scaled by (1 + drift).
  const SignedDuration elapsed = SignedDuration::from_nanos(static_cast<int64_t>(t.nanos - best->first.nanos));
  const SignedDuration correction = SignedDuration::from_seconds_f(best_gap * drift);
  return Paired{ts_add(best->second, elapsed + correction), t, best_gap};
}

}  // namespace gtv::detector
