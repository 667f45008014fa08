#include "gtv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "gtv/nts_server.hpp"
#include "gtv/rng.hpp"
#include "gtv/roughtime_server.hpp"
#include "gtv/transport.hpp"
#include "json.hpp"

namespace gtv::pipeline {

using detector::Hypothesis;
using detector::TestKind;
using orchestrator::ActionKind;
using orchestrator::Event;
using orchestrator::EventKind;
using orchestrator::Phase;

// ---- EnsembleTracker ---------------------------------------------------------------

EnsembleTracker::EnsembleTracker(const config::RunConfig& cfg)
    : cfg_(cfg), model_(ensemble::combined_spec(cfg.oscillators)), ll_(cfg.ll) {}

void EnsembleTracker::reset() {
  state_.reset();
  offsets_.clear();
  ll_.reset();
}

void EnsembleTracker::align() {
  if (last_raw_.empty() || !last_raw_mono_) throw InputError("no epoch to align the ensemble filter to");
  offsets_ = last_raw_;
  state_ = ensemble::make_state(model_.q_b, model_.q_d, 0, cfg_.init_sigma_bias_s * cfg_.init_sigma_bias_s, 0,
                                cfg_.init_sigma_drift * cfg_.init_sigma_drift);
  state_->last_update = *last_raw_mono_;
  ll_.reset();
}

std::optional<EnsembleTracker::Step> EnsembleTracker::on_epoch(uint64_t epoch, const EpochRecord& rec,
                                                               const std::vector<Timestamp>& local) {
  if (local.size() != cfg_.oscillators.size()) {
    throw InputError("expected " + std::to_string(cfg_.oscillators.size()) + " oscillator readings, got " +
                     std::to_string(local.size()));
  }
  if (state_ && rec.t_mono < state_->last_update) throw InputError("epoch precedes the last filter update");
  if (!rec.fix_valid) {
    if (state_) {
      const MonotonicInstant t = rec.t_mono;
      state_ = ensemble::kf_predict(*state_, mono_elapsed_s(state_->last_update, t));
      state_->last_update = t;
    }
    return std::nullopt;
  }
  last_raw_.resize(local.size());
  for (size_t i = 0; i < local.size(); ++i) last_raw_[i] = ts_diff(rec.t_gnss, local[i]).to_seconds();
  last_raw_mono_ = rec.t_mono;
  if (!state_) return std::nullopt;

  ensemble::ClockKfState pred = ensemble::kf_predict(*state_, mono_elapsed_s(state_->last_update, rec.t_mono));
  pred.last_update = rec.t_mono;
  std::vector<ensemble::Reading> readings;
  for (size_t i = 0; i < local.size(); ++i) {
    const double s = cfg_.oscillators[i].sigma_meas;
    readings.push_back({last_raw_[i] - offsets_[i], s * s});
  }
  const auto comb = ensemble::ensemble_combine(readings);
  const auto upd = ensemble::kf_update(pred, comb.bias, comb.variance, cfg_.gate_k);

  Step step;
  step.residual = comb.bias - pred.x(0);
  step.accepted = upd.accepted;
  state_ = upd.state;
  state_->last_update = rec.t_mono;
  step.z = ll_.push(step.residual);
  step.row = {epoch, pred.x(0), pred.x(1), state_->x(0), state_->x(1), state_->P(0, 0), state_->P(1, 1), upd.accepted};
  return step;
}

// ---- Monitor ---------------------------------------------------------------------

Monitor::Monitor(const config::RunConfig& cfg, Sinks sinks, std::optional<uint64_t> onset_epoch)
    : cfg_(cfg),
      sinks_(sinks),
      onset_(onset_epoch),
      tracker_(cfg),
      history_(256),
      rt_every_(cfg.rt_poll_every),
      nts_every_(cfg.nts_poll_every) {
  rt_cfg_.radius_max = SignedDuration::from_seconds_f(cfg.rt_radius_max_s);
  rt_cfg_.max_age_s = cfg.max_age_s;
  nts_cfg_.auto_k = cfg.nts_auto_k;
  nts_cfg_.max_age_s = cfg.max_age_s;
  if (cfg.nts_lambda_s) nts_cfg_.lambda = SignedDuration::from_seconds_f(*cfg.nts_lambda_s);
  if (sinks_.trace) ensemble::write_trace_header(*sinks_.trace);
  if (sinks_.verdicts && sinks_.verdicts_csv) {
    *sinks_.verdicts << "t_mono_ns,test,statistic,threshold,hypothesis,source_id\n";
  }
}

const DetectorOutcome& Monitor::outcome(TestKind t) const {
  switch (t) {
    case TestKind::Rt: return rt_;
    case TestKind::Nts: return nts_;
    case TestKind::Ll: return ll_;
  }
  return rt_;
}

MonotonicInstant Monitor::clamp(MonotonicInstant t) { return std::max(t, last_t_); }

void Monitor::log(MonotonicInstant t, const std::string& what) {
  if (sinks_.log) *sinks_.log << t.nanos << ' ' << what << '\n';
}

void Monitor::dispatch(const Event& in) {
  Event e = in;
  e.t_mono = clamp(e.t_mono);
  const orchestrator::State from = state_;
  const auto r = orchestrator::step(state_, e, cfg_.orchestrator);
  state_ = r.state;
  last_t_ = e.t_mono;
  if (sinks_.events) *sinks_.events << orchestrator::to_jsonl(e) << '\n';
  if (sinks_.transitions) *sinks_.transitions << orchestrator::transition_jsonl(e, from, r) << '\n';
  for (const auto& a : r.actions) {
    switch (a.kind) {
      case ActionKind::ScheduleRtPoll: want_rt_ = true; break;
      case ActionKind::ScheduleNtsPoll: want_nts_ = true; break;
      case ActionKind::ResetFilter: tracker_.align(); break;
      case ActionKind::ColdStartReset:
        tracker_.reset();
        rt_failed_ = false;
        log(e.t_mono, "cold-start reset");
        break;
      case ActionKind::RaiseAlert: log(e.t_mono, "alert raised, active source " + state_.active_source); break;
      case ActionKind::ClearAlert: log(e.t_mono, "alert cleared"); break;
      case ActionKind::EnterHoldover: log(e.t_mono, "holdover"); break;
    }
  }
}

void Monitor::record(const detector::Verdict& v) {
  if (sinks_.verdicts) {
    if (sinks_.verdicts_csv) {
      std::ostringstream s;
      s.precision(17);
      s << v.t_mono.nanos << ',' << detector::to_string(v.test) << ',' << v.statistic << ',' << v.threshold << ','
        << detector::to_string(v.hypothesis) << ',' << v.source_id;
      *sinks_.verdicts << s.str() << '\n';
    } else {
      *sinks_.verdicts << detector::to_jsonl(v) << '\n';
    }
  }
  DetectorOutcome& o = v.test == TestKind::Rt ? rt_ : v.test == TestKind::Nts ? nts_ : ll_;
  ++o.verdicts;
  if (v.hypothesis == Hypothesis::H1) {
    ++o.h1;
    if (!o.first_h1_epoch) o.first_h1_epoch = epoch_;
    if (onset_ && epoch_ >= *onset_) {
      if (!o.detected) {
        o.detected = true;
        o.latency_epochs = epoch_ - *onset_;
      }
    } else {
      ++o.false_alarms;
    }
    fast_until_ = epoch_ + cfg_.nts_fast_poll_window;
  }
  dispatch(Event::verdict(v));
}

void Monitor::on_epoch(const EpochRecord& rec, const std::vector<Timestamp>& local) {
  epoch_ = epochs_++;
  if (rec.fix_valid && !state_.fix) dispatch(Event{EventKind::FixAcquired, rec.t_mono, {}, {}});
  if (!rec.fix_valid && state_.fix) dispatch(Event{EventKind::FixLost, rec.t_mono, {}, {}});
  history_.push(rec);
  const auto step = tracker_.on_epoch(epoch_, rec, local);
  if (!step) return;
  if (sinks_.trace) ensemble::write_trace_row(*sinks_.trace, step->row);
  if (!step->z) return;
  ll_stats_.push_back(detector::ll_statistic(*step->z, cfg_.ll.polarity));
  const auto& lambda = tracker_.ll().config().lambda;
  if (!lambda) return;
  detector::Verdict v = detector::ll_test(*step->z, *lambda, cfg_.ll.polarity);
  v.t_mono = rec.t_mono;
  v.source_id = "ensemble";
  record(v);
}

void Monitor::on_rt(const roughtime::Measurement& m, MonotonicInstant now) {
  const auto paired = history_.gnss_at(m.t_mono_rx(), tracker_.drift(), cfg_.pairing_max_gap_s);
  if (!paired) {
    log(m.t_mono_rx(), "roughtime measurement has no GNSS epoch within the pairing gap");
    return;
  }
  try {
    record(detector::roughtime_test(paired->t_gnss, now, m, rt_cfg_));
  } catch (const StalenessError& e) {
    log(now, e.what());
  }
}

void Monitor::on_nts(const nts::NtsMeasurement& m, MonotonicInstant now) {
  const auto paired = history_.gnss_at(m.t_mono_rx(), tracker_.drift(), cfg_.pairing_max_gap_s);
  if (!paired) {
    log(m.t_mono_rx(), "nts measurement has no GNSS epoch within the pairing gap");
    return;
  }
  try {
    record(detector::nts_test(paired->t_gnss, now, m, nts_cfg_));
  } catch (const StalenessError& e) {
    log(now, e.what());
  }
}

void Monitor::on_reachable(MonotonicInstant t) {
  if (state_.connectivity == orchestrator::Connectivity::Offline) dispatch(Event{EventKind::NetworkUp, t, {}, {}});
}

void Monitor::on_unreachable(MonotonicInstant t, const std::string& provider) {
  log(t, provider + " unreachable");
  if (provider == "roughtime") rt_failed_ = true;
  if (state_.connectivity == orchestrator::Connectivity::Online) dispatch(Event{EventKind::NetworkDown, t, {}, {}});
}

void Monitor::on_provider_error(MonotonicInstant t, const std::string& provider, const std::string& what) {
  ++provider_errors_;
  log(t, provider + " error: " + what);
}

void Monitor::on_feed_lost(MonotonicInstant t) {
  if (state_.fix) dispatch(Event{EventKind::FixLost, t, {}, {}});
}

void Monitor::on_clear(MonotonicInstant t) { dispatch(Event{EventKind::Clear, t, {}, {}}); }

void Monitor::tick(MonotonicInstant t) { dispatch(Event{EventKind::Tick, t, {}, {}}); }

Monitor::Polls Monitor::due() {
  Polls p{want_rt_, want_nts_};
  want_rt_ = want_nts_ = false;
  if (epochs_ == 0 || periodic_done_for_ == epoch_) return p;
  periodic_done_for_ = epoch_;

  if (rt_every_ > 0 && epoch_ % rt_every_ == 0) p.rt = true;
  // Without coarse validation, keep retrying Roughtime at the NTS cadence.
  if (state_.phase == Phase::ColdStart && state_.fix && !state_.coarse_validated && nts_every_ > 0 &&
      epoch_ % nts_every_ == 0) {
    p.rt = true;
  }

  uint64_t period = nts_every_;
  if (fast_until_ && epoch_ < *fast_until_) {
    period = period == 0 ? cfg_.nts_fast_poll_every : std::min(period, cfg_.nts_fast_poll_every);
  }
  const bool allowed = state_.coarse_validated || state_.phase == Phase::Alarm ||
                       state_.phase == Phase::Holdover || rt_failed_;
  if (period > 0 && allowed && epoch_ % period == 0) p.nts = true;
  return p;
}

// ---- RunReport ---------------------------------------------------------------------

namespace {

nlohmann::ordered_json outcome_json(const DetectorOutcome& o) {
  nlohmann::ordered_json j;
  j["detected"] = o.detected;
  j["latency_epochs"] = o.latency_epochs ? nlohmann::ordered_json(*o.latency_epochs) : nlohmann::ordered_json();
  j["first_h1_epoch"] = o.first_h1_epoch ? nlohmann::ordered_json(*o.first_h1_epoch) : nlohmann::ordered_json();
  j["verdicts"] = o.verdicts;
  j["h1"] = o.h1;
  j["false_alarms"] = o.false_alarms;
  return j;
}

template <typename T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

}  // namespace

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario_id;
  j["seed"] = seed;
  j["prng"] = prng;
  j["config_hash"] = config_hash;
  j["epochs"] = epochs;
  j["onset_epoch"] = opt(onset);
  j["detectors"]["rt"] = outcome_json(rt);
  j["detectors"]["nts"] = outcome_json(nts);
  j["detectors"]["ll"] = outcome_json(ll);
  j["false_alarms"] = false_alarms;
  j["final_phase"] = final_phase;
  j["active_source"] = active_source;
  j["provider_errors"] = provider_errors;
  j["nts_lambda_s"] = opt(nts_lambda_s);
  j["ll_lambda"] = opt(ll_lambda);
  j["exit_code"] = exit_code();
  return j.dump(2);
}

std::string RunReport::summary() const {
  std::ostringstream s;
  s << "scenario " << scenario_id << " (seed " << seed << ", " << epochs << " epochs";
  if (onset) s << ", onset " << *onset;
  s << ")\n";
  auto line = [&](const char* name, const DetectorOutcome& o) {
    s << "  " << name << ": " << (o.detected ? "detected" : "not detected");
    if (o.latency_epochs) s << ", latency " << *o.latency_epochs << " epochs";
    s << ", " << o.verdicts << " verdicts, " << o.h1 << " H1, " << o.false_alarms << " false alarms\n";
  };
  line("rt ", rt);
  line("nts", nts);
  line("ll ", ll);
  s << "  final phase " << final_phase << ", active source " << active_source << "\n";
  s << "  config " << config_hash << "\n";
  return s.str();
}

// ---- simulated providers -------------------------------------------------------------

namespace {

constexpr uint64_t kClientRngStream = 5;
constexpr uint64_t kServerRngStream = 6;
constexpr uint64_t kKeyRngStream = 7;
constexpr uint64_t kCalibrationStream = 8;

/// Roughtime and NTS mocks behind loopback transports that move a virtual
/// clock along the scripted path delays.
class SimProviders {
 public:
  SimProviders(const sim::ScenarioSpec& spec, const config::RunConfig& cfg)
      : cfg_(cfg),
        client_rng_(spec.seed, kClientRngStream),
        server_rng_(spec.seed, kServerRngStream),
        key_rng_(spec.seed, kKeyRngStream),
        true_now_(spec.start),
        rt_transport_([this](ByteView req) { return rt_exchange(req); }),
        nts_transport_([this](ByteView req) { return nts_exchange(req); }) {
    roughtime::MockServer::Options o;
    o.version = cfg.rt_version;
    o.radius = SignedDuration::from_seconds_f(spec.rt_radius_s);
    rt_ = std::make_unique<roughtime::MockServer>(crypto::Ed25519PrivateKey::generate(key_rng_), server_rng_,
                                                  [this] { return true_now_; }, o);
    rt_key_ = rt_->key("sim-roughtime:2002");
    jar_ = std::make_shared<nts::CookieJar>(key_rng_);
    ntp_ = std::make_unique<nts::MockNtpServer>(jar_, [this] { return true_now_; }, server_rng_, cfg.nts_era);
    session_.emplace(ntp_->psk_session("sim-nts", cfg.nts_target_cookies));
  }

  void set(Timestamp true_now, MonotonicInstant mono, double host_bias_s, const sim::ProviderScript& script) {
    true_now_ = true_now;
    mono_ = mono;
    host_bias_ = SignedDuration::from_seconds_f(host_bias_s);
    script_ = script;
    ntp_->behavior().bias = script.nts_bias;
  }

  MonotonicInstant now() const { return mono_; }

  roughtime::Measurement query_rt() {
    roughtime::PollOptions o;
    o.attempts = cfg_.rt_attempts;
    o.timeout = std::chrono::milliseconds(cfg_.rt_timeout_ms);
    o.clock = [this] { return mono_; };
    return roughtime::poll(rt_key_, rt_transport_, client_rng_, o);
  }

  nts::NtsMeasurement query_nts() {
    if (!session_->usable()) session_.emplace(ntp_->psk_session("sim-nts", cfg_.nts_target_cookies));
    nts::QueryOptions o;
    o.timeout = std::chrono::milliseconds(cfg_.nts_timeout_ms);
    o.target_cookies = cfg_.nts_target_cookies;
    o.era = cfg_.nts_era;
    o.local_clock = [this] { return ts_add(true_now_, host_bias_); };
    o.mono_clock = [this] { return mono_; };
    return nts::nts_query(*session_, nts_transport_, client_rng_, o);
  }

  void poll_rt(Monitor& mon) {
    try {
      const auto m = query_rt();
      mon.on_reachable(mono_);
      mon.on_rt(m, mono_);
    } catch (const UnreachableError&) {
      mon.on_unreachable(mono_, "roughtime");
    } catch (const Error& e) {
      mon.on_provider_error(mono_, "roughtime", e.what());
    }
  }

  void poll_nts(Monitor& mon) {
    try {
      const auto m = query_nts();
      mon.on_reachable(mono_);
      mon.on_nts(m, mono_);
    } catch (const UnreachableError&) {
      mon.on_unreachable(mono_, "nts");
    } catch (const Error& e) {
      mon.on_provider_error(mono_, "nts", e.what());
    }
  }

 private:
  void advance(double s) {
    true_now_ = ts_add(true_now_, SignedDuration::from_seconds_f(s));
    mono_.nanos += static_cast<uint64_t>(std::llround(s * 1e9));
  }

  std::optional<Bytes> rt_exchange(ByteView req) {
    if (!script_.reachable) return std::nullopt;
    advance(script_.rt_delay_s / 2);
    auto resp = rt_->handle(req);
    advance(script_.rt_delay_s / 2);
    return resp;
  }

  std::optional<Bytes> nts_exchange(ByteView req) {
    if (!script_.reachable) return std::nullopt;
    advance(script_.nts_delay_s / 2 + script_.nts_asymmetry_s);
    auto resp = ntp_->handle(req);
    advance(ntp_->behavior().processing.to_seconds());
    advance(script_.nts_delay_s / 2 - script_.nts_asymmetry_s);
    return resp;
  }

  const config::RunConfig& cfg_;
  sim::SeededRandom client_rng_;
  sim::SeededRandom server_rng_;
  sim::SeededRandom key_rng_;
  Timestamp true_now_;
  MonotonicInstant mono_;
  SignedDuration host_bias_;
  sim::ProviderScript script_;
  LoopbackTransport rt_transport_;
  LoopbackTransport nts_transport_;
  std::unique_ptr<roughtime::MockServer> rt_;
  roughtime::ServerKey rt_key_;
  std::shared_ptr<nts::CookieJar> jar_;
  std::unique_ptr<nts::MockNtpServer> ntp_;
  std::optional<nts::NtsSession> session_;
};

sim::ScenarioSpec benign_variant(const sim::ScenarioSpec& scenario, uint64_t epochs, uint64_t seed) {
  sim::ScenarioSpec b = scenario;
  b.id = scenario.id + "-benign";
  b.attack = sim::NoAttack{};
  b.network = sim::AlwaysOn{};
  b.duration_epochs = epochs;
  b.seed = seed;
  return b;
}

std::vector<Timestamp> local_readings(const sim::SimOutputs& sim, uint64_t n) {
  std::vector<Timestamp> out;
  for (size_t i = 0; i < sim.oscillator_bias.size(); ++i) out.push_back(sim.local_time(i, n));
  return out;
}

void check_oscillator_count(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg) {
  if (scenario.oscillators.size() != cfg.oscillators.size()) {
    throw ConfigError("scenario simulates " + std::to_string(scenario.oscillators.size()) +
                      " oscillators but the configuration models " + std::to_string(cfg.oscillators.size()));
  }
}

}  // namespace

std::vector<double> benign_ll_statistics(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg,
                                         uint64_t epochs, uint64_t seed) {
  check_oscillator_count(scenario, cfg);
  const auto sim = sim::gen_scenario(benign_variant(scenario, epochs, seed));
  config::RunConfig c = cfg;
  c.ll.lambda.reset();
  EnsembleTracker tracker(c);
  std::vector<double> stats;
  for (uint64_t n = 0; n < sim.epochs.size(); ++n) {
    const auto step = tracker.on_epoch(n, sim.epochs[n], local_readings(sim, n));
    if (n == 0) tracker.align();
    if (step && step->z) stats.push_back(detector::ll_statistic(*step->z, c.ll.polarity));
  }
  return stats;
}

LlCalibration calibrate_ll(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg) {
  check_oscillator_count(scenario, cfg);
  const auto sim = sim::gen_scenario(benign_variant(scenario, cfg.ll_calibration_epochs, cfg.ll_calibration_seed));
  config::RunConfig c = cfg;
  c.ll.lambda.reset();
  EnsembleTracker tracker(c);
  std::vector<double> stats;
  double sum = 0, sum_sq = 0;
  size_t count = 0;
  for (uint64_t n = 0; n < sim.epochs.size(); ++n) {
    const auto step = tracker.on_epoch(n, sim.epochs[n], local_readings(sim, n));
    if (n == 0) tracker.align();
    if (!step) continue;
    sum += step->residual;
    sum_sq += step->residual * step->residual;
    ++count;
    if (step->z) stats.push_back(detector::ll_statistic(*step->z, c.ll.polarity));
  }
  if (stats.empty() || count < 2) throw CalibrationError("calibration run produced no LL statistics");
  LlCalibration out;
  out.lambda = detector::calibrate_threshold(stats, cfg.ll_target_fa);
  out.statistics = stats.size();
  out.rate_on_calibration = detector::false_alarm_rate(stats, out.lambda);
  out.mu0 = cfg.ll.mu0;
  const double mean = sum / static_cast<double>(count);
  out.sigma0_sq = (sum_sq - static_cast<double>(count) * mean * mean) / static_cast<double>(count - 1);
  return out;
}

NtsCalibration calibrate_nts(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg) {
  SimProviders providers(scenario, cfg);
  sim::CounterRng rng(scenario.seed, kCalibrationStream);
  std::vector<nts::NtsMeasurement> history;
  for (size_t i = 0; i < cfg.nts_calibration_samples; ++i) {
    sim::ProviderScript ps;
    ps.nts_delay_s = rng.uniform(scenario.delay_min_s, scenario.delay_max_s);
    ps.nts_asymmetry_s = std::clamp(rng.gaussian(0, scenario.nts_calibration_sigma_s), -ps.nts_delay_s / 2,
                                    ps.nts_delay_s / 2);
    const auto t = static_cast<int64_t>(i) * 1'000'000'000;
    providers.set(ts_add(scenario.start, SignedDuration::from_nanos(t)),
                  MonotonicInstant{scenario.mono_start_ns + static_cast<uint64_t>(t)}, 0, ps);
    history.push_back(providers.query_nts());
  }
  NtsCalibration out;
  out.samples = history.size();
  out.sigma = nts::estimate_server_sigma(history, cfg.nts_min_samples);
  out.lambda = detector::lambda_from_sigma(out.sigma, cfg.nts_auto_k);
  if (out.lambda <= SignedDuration()) throw CalibrationError("NTS calibration gave a zero threshold");
  return out;
}

RunReport run_simulation(const sim::ScenarioSpec& scenario, const config::RunConfig& cfg_in, const SimOptions& opts) {
  scenario.validate();
  cfg_in.validate();
  check_oscillator_count(scenario, cfg_in);
  config::RunConfig cfg = cfg_in;

  RunReport report;
  report.scenario_id = scenario.id;
  report.seed = scenario.seed;
  report.prng = sim::kPrngAlgorithm;
  report.config_hash = config::config_hash(cfg_in, &scenario);
  report.onset = scenario.onset();

  if (!cfg.ll.lambda) {
    const auto cal = calibrate_ll(scenario, cfg);
    cfg.ll.lambda = cal.lambda;
    cfg.ll.sigma0_sq = cal.sigma0_sq;
  }
  if (!cfg.nts_lambda_s) cfg.nts_lambda_s = calibrate_nts(scenario, cfg).lambda.to_seconds();
  report.ll_lambda = cfg.ll.lambda;
  report.nts_lambda_s = cfg.nts_lambda_s;

  const sim::SimOutputs sim = sim::gen_scenario(scenario);

  std::vector<std::unique_ptr<std::ofstream>> files;
  Sinks sinks = opts.sinks;
  std::filesystem::path dir;
  if (opts.out_dir) {
    dir = *opts.out_dir;
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
      files.push_back(std::make_unique<std::ofstream>(dir / name));
      if (!*files.back()) throw ConfigError("cannot write " + (dir / name).string());
      return files.back().get();
    };
    {
      std::ofstream epochs(dir / "epochs.jsonl");
      sim::write_epochs_jsonl(epochs, sim);
      std::ofstream truth(dir / "ground_truth.csv");
      sim::write_ground_truth_csv(truth, sim);
    }
    sinks.verdicts = open(opts.verdicts_csv ? "verdicts.csv" : "verdicts.jsonl");
    sinks.verdicts_csv = opts.verdicts_csv;
    sinks.transitions = open("transitions.jsonl");
    sinks.events = open("events.jsonl");
    sinks.trace = open("filter_trace.csv");
    sinks.log = open("run.log");
  }

  // Epochs go through the receiver feed exactly as a replay file would.
  std::stringstream feed;
  sim::write_epochs_jsonl(feed, sim);
  EpochReader reader(feed, FeedFormat::Jsonl);

  Monitor monitor(cfg, sinks, report.onset);
  monitor.set_cadence(scenario.rt_poll_every.value_or(cfg.rt_poll_every),
                      scenario.nts_poll_every.value_or(cfg.nts_poll_every));
  SimProviders providers(scenario, cfg);

  for (uint64_t n = 0; n < sim.epochs.size(); ++n) {
    const auto rec = reader.next();
    if (!rec) throw InputError("epoch feed ended early");
    providers.set(sim.true_time[n], rec->t_mono, sim.oscillator_bias[0][n], sim.providers[n]);
    monitor.on_epoch(*rec, local_readings(sim, n));
    // A verdict may schedule a follow-up poll within the same epoch (Roughtime then NTS).
    for (int round = 0; round < 3; ++round) {
      const auto polls = monitor.due();
      if (!polls.any()) break;
      if (polls.rt) providers.poll_rt(monitor);
      if (polls.nts) providers.poll_nts(monitor);
    }
    monitor.tick(providers.now());
  }

  report.epochs = monitor.epochs();
  report.rt = monitor.outcome(TestKind::Rt);
  report.nts = monitor.outcome(TestKind::Nts);
  report.ll = monitor.outcome(TestKind::Ll);
  report.false_alarms = report.rt.false_alarms + report.nts.false_alarms + report.ll.false_alarms;
  report.final_phase = orchestrator::to_string(monitor.state().phase);
  report.active_source = monitor.state().active_source;
  report.provider_errors = monitor.provider_errors();

  if (opts.out_dir) {
    std::ofstream r(dir / "report.json");
    r << report.to_json() << '\n';
  }
  return report;
}

}  // namespace gtv::pipeline
