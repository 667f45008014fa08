// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "gtv/attack_sim.hpp"
#include "gtv/bench.hpp"
#include "gtv/config.hpp"
#include "gtv/crypto.hpp"
#include "gtv/ensemble.hpp"
#include "gtv/nts.hpp"
#include "gtv/nts_server.hpp"
#include "gtv/orchestrator.hpp"
#include "gtv/pipeline.hpp"
#include "gtv/rng.hpp"
#include "gtv/roughtime.hpp"
#include "gtv/roughtime_server.hpp"

using namespace gtv;

namespace {

struct Result {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

sim::ScenarioSpec scenario(const std::string& name) { return *config::builtin_scenario(name); }

Result ac1() {
  Result r;
  const auto step = scenario("step4s");
  const auto rep = pipeline::run_simulation(step, config::RunConfig{});
  const uint64_t onset = *step.onset();
  const uint64_t every = *step.rt_poll_every;
  r.check(rep.rt.first_h1_epoch.has_value(), "no RT H1");
  if (rep.rt.first_h1_epoch) {
    // Polls run every `every` epochs, so the first poll at or after onset lies in [onset, onset + every).
    const uint64_t e = *rep.rt.first_h1_epoch;
    r.check(e >= onset && e < onset + every, "RT H1 at epoch " + std::to_string(e) + " is not the first poll");
    r.note("RT H1 at epoch " + std::to_string(e) + ", onset " + std::to_string(onset));
  }
  r.check(rep.rt.false_alarms == 0, "RT false alarm before onset");

  auto benign = step;
  benign.id = "step4s-benign";
  benign.attack = sim::NoAttack{};
  benign.duration_epochs = 10000;
  const auto b = pipeline::run_simulation(benign, config::RunConfig{});
  r.check(b.rt.verdicts >= 900, "benign run made too few RT polls");
  r.check(b.rt.false_alarms == 0, "benign RT false alarms: " + std::to_string(b.rt.false_alarms));
  r.note("benign: " + std::to_string(b.rt.verdicts) + " RT verdicts, " + std::to_string(b.rt.false_alarms) +
         " false alarms");
  return r;
}

Result ac2() {
  Result r;
  const auto s = scenario("incr2us");
  const auto* a = std::get_if<sim::IncrementalAttack>(&s.attack);
  config::RunConfig cfg;
  cfg.nts_lambda_s = 150e-6;

  // The simulated server spread that a 3-sigma rule turns into roughly 150 us.
  const auto cal = pipeline::calibrate_nts(s, cfg);
  r.check(std::abs(cal.sigma.to_seconds() - 50e-6) < 5e-6, "simulated NTS sigma " + num(cal.sigma.to_seconds()));

  const auto rep = pipeline::run_simulation(s, cfg);
  const uint64_t poll = s.nts_poll_every.value_or(cfg.nts_poll_every);
  const int64_t expected = static_cast<int64_t>(a->onset + 76 * a->every_k);
  r.check(rep.nts.first_h1_epoch.has_value(), "no NTS H1");
  if (rep.nts.first_h1_epoch) {
    const int64_t e = static_cast<int64_t>(*rep.nts.first_h1_epoch);
    r.check(std::abs(e - expected) <= static_cast<int64_t>(poll),
            "first NTS H1 at " + std::to_string(e) + ", expected " + std::to_string(expected) + " +- " +
                std::to_string(poll));
    r.note("first NTS H1 at epoch " + std::to_string(e) + " (onset + 76 periods = " + std::to_string(expected) +
           ", poll " + std::to_string(poll) + "), sigma " + num(cal.sigma.to_seconds() * 1e6) + " us");
  }
  r.check(rep.nts.false_alarms == 0, "NTS false alarms " + std::to_string(rep.nts.false_alarms));
  return r;
}

Result ac3() {
  Result r;
  const auto s = scenario("pull2us");
  const auto* pull = std::get_if<sim::SmoothPull>(&s.attack);
  config::RunConfig cfg;
  r.check(cfg.ll.mode == detector::WindowMode::Gaussian, "LL not in gaussian mode");

  const auto cal = pipeline::calibrate_ll(s, cfg);
  cfg.ll.lambda = cal.lambda;
  cfg.ll.sigma0_sq = cal.sigma0_sq;
  const auto rep = pipeline::run_simulation(s, cfg);
  r.check(rep.ll.detected, "LL did not detect the pull");
  if (rep.ll.first_h1_epoch) {
    r.check(*rep.ll.first_h1_epoch < pull->onset + pull->span, "LL detection after pull completion");
    r.note("LL H1 at epoch " + std::to_string(*rep.ll.first_h1_epoch) + ", pull ends at " +
           std::to_string(pull->onset + pull->span));
  }
  r.check(rep.ll.false_alarms == 0, "LL false alarms before onset " + std::to_string(rep.ll.false_alarms));

  // Out of sample: a fresh benign run at the calibrated threshold.
  const uint64_t check_seed = cfg.ll_calibration_seed + 1;
  const auto stats = pipeline::benign_ll_statistics(s, cfg, 10000, check_seed);
  const double rate = detector::false_alarm_rate(stats, cal.lambda);
  const auto hits = static_cast<double>(std::llround(rate * stats.size()));
  const double lo = boost::math::binomial_distribution<>::find_lower_bound_on_p(
      static_cast<double>(stats.size()), hits, 0.025);
  r.check(cal.rate_on_calibration <= cfg.ll_target_fa, "calibration rate " + num(cal.rate_on_calibration));
  r.check(lo <= cfg.ll_target_fa, "out-of-sample rate " + num(rate) + " (95% CI lower " + num(lo) + ")");
  r.note("lambda " + num(cal.lambda) + ", calibration rate " + num(cal.rate_on_calibration) + ", seed " +
         std::to_string(check_seed) + " rate " + num(rate) + " over " + std::to_string(stats.size()) +
         " (CI lower " + num(lo) + ")");
  return r;
}

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0 : std::abs(a - b) / scale;
}

Result ac4() {
  using namespace ensemble;
  Result r;
  const OscillatorSpec spec;

  // NEES of the final estimate, averaged over 100 independent runs.
  const int runs = 100, steps = 1000;
  const double meas_var = spec.sigma_meas * spec.sigma_meas;
  double nees = 0;
  for (int run = 0; run < runs; ++run) {
    const auto truth = sim::simulate_oscillator_states(spec, steps, 1.0, 5000 + run);
    sim::CounterRng meas(6000 + run);
    auto s = make_state(spec.q_b, spec.q_d, 0, 0, 0, 0);
    for (int k = 1; k < steps; ++k) {
      s = kf_predict(s, 1.0);
      s = kf_update(s, truth.bias[k] + meas.gaussian(0, spec.sigma_meas), meas_var, 1e9).state;
    }
    const Eigen::Vector2d e(truth.bias[steps - 1] - s.x(0), truth.drift[steps - 1] - s.x(1));
    nees += e.dot(s.P.inverse() * e);
  }
  nees /= runs;
  const boost::math::chi_squared chi(2 * runs);
  const double lo = boost::math::quantile(chi, 0.025) / runs, hi = boost::math::quantile(chi, 0.975) / runs;
  r.check(nees >= lo && nees <= hi, "mean NEES " + num(nees) + " outside [" + num(lo) + ", " + num(hi) + "]");
  r.note("mean NEES " + num(nees) + " in [" + num(lo) + ", " + num(hi) + "]");

  const auto s0 = make_state(1e-21, 1e-24, 3e-7, 1e-14, 2e-10, 1e-20);
  const auto p0 = kf_predict(s0, 0);
  r.check(p0.x == s0.x && p0.P == s0.P, "predict(0) is not the identity");

  // 4 sigma innovation against gate 3: rejected and state untouched; 2 sigma accepted.
  const auto pred = kf_predict(s0, 1.0);
  const double sd = std::sqrt(pred.P(0, 0) + meas_var);
  const auto out = kf_update(pred, pred.x(0) + 4 * sd, meas_var, 3);
  r.check(!out.accepted && out.state.x == pred.x && out.state.P == pred.P, "4 sigma outlier not rejected");
  r.check(kf_update(pred, pred.x(0) - 2 * sd, meas_var, 3).accepted, "2 sigma measurement rejected");

  // Scalar re-derivation of predict / gate / Joseph update.
  double b = 0, d = 0, pbb = 1e-12, pbd = 0, pdd = 1e-18;
  const double qb = 1e-21, qd = 1e-23, sigma = 10e-9, rr = sigma * sigma;
  auto s = make_state(qb, qd, 0, pbb, 0, pdd);
  sim::CounterRng g(61);
  double truth = 0, worst = 0;
  for (int k = 0; k < 200; ++k) {
    truth += 2e-11 + g.gaussian(0, 3e-11);
    const double z = truth + g.gaussian(0, sigma) + (k % 37 == 0 ? 1e-6 : 0);  // occasional outlier
    s = kf_predict(s, 1.0);
    b += d;
    const double nbb = pbb + 2 * pbd + pdd + qb + qd / 3, nbd = pbd + pdd + qd / 2, ndd = pdd + qd;
    pbb = nbb, pbd = nbd, pdd = ndd;
    const auto u = kf_update(s, z, rr, 3);
    const double nu = z - b, S = pbb + rr;
    const bool accept = std::abs(nu) <= 3 * std::sqrt(S);
    if (u.accepted != accept) {
      r.check(false, "gate decision differs from oracle at step " + std::to_string(k));
      break;
    }
    if (accept) {
      const double kb = pbb / S, kd = pbd / S;
      b += kb * nu;
      d += kd * nu;
      const double a11 = 1 - kb, a21 = -kd;
      const double m11 = a11 * pbb, m12 = a11 * pbd, m21 = a21 * pbb + pbd, m22 = a21 * pbd + pdd;
      const double jbb = m11 * a11 + kb * rr * kb, jbd = m11 * a21 + m12 + kb * rr * kd;
      const double jdd = m21 * a21 + m22 + kd * rr * kd;
      pbb = jbb, pbd = jbd, pdd = jdd;
    }
    s = u.state;
    for (const double e : {rel_err(s.x(0), b), rel_err(s.x(1), d), rel_err(s.P(0, 0), pbb),
                           rel_err(s.P(0, 1), pbd), rel_err(s.P(1, 1), pdd)}) {
      worst = std::max(worst, e);
    }
  }
  r.check(worst <= 1e-12, "oracle filter disagreement " + num(worst));
  r.note("oracle max relative error " + num(worst));
  return r;
}

Result ac5() {
  using namespace roughtime;
  Result r;
  const Timestamp now{1689182889, 0};
  sim::SeededRandom rng(42);
  MockServer server(crypto::Ed25519PrivateKey::generate(rng), rng, [&] { return now; });
  const auto& key = server.key();
  Bytes nonce(32);
  for (size_t i = 0; i < nonce.size(); ++i) nonce[i] = static_cast<uint8_t>(3 * i + 1);
  const Bytes resp = *server.handle(build_request(default_profile(), nonce));

  try {
    const auto m = verify_response(resp, nonce, key, {1});
    r.check(m.midpoint() == now, "midpoint differs from the server clock");
  } catch (const RoughtimeError& e) {
    r.check(false, std::string("chain rejected: ") + e.what());
  }

  const auto msg = decode_message(unframe_packet(default_profile(), resp));
  const auto cert = decode_message(msg.at(kTagCert));
  const auto srep = decode_message(msg.at(kTagSrep));
  Bytes leaf_input = {0x00};
  leaf_input.insert(leaf_input.end(), nonce.begin(), nonce.end());
  const auto digest = crypto::sha512(leaf_input);
  r.check(srep.at(kTagRoot) == Bytes(digest.begin(), digest.begin() + 32), "single-leaf root != direct hash");

  size_t flips = 0, rejected = 0;
  for (const Bytes& region : {msg.at(kTagSrep), cert.at(kTagDele), msg.at(kTagSig), cert.at(kTagSig)}) {
    const auto at = std::search(resp.begin(), resp.end(), region.begin(), region.end()) - resp.begin();
    for (size_t i = static_cast<size_t>(at); i < static_cast<size_t>(at) + region.size(); ++i) {
      for (int bit = 0; bit < 8; ++bit) {
        Bytes bad = resp;
        bad[i] ^= static_cast<uint8_t>(1u << bit);
        ++flips;
        try {
          verify_response(bad, nonce, key, {1});
        } catch (const RoughtimeError&) {
          ++rejected;
        }
      }
    }
  }
  r.check(flips > 0 && rejected == flips,
          std::to_string(flips - rejected) + " of " + std::to_string(flips) + " flips accepted");
  r.note(std::to_string(rejected) + "/" + std::to_string(flips) + " single-bit flips rejected");
  return r;
}

Result ac6() {
  using namespace nts;
  Result r;
  sim::SeededRandom rng(5);
  auto jar = std::make_shared<CookieJar>(rng);
  Timestamp now{1689182889, 0};
  auto tick = [&] {
    const auto t = now;
    now = ts_add(now, SignedDuration::from_micros(1000));
    return t;
  };
  MockNtpServer server(jar, tick, rng);
  NtsSession session = server.psk_session();
  LoopbackTransport transport([&](ByteView req) { return server.handle(req); });
  QueryOptions opts;
  opts.local_clock = tick;

  try {
    const auto m = nts_query(session, transport, rng, opts);
    r.check(m.offset().abs() <= SignedDuration::from_micros(10), "round trip offset " + m.offset().to_string());
  } catch (const Error& e) {
    r.check(false, std::string("round trip failed: ") + e.what());
  }

  server.behavior().flip_ciphertext_bit = true;
  bool auth_rejected = false;
  try {
    nts_query(session, transport, rng, opts);
  } catch (const NtsError& e) {
    auth_rejected = e.failure() == NtsFailure::Authentication;
  }
  r.check(auth_rejected, "ciphertext bit flip not rejected as an authentication failure");
  server.behavior().flip_ciphertext_bit = false;

  const size_t before = server.cookies_seen().size();
  for (int i = 0; i < 1000; ++i) nts_query(session, transport, rng, opts);
  const auto& seen = server.cookies_seen();
  const std::set<Bytes> unique(seen.begin() + static_cast<std::ptrdiff_t>(before), seen.end());
  r.check(seen.size() - before == 1000 && unique.size() == 1000,
          "cookies reused: " + std::to_string(unique.size()) + " unique");

  auto at = [](double s) { return ts_add({0, 0}, SignedDuration::from_seconds_f(s)); };
  struct Quad {
    double t1, t2, t3, t4, theta, delta;
  };
  for (const Quad& q : {Quad{0, 5, 6, 11, 0, 10}, Quad{0, 5, 5, 8, 1, 8}, Quad{1.5, 2.25, 2.5, 3.0, 0.125, 1.25}}) {
    const auto od = compute_offset_delay(at(q.t1), at(q.t2), at(q.t3), at(q.t4));
    r.check(od.offset == SignedDuration::from_seconds_f(q.theta) && od.delay == SignedDuration::from_seconds_f(q.delta),
            "theta/delta mismatch for T1 = " + num(q.t1));
  }
  r.note("1000 cookies unique, 3 quadruples exact");
  return r;
}

orchestrator::Event event(orchestrator::EventKind k, uint64_t t, std::optional<detector::Hypothesis> h) {
  orchestrator::Event e;
  e.kind = k;
  e.t_mono = MonotonicInstant{t};
  e.hypothesis = h;
  return e;
}

Result ac7() {
  using namespace orchestrator;
  using detector::Hypothesis;
  Result r;

  // Recorded runs: the event log alone reproduces the transition log.
  size_t recorded = 0;
  for (const auto& name : config::builtin_scenario_names()) {
    if (name == "benign10k") continue;
    std::ostringstream events, transitions;
    pipeline::SimOptions o;
    o.sinks.events = &events;
    o.sinks.transitions = &transitions;
    const config::RunConfig cfg;
    pipeline::run_simulation(scenario(name), cfg, o);
    std::vector<Event> log;
    std::istringstream in(events.str());
    for (std::string l; std::getline(in, l);) {
      if (!l.empty()) log.push_back(event_from_jsonl(l));
    }
    std::string replayed;
    for (const auto& l : replay(log, cfg.orchestrator)) replayed += l + "\n";
    r.check(replayed == transitions.str(), "replay of " + name + " differs");
    recorded += log.size();
  }

  static const EventKind kinds[] = {EventKind::FixAcquired, EventKind::FixLost,     EventKind::RtVerdict,
                                    EventKind::NtsVerdict,  EventKind::LlVerdict,   EventKind::NetworkUp,
                                    EventKind::NetworkDown, EventKind::Tick,        EventKind::Clear};
  constexpr uint64_t kSec = 1'000'000'000;
  sim::CounterRng g(77);
  Config latched;
  latched.auto_clear_k = 0;
  uint64_t violations = 0, fine_reached = 0;
  for (int seq = 0; seq < 100000 && violations == 0; ++seq) {
    const Config& cfg = seq % 2 ? latched : Config{};
    State s;
    bool coarse = false, h1_open = false;
    uint64_t t = 0;
    const size_t n = 1 + g.next_u64() % 40;
    std::vector<Event> seq_events;
    for (size_t i = 0; i < n; ++i) {
      t += g.uniform() < 0.05 ? static_cast<uint64_t>(g.uniform(0, 6 * 3600)) * kSec
                              : static_cast<uint64_t>(g.uniform(0, 2e9));
      const EventKind k = kinds[g.next_u64() % std::size(kinds)];
      std::optional<Hypothesis> h;
      if (k == EventKind::RtVerdict || k == EventKind::NtsVerdict || k == EventKind::LlVerdict) {
        h = g.uniform() < 0.15 ? Hypothesis::H1 : Hypothesis::H0;
      }
      const Event e = event(k, t, h);
      seq_events.push_back(e);
      const Phase before = s.phase;
      s = step(s, e, cfg).state;
      // Shadow bookkeeping from the event stream, independent of the state's own flags.
      if (s.phase == Phase::ResetPending || (s.phase == Phase::ColdStart && before != Phase::ColdStart)) {
        coarse = false;
      }
      if (before == Phase::ColdStart && h == Hypothesis::H0 &&
          (k == EventKind::RtVerdict || k == EventKind::NtsVerdict)) {
        coarse = true;
      }
      if (h == Hypothesis::H1) h1_open = true;
      else if (before == Phase::Alarm && s.phase != Phase::Alarm) h1_open = false;
      if (s.phase == Phase::FineMonitoring) {
        ++fine_reached;
        if (!coarse) ++violations;
      }
      if (h1_open && s.active_source == "gnss") ++violations;
      if (cfg.auto_clear_k == 0 && h1_open && s.phase != Phase::Alarm) ++violations;
    }
    if (seq % 1000 == 0) r.check(replay(seq_events, cfg) == replay(seq_events, cfg), "replay nondeterministic");
  }
  r.check(violations == 0, std::to_string(violations) + " safety violations");
  r.check(fine_reached > 0, "random sequences never reached FINE_MONITORING");
  r.note(std::to_string(recorded) + " recorded events replayed, 100000 random sequences, " +
         std::to_string(fine_reached) + " FINE_MONITORING visits, 0 violations");
  return r;
}

Result ac8() {
  Result r;
  const auto rep = bench::bench_crypto(2000);
  for (const char* op : {"sign", "verify", "aead-encrypt", "aead-decrypt"}) {
    for (const size_t n : {size_t{1024}, size_t{8192}}) {
      const auto* row = rep.find(op, n);
      r.check(row && row->mean_latency_s > 0 && row->ops_per_s > 0,
              std::string("missing row ") + op + " " + std::to_string(n));
    }
  }
  if (!r.pass) return r;
  for (const size_t n : {size_t{1024}, size_t{8192}}) {
    const double verify = rep.find("verify", n)->mean_latency_s;
    for (const char* op : {"aead-encrypt", "aead-decrypt"}) {
      const double ratio = verify / rep.find(op, n)->mean_latency_s;
      r.check(ratio >= 10, std::string(op) + " " + std::to_string(n) + " B only " + num(ratio) + "x faster");
      r.note(std::string(op) + "@" + std::to_string(n) + " " + num(ratio) + "x");
    }
  }
  return r;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    std::function<Result()> run;
    double budget_s;  // 0: no runtime bound
  };
  const Criterion criteria[] = {
      {"AC1", ac1, 10}, {"AC2", ac2, 30}, {"AC3", ac3, 60}, {"AC4", ac4, 0},
      {"AC5", ac5, 60}, {"AC6", ac6, 0},  {"AC7", ac7, 0},  {"AC8", ac8, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0) r.check(secs < c.budget_s, "runtime " + num(secs) + " s over " + num(c.budget_s) + " s");
    std::printf("%s %s (%.2f s) %s\n", c.id, r.pass ? "PASS" : "FAIL", secs, r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
