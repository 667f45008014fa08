#include "gtv/live.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "gtv/nts_server.hpp"
#include "gtv/roughtime_server.hpp"
#include "gtv/transport.hpp"

namespace gtv::live {

namespace {

struct MockProviders {
  std::unique_ptr<roughtime::MockServer> rt;
  std::unique_ptr<UdpServer> rt_udp;
  std::shared_ptr<nts::CookieJar> jar;
  std::unique_ptr<nts::MockNtpServer> ntp;
  std::unique_ptr<UdpServer> ntp_udp;
  std::unique_ptr<nts::MockKeServer> ke;

  void stop() {
    rt_udp.reset();
    ntp_udp.reset();
    ke.reset();
  }
};

class LiveProviders {
 public:
  LiveProviders(const config::RunConfig& cfg, std::string ca_pem) : cfg_(cfg), ca_pem_(std::move(ca_pem)) {
    if (!cfg.rt_server.empty()) {
      if (cfg.rt_public_key.empty()) throw ConfigError("roughtime.server is set but roughtime.public_key is not");
      rt_key_ = roughtime::ServerKey::from_base64(cfg.rt_public_key, cfg.rt_server, cfg.rt_version);
    }
  }

  bool has_rt() const { return rt_key_.has_value(); }
  bool has_nts() const { return !cfg_.nts_server.empty(); }

  roughtime::Measurement query_rt() {
    const auto [host, port] = split_host_port(rt_key_->address, 2002);
    UdpTransport t(host, port);
    roughtime::PollOptions o;
    o.attempts = cfg_.rt_attempts;
    o.timeout = std::chrono::milliseconds(cfg_.rt_timeout_ms);
    return roughtime::poll(*rt_key_, t, crypto::system_random(), o);
  }

  nts::NtsMeasurement query_nts() {
    if (!session_ || !session_->usable()) {
      session_.reset();
      const auto [host, port] = split_host_port(cfg_.nts_server, nts::kDefaultKePort);
      nts::TlsConfig tls;
      tls.ca_pem = ca_pem_;
      tls.ca_file = cfg_.nts_ca_file;
      tls.timeout = std::chrono::milliseconds(cfg_.nts_timeout_ms * 5);
      session_.emplace(nts::nts_ke_handshake(host, port, tls));
    }
    UdpTransport t(session_->ntp_host(), session_->ntp_port());
    nts::QueryOptions o;
    o.timeout = std::chrono::milliseconds(cfg_.nts_timeout_ms);
    o.target_cookies = cfg_.nts_target_cookies;
    o.era = cfg_.nts_era;
    try {
      return nts::nts_query(*session_, t, crypto::system_random(), o);
    } catch (const nts::NtsError&) {
      session_.reset();  // fresh keys next time
      throw;
    }
  }

 private:
  const config::RunConfig& cfg_;
  std::string ca_pem_;
  std::optional<roughtime::ServerKey> rt_key_;
  std::optional<nts::NtsSession> session_;
};

}  // namespace

pipeline::RunReport run_live(const config::RunConfig& cfg_in, const LiveOptions& opts, std::ostream& verdicts) {
  config::RunConfig cfg = cfg_in;
  MockProviders mocks;
  std::string ca_pem;
  if (opts.mock_providers) {
    mocks.rt = std::make_unique<roughtime::MockServer>(crypto::Ed25519PrivateKey::generate(), crypto::system_random(),
                                                       nts::system_clock_now);
    mocks.rt_udp = std::make_unique<UdpServer>([&](ByteView req) { return mocks.rt->handle(req); });
    cfg.rt_server = "127.0.0.1:" + std::to_string(mocks.rt_udp->port());
    cfg.rt_public_key = to_base64(mocks.rt->key().public_key);
    cfg.rt_version = mocks.rt->key().version;

    mocks.jar = std::make_shared<nts::CookieJar>();
    mocks.ntp = std::make_unique<nts::MockNtpServer>(mocks.jar, nts::system_clock_now);
    if (opts.mock_nts_bias) mocks.ntp->behavior().bias = *opts.mock_nts_bias;
    mocks.ntp_udp = std::make_unique<UdpServer>([&](ByteView req) { return mocks.ntp->handle(req); });
    nts::MockKeServer::Options ko;
    ko.ntp_server = "127.0.0.1";
    ko.ntp_port = mocks.ntp_udp->port();
    mocks.ke = std::make_unique<nts::MockKeServer>(mocks.jar, ko);
    cfg.nts_server = "127.0.0.1:" + std::to_string(mocks.ke->port());
    ca_pem = mocks.ke->certificate_pem();
  }
  cfg.orchestrator.roughtime_configured = !cfg.rt_server.empty();
  cfg.orchestrator.nts_configured = !cfg.nts_server.empty();
  // The host has a single clock; model it with the first configured oscillator.
  cfg.oscillators.resize(1);
  cfg.validate();

  if (!cfg.ll.lambda) {
    const auto cal = pipeline::calibrate_ll(*config::builtin_scenario("benign10k"), cfg);
    cfg.ll.lambda = cal.lambda;
    cfg.ll.sigma0_sq = cal.sigma0_sq;
  }

  std::vector<std::unique_ptr<std::ofstream>> files;
  pipeline::Sinks sinks;
  sinks.verdicts = &verdicts;
  sinks.verdicts_csv = opts.verdicts_csv;
  sinks.log = &std::cerr;
  if (opts.out_dir) {
    const std::filesystem::path dir = *opts.out_dir;
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
      files.push_back(std::make_unique<std::ofstream>(dir / name));
      return files.back().get();
    };
    sinks.transitions = open("transitions.jsonl");
    sinks.events = open("events.jsonl");
    sinks.trace = open("filter_trace.csv");
  }

  pipeline::Monitor monitor(cfg, sinks);
  LiveProviders providers(cfg, ca_pem);

  // NTS threshold: configured, or learnt from the first queries.
  std::vector<nts::NtsMeasurement> nts_history;
  bool nts_ready = cfg.nts_lambda_s.has_value();
  auto calibrate_from_history = [&] {
    if (nts_ready || nts_history.size() < cfg.nts_min_samples) return;
    const auto sigma = nts::estimate_server_sigma(nts_history, cfg.nts_min_samples);
    // A perfectly quiet server would give a zero threshold; keep one microsecond as the floor.
    const auto lambda = std::max(detector::lambda_from_sigma(sigma, cfg.nts_auto_k), SignedDuration::from_micros(1));
    monitor.set_nts_lambda(lambda);
    cfg.nts_lambda_s = lambda.to_seconds();
    nts_ready = true;
  };

  auto poll_rt = [&] {
    if (!providers.has_rt()) return;
    try {
      const auto m = providers.query_rt();
      monitor.on_reachable(MonotonicInstant::now());
      monitor.on_rt(m, MonotonicInstant::now());
    } catch (const UnreachableError&) {
      monitor.on_unreachable(MonotonicInstant::now(), "roughtime");
    } catch (const Error& e) {
      monitor.on_provider_error(MonotonicInstant::now(), "roughtime", e.what());
    }
  };
  auto poll_nts = [&] {
    if (!providers.has_nts()) return;
    try {
      if (!nts_ready) {
        while (nts_history.size() < cfg.nts_min_samples) nts_history.push_back(providers.query_nts());
        calibrate_from_history();
      }
      const auto m = providers.query_nts();
      monitor.on_reachable(MonotonicInstant::now());
      monitor.on_nts(m, MonotonicInstant::now());
    } catch (const UnreachableError&) {
      monitor.on_unreachable(MonotonicInstant::now(), "nts");
    } catch (const Error& e) {
      monitor.on_provider_error(MonotonicInstant::now(), "nts", e.what());
    }
  };

  std::ifstream file;
  std::istream* in = &std::cin;
  if (opts.feed != "-") {
    file.open(opts.feed);
    if (!file) throw InputError("cannot open feed " + opts.feed);
    in = &file;
  }
  EpochReader reader(*in, opts.format);

  std::optional<MonotonicInstant> first_rec, first_wall;
  uint64_t n = 0;
  while (true) {
    std::optional<EpochRecord> rec;
    try {
      rec = reader.next();
    } catch (const ParseError& e) {
      monitor.on_provider_error(MonotonicInstant::now(), "feed", e.what());
      continue;
    }
    if (!rec) break;
    if (opts.pace && opts.format == FeedFormat::Jsonl) {
      if (!first_rec) {
        first_rec = rec->t_mono;
        first_wall = MonotonicInstant::now();
      }
      const auto due = first_wall->nanos + (rec->t_mono.nanos - first_rec->nanos);
      const auto now = MonotonicInstant::now().nanos;
      if (due > now) std::this_thread::sleep_for(std::chrono::nanoseconds(due - now));
    }
    rec->t_mono = MonotonicInstant::now();
    if (opts.mock_providers && opts.mock_stop_after && n == *opts.mock_stop_after) mocks.stop();
    monitor.on_epoch(*rec, {nts::system_clock_now()});
    for (int round = 0; round < 3; ++round) {
      const auto polls = monitor.due();
      if (!polls.any()) break;
      if (polls.rt) poll_rt();
      if (polls.nts) poll_nts();
    }
    monitor.tick(MonotonicInstant::now());
    verdicts.flush();
    ++n;
  }
  monitor.on_feed_lost(MonotonicInstant::now());
  monitor.tick(MonotonicInstant::now());

  pipeline::RunReport report;
  report.scenario_id = "live";
  report.config_hash = config::config_hash(cfg);
  report.epochs = monitor.epochs();
  report.rt = monitor.outcome(detector::TestKind::Rt);
  report.nts = monitor.outcome(detector::TestKind::Nts);
  report.ll = monitor.outcome(detector::TestKind::Ll);
  report.false_alarms = report.rt.false_alarms + report.nts.false_alarms + report.ll.false_alarms;
  report.final_phase = orchestrator::to_string(monitor.state().phase);
  report.active_source = monitor.state().active_source;
  report.provider_errors = monitor.provider_errors();
  report.ll_lambda = cfg.ll.lambda;
  if (nts_ready) report.nts_lambda_s = cfg.nts_lambda_s;
  if (opts.out_dir) {
    std::ofstream r(std::filesystem::path(*opts.out_dir) / "report.json");
    r << report.to_json() << '\n';
  }
  return report;
}

}  // namespace gtv::live
