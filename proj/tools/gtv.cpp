// gtv: GNSS time validation against authenticated network time.
//
//   gtv simulate --scenario step4s --out-dir out/
//   gtv live --feed /dev/ttyACM0 --nmea --config site.ini
//   gtv bench-crypto --iterations 2000
//   gtv calibrate --scenario benign10k
//   gtv config dump
//
// Exit codes: 0 clean, 2 attack detected (any H1 verdict), 1 error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gtv/bench.hpp"
#include "gtv/config.hpp"
#include "gtv/live.hpp"
#include "gtv/pipeline.hpp"

namespace {

using namespace gtv;

struct Common {
  std::string config_path;
  std::string out_dir;
  std::string format = "jsonl";
  std::optional<uint64_t> seed_override;
};

config::RunConfig load(const Common& c) {
  config::RunConfig cfg = c.config_path.empty() ? config::RunConfig{} : config::load_config(c.config_path);
  cfg.apply_env();
  cfg.validate();
  return cfg;
}

sim::ScenarioSpec scenario_for(const std::string& name, const Common& c) {
  sim::ScenarioSpec s = config::resolve_scenario(name);
  if (c.seed_override) s.seed = *c.seed_override;
  s.validate();
  return s;
}

int cmd_simulate(const Common& c, const std::string& scenario_name, bool quiet) {
  const auto cfg = load(c);
  const auto scenario = scenario_for(scenario_name, c);
  pipeline::SimOptions opts;
  if (!c.out_dir.empty()) opts.out_dir = c.out_dir;
  opts.verdicts_csv = c.format == "csv";
  const auto report = pipeline::run_simulation(scenario, cfg, opts);
  std::cout << report.to_json() << '\n';
  if (!quiet) std::cerr << report.summary();
  return report.exit_code();
}

int cmd_live(const Common& c, live::LiveOptions opts, const std::string& bias) {
  const auto cfg = load(c);
  if (!c.out_dir.empty()) opts.out_dir = c.out_dir;
  opts.verdicts_csv = c.format == "csv";
  if (!bias.empty()) opts.mock_nts_bias = config::parse_duration(bias);
  const auto report = live::run_live(cfg, opts, std::cout);
  std::cerr << report.summary();
  return report.exit_code();
}

int cmd_bench(uint64_t iterations, const std::string& format) {
  const auto report = bench::bench_crypto(iterations);
  if (format == "csv") std::cout << report.csv();
  else if (format == "jsonl") std::cout << report.jsonl();
  else std::cout << report.table();
  return 0;
}

int cmd_calibrate(const Common& c, const std::string& scenario_name, uint64_t check_seed) {
  auto cfg = load(c);
  const auto scenario = scenario_for(scenario_name, c);
  const auto nts_cal = pipeline::calibrate_nts(scenario, cfg);
  const auto ll_cal = pipeline::calibrate_ll(scenario, cfg);
  const auto check = pipeline::benign_ll_statistics(scenario, cfg, cfg.ll_calibration_epochs, check_seed);
  const double rate = detector::false_alarm_rate(check, ll_cal.lambda);

  std::ostringstream ini;
  ini.precision(17);
  ini << "; NTS: sigma " << nts_cal.sigma.to_seconds() << " s from " << nts_cal.samples << " queries\n";
  ini << "; LL: " << ll_cal.statistics << " statistics, rate " << ll_cal.rate_on_calibration
      << " on the calibration run, " << rate << " on seed " << check_seed << "\n";
  ini << "[detector]\nnts_lambda_s = " << nts_cal.lambda.to_seconds() << "\n\n";
  ini << "[ll]\nlambda = " << ll_cal.lambda << "\nmu0 = " << ll_cal.mu0 << "\nsigma0_sq = " << ll_cal.sigma0_sq
      << "\n";
  std::cout << ini.str();
  if (!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    std::ofstream(std::filesystem::path(c.out_dir) / "calibration.ini") << ini.str();
  }
  return 0;
}

int cmd_replay(const std::string& events_path, const Common& c) {
  const auto cfg = load(c);
  std::ifstream in(events_path);
  if (!in) throw InputError("cannot open " + events_path);
  std::vector<orchestrator::Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) events.push_back(orchestrator::event_from_jsonl(line));
  }
  for (const auto& l : orchestrator::replay(events, cfg.orchestrator)) std::cout << l << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS time validation against authenticated network time"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "configuration file (INI)")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", common.out_dir, "directory for trace files");
    sub->add_option("--format", common.format, "verdict trace format")->check(CLI::IsMember({"jsonl", "csv"}));
  };

  std::string scenario = "step4s";
  bool quiet = false;
  auto* simulate = app.add_subcommand("simulate", "run a scenario end to end");
  add_common(simulate);
  simulate->add_option("--scenario", scenario, "builtin scenario name or scenario file");
  simulate->add_option("--seed-override", common.seed_override, "replace the scenario seed");
  simulate->add_flag("--quiet", quiet, "no human summary on stderr");

  live::LiveOptions live_opts;
  bool nmea = false;
  std::string bias;
  auto* live_cmd = app.add_subcommand("live", "monitor a receiver feed against remote providers");
  add_common(live_cmd);
  live_cmd->add_option("--feed", live_opts.feed, "feed path or - for stdin");
  live_cmd->add_flag("--nmea", nmea, "feed is NMEA 0183 (default JSONL)");
  live_cmd->add_flag("--pace", live_opts.pace, "replay a JSONL feed at its recorded cadence");
  live_cmd->add_flag("--mock-providers", live_opts.mock_providers, "serve mock providers on 127.0.0.1");
  live_cmd->add_option("--mock-stop-after", live_opts.mock_stop_after, "stop the mocks after N epochs");
  live_cmd->add_option("--mock-nts-bias", bias, "mock NTS time bias, e.g. 5ms");

  uint64_t iterations = 1000;
  std::string bench_format = "table";
  auto* bench_cmd = app.add_subcommand("bench-crypto", "time signature and AEAD primitives");
  bench_cmd->add_option("--iterations", iterations, "operations per row");
  bench_cmd->add_option("--format", bench_format)->check(CLI::IsMember({"table", "jsonl", "csv"}));

  std::string cal_scenario = "benign10k";
  uint64_t check_seed = 8;
  auto* calibrate = app.add_subcommand("calibrate", "fit the NTS and LL thresholds on benign data");
  add_common(calibrate);
  calibrate->add_option("--scenario", cal_scenario, "benign basis scenario");
  calibrate->add_option("--seed-override", common.seed_override, "replace the scenario seed");
  calibrate->add_option("--check-seed", check_seed, "seed of the out-of-sample check run");

  std::string events_path;
  auto* replay = app.add_subcommand("replay", "replay an event log through the orchestrator");
  add_common(replay);
  replay->add_option("events", events_path, "events.jsonl from a previous run")->required();

  auto* config_cmd = app.add_subcommand("config", "inspect configuration");
  config_cmd->require_subcommand(1);
  add_common(config_cmd);
  auto* dump = config_cmd->add_subcommand("dump", "print every key with its effective value");
  std::string scenario_name;
  auto* scen = config_cmd->add_subcommand("scenario", "print a builtin scenario as a scenario file");
  scen->add_option("name", scenario_name)->required();
  auto* list = config_cmd->add_subcommand("list-scenarios", "names of the builtin scenarios");
  auto* hash = config_cmd->add_subcommand("hash", "digest of the effective configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(common, scenario, quiet);
    if (live_cmd->parsed()) {
      live_opts.format = nmea ? FeedFormat::Nmea : FeedFormat::Jsonl;
      return cmd_live(common, live_opts, bias);
    }
    if (bench_cmd->parsed()) return cmd_bench(iterations, bench_format);
    if (calibrate->parsed()) return cmd_calibrate(common, cal_scenario, check_seed);
    if (replay->parsed()) return cmd_replay(events_path, common);
    if (dump->parsed()) {
      config::dump_config(std::cout, load(common));
    } else if (scen->parsed()) {
      config::dump_scenario(std::cout, config::resolve_scenario(scenario_name));
    } else if (list->parsed()) {
      for (const auto& n : config::builtin_scenario_names()) std::cout << n << '\n';
    } else if (hash->parsed()) {
      std::cout << config::config_hash(load(common)) << '\n';
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.error_class()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
