#include "gtv/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "gtv/crypto.hpp"

namespace gtv::config {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string fmt(double d) {
  std::ostringstream s;
  s.precision(17);
  s << d;
  return s.str();
}

std::string fmt_duration(SignedDuration d) {
  // to_nanos floors; the nearest count is the one parse_duration maps back to d.
  for (const int64_t ns : {d.to_nanos(), d.to_nanos() + 1}) {
    std::string text = std::to_string(ns) + "ns";
    if (ns % 1'000'000'000 == 0) text = std::to_string(ns / 1'000'000'000) + "s";
    else if (ns % 1'000'000 == 0) text = std::to_string(ns / 1'000'000) + "ms";
    else if (ns % 1000 == 0) text = std::to_string(ns / 1000) + "us";
    if (parse_duration(text) == d) return text;
  }
  return d.to_string() + "s";
}

// Shortest exact spelling of a duration held as double seconds.
std::string fmt_seconds(double sec) {
  static const std::pair<double, const char*> units[] = {{1.0, "s"}, {1e3, "ms"}, {1e6, "us"}, {1e9, "ns"}};
  for (const auto& [scale, name] : units) {
    const double v = std::round(sec * scale);
    if (std::fabs(v) < 1e15 && v / scale == sec) return std::to_string(static_cast<int64_t>(v)) + name;
  }
  return fmt(sec) + "s";
}

pt::ptree read_ini(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  return tree;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

/// Walks section/key pairs; an unknown section or key is a configuration error.
void walk(const pt::ptree& tree, const std::function<Setter(const std::string& section)>& section_handler) {
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw ConfigError("key '" + section + "' outside any section");
    const Setter set = section_handler(section);
    if (!set) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : node) set(section + "." + key, trim(value.data()));
  }
}

ensemble::OscillatorSpec& oscillator_named(std::vector<ensemble::OscillatorSpec>& list, const std::string& label,
                                           bool& replaced_defaults) {
  if (!replaced_defaults) {
    list.clear();
    replaced_defaults = true;
  }
  for (auto& o : list) {
    if (o.label == label) return o;
  }
  ensemble::OscillatorSpec o;
  o.label = label;
  list.push_back(o);
  return list.back();
}

Setter oscillator_setter(std::vector<ensemble::OscillatorSpec>& list, const std::string& label,
                         bool& replaced_defaults) {
  auto* osc = &oscillator_named(list, label, replaced_defaults);
  const size_t index = static_cast<size_t>(osc - list.data());
  return [&list, index](const std::string& k, const std::string& v) {
    auto& o = list[index];
    const std::string key = k.substr(k.rfind('.') + 1);
    if (key == "q_b") o.q_b = to_double(k, v);
    else if (key == "q_d") o.q_d = to_double(k, v);
    else if (key == "sigma_meas") o.sigma_meas = to_double(k, v);
    else throw ConfigError("unknown key " + k);
  };
}

void dump_oscillators(std::ostream& out, const std::vector<ensemble::OscillatorSpec>& list) {
  for (const auto& o : list) {
    out << "\n[oscillator." << o.label << "]\n";
    out << "q_b = " << fmt(o.q_b) << "\n";
    out << "q_d = " << fmt(o.q_d) << "\n";
    out << "sigma_meas = " << fmt(o.sigma_meas) << "\n";
  }
}

std::string opt_str(const std::optional<uint64_t>& v) { return v ? std::to_string(*v) : ""; }

}  // namespace

double parse_seconds(const std::string& raw) {
  const std::string text = trim(raw);
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a duration: '" + raw + "'");
  }
  const std::string unit = text.substr(used);
  double scale = 1;
  if (unit.empty() || unit == "s") scale = 1;
  else if (unit == "ms") scale = 1e3;
  else if (unit == "us") scale = 1e6;
  else if (unit == "ns") scale = 1e9;
  else throw ConfigError("unknown duration unit in '" + raw + "'");
  if (!std::isfinite(v)) throw ConfigError("duration out of range: '" + raw + "'");
  return v / scale;
}

SignedDuration parse_duration(const std::string& raw) {
  const std::string text = trim(raw);
  size_t i = 0;
  bool neg = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) neg = text[i++] == '-';
  const size_t digits_start = i;
  int64_t whole = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    whole = whole * 10 + (text[i++] - '0');
    if (whole > 1'000'000'000'000'000LL) throw ConfigError("duration out of range: '" + raw + "'");
  }
  int64_t frac_nanos = 0;
  int frac_digits = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      if (frac_digits >= 9) throw ConfigError("duration has more than nine fractional digits: '" + raw + "'");
      frac_nanos = frac_nanos * 10 + (text[i++] - '0');
      ++frac_digits;
    }
  }
  if (i == digits_start) throw ConfigError("not a duration: '" + raw + "'");
  for (int d = frac_digits; d < 9; ++d) frac_nanos *= 10;
  const std::string unit = text.substr(i);
  int64_t scale_down = 1;  // value is (whole.frac) * unit; work in nanoseconds of the base unit
  if (unit.empty() || unit == "s") scale_down = 1;
  else if (unit == "ms") scale_down = 1000;
  else if (unit == "us") scale_down = 1000000;
  else if (unit == "ns") scale_down = 1000000000;
  else throw ConfigError("unknown duration unit in '" + raw + "'");
  // value in units of 1e-9 base units, converted exactly to 2^-64 s.
  const int128 base_nanos = static_cast<int128>(whole) * 1'000'000'000 + frac_nanos;
  if (base_nanos > static_cast<int128>(1'000'000'000'000'000'000LL) * scale_down) {
    throw ConfigError("duration out of range: '" + raw + "'");
  }
  if (base_nanos % scale_down == 0) {
    const auto ns = static_cast<int64_t>(base_nanos / scale_down);
    return SignedDuration::from_nanos(neg ? -ns : ns);
  }
  const int128 units = (base_nanos << 64) / (static_cast<int128>(1'000'000'000) * scale_down);
  return SignedDuration::from_units(neg ? -units : units);
}

void RunConfig::validate() const {
  if (oscillators.empty()) throw ConfigError("at least one [oscillator.<label>] section is required");
  for (const auto& o : oscillators) {
    try {
      o.validate();
    } catch (const Error& e) {
      throw ConfigError("oscillator." + o.label + ": " + e.what());
    }
  }
  if (!(gate_k > 0)) throw ConfigError("ensemble.gate_k must be > 0");
  if (!(init_sigma_bias_s > 0 && init_sigma_drift > 0)) throw ConfigError("ensemble initial sigmas must be > 0");
  if (!(rt_radius_max_s > 0)) throw ConfigError("detector.rt_radius_max_s must be > 0");
  if (!(max_age_s > 0)) throw ConfigError("detector.max_age_s must be > 0");
  if (!(pairing_max_gap_s > 0)) throw ConfigError("detector.pairing_max_gap_s must be > 0");
  if (nts_lambda_s && !(*nts_lambda_s > 0)) throw ConfigError("detector.nts_lambda_s must be > 0");
  if (!(nts_auto_k > 0)) throw ConfigError("detector.nts_auto_k must be > 0");
  if (nts_min_samples < 2) throw ConfigError("detector.nts_min_samples must be >= 2");
  if (nts_calibration_samples < nts_min_samples) {
    throw ConfigError("detector.nts_calibration_samples must be >= nts_min_samples");
  }
  ll.validate();
  if (!(ll_target_fa > 0 && ll_target_fa < 1)) throw ConfigError("ll.target_fa must lie in (0, 1)");
  if (ll_calibration_epochs <= ll.m) throw ConfigError("ll.calibration_epochs must exceed ll.m");
  orchestrator.validate();
  if (rt_attempts < 1) throw ConfigError("roughtime.attempts must be >= 1");
  if (rt_timeout_ms < 1 || nts_timeout_ms < 1) throw ConfigError("timeouts must be >= 1 ms");
  if (nts_era < 0) throw ConfigError("nts.era must be >= 0");
  if (nts_fast_poll_every == 0) throw ConfigError("nts.fast_poll_every must be >= 1");
}

void RunConfig::apply_env() {
  if (const char* v = std::getenv("GTV_ROUGHTIME_SERVER")) rt_server = v;
  if (const char* v = std::getenv("GTV_ROUGHTIME_KEY")) rt_public_key = v;
  if (const char* v = std::getenv("GTV_NTS_SERVER")) nts_server = v;
  if (const char* v = std::getenv("GTV_NTS_CA_FILE")) nts_ca_file = v;
}

RunConfig parse_config(const std::string& ini_text) {
  RunConfig c;
  bool replaced = false;
  walk(read_ini(ini_text), [&](const std::string& section) -> Setter {
    if (section.rfind("oscillator.", 0) == 0) return oscillator_setter(c.oscillators, section.substr(11), replaced);
    if (section == "ensemble") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "ensemble.gate_k") c.gate_k = to_double(k, v);
        else if (k == "ensemble.init_sigma_bias_s") c.init_sigma_bias_s = to_double(k, v);
        else if (k == "ensemble.init_sigma_drift") c.init_sigma_drift = to_double(k, v);
        else throw ConfigError("unknown key " + k);
      };
    }
    if (section == "detector") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "detector.rt_radius_max_s") c.rt_radius_max_s = to_double(k, v);
        else if (k == "detector.max_age_s") c.max_age_s = to_double(k, v);
        else if (k == "detector.pairing_max_gap_s") c.pairing_max_gap_s = to_double(k, v);
        else if (k == "detector.nts_lambda_s") c.nts_lambda_s = v.empty() ? std::nullopt : std::optional(to_double(k, v));
        else if (k == "detector.nts_auto_k") c.nts_auto_k = to_double(k, v);
        else if (k == "detector.nts_min_samples") c.nts_min_samples = to_u64(k, v);
        else if (k == "detector.nts_calibration_samples") c.nts_calibration_samples = to_u64(k, v);
        else throw ConfigError("unknown key " + k);
      };
    }
    if (section == "ll") {
      return [&](const std::string& k, const std::string& v) {
        try {
          if (k == "ll.m") c.ll.m = to_u64(k, v);
          else if (k == "ll.alpha") c.ll.alpha = to_double(k, v);
          else if (k == "ll.lambda") c.ll.lambda = v.empty() ? std::nullopt : std::optional(to_double(k, v));
          else if (k == "ll.mode") c.ll.mode = detector::window_mode_from_string(v);
          else if (k == "ll.polarity") c.ll.polarity = detector::polarity_from_string(v);
          else if (k == "ll.mu0") c.ll.mu0 = to_double(k, v);
          else if (k == "ll.sigma0_sq") c.ll.sigma0_sq = to_double(k, v);
          else if (k == "ll.sigma2_floor") c.ll.sigma2_floor = to_double(k, v);
          else if (k == "ll.target_fa") c.ll_target_fa = to_double(k, v);
          else if (k == "ll.calibration_epochs") c.ll_calibration_epochs = to_u64(k, v);
          else if (k == "ll.calibration_seed") c.ll_calibration_seed = to_u64(k, v);
          else throw ConfigError("unknown key " + k);
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          throw ConfigError(k + ": " + e.what());
        }
      };
    }
    if (section == "orchestrator") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "orchestrator.ephemeris_validity_s") c.orchestrator.ephemeris_validity_s = to_double(k, v);
        else if (k == "orchestrator.auto_clear_k") c.orchestrator.auto_clear_k = to_int(k, v);
        else if (k == "orchestrator.unauthenticated_configured") c.orchestrator.unauthenticated_configured = to_bool(k, v);
        else throw ConfigError("unknown key " + k);
      };
    }
    if (section == "roughtime") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "roughtime.server") c.rt_server = v;
        else if (k == "roughtime.public_key") c.rt_public_key = v;
        else if (k == "roughtime.version") c.rt_version = v;
        else if (k == "roughtime.attempts") c.rt_attempts = to_int(k, v);
        else if (k == "roughtime.timeout_ms") c.rt_timeout_ms = to_int(k, v);
        else if (k == "roughtime.poll_every") c.rt_poll_every = to_u64(k, v);
        else throw ConfigError("unknown key " + k);
      };
    }
    if (section == "nts") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "nts.server") c.nts_server = v;
        else if (k == "nts.ca_file") c.nts_ca_file = v;
        else if (k == "nts.era") c.nts_era = to_int(k, v);
        else if (k == "nts.target_cookies") c.nts_target_cookies = to_u64(k, v);
        else if (k == "nts.timeout_ms") c.nts_timeout_ms = to_int(k, v);
        else if (k == "nts.poll_every") c.nts_poll_every = to_u64(k, v);
        else if (k == "nts.fast_poll_every") c.nts_fast_poll_every = to_u64(k, v);
        else if (k == "nts.fast_poll_window") c.nts_fast_poll_window = to_u64(k, v);
        else throw ConfigError("unknown key " + k);
      };
    }
    return {};
  });
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

void dump_config(std::ostream& out, const RunConfig& c) {
  out << "[ensemble]\n";
  out << "gate_k = " << fmt(c.gate_k) << "\n";
  out << "init_sigma_bias_s = " << fmt(c.init_sigma_bias_s) << "\n";
  out << "init_sigma_drift = " << fmt(c.init_sigma_drift) << "\n";
  dump_oscillators(out, c.oscillators);
  out << "\n[detector]\n";
  out << "rt_radius_max_s = " << fmt(c.rt_radius_max_s) << "\n";
  out << "max_age_s = " << fmt(c.max_age_s) << "\n";
  out << "pairing_max_gap_s = " << fmt(c.pairing_max_gap_s) << "\n";
  out << "; empty: calibrated from the provider's offset spread\n";
  out << "nts_lambda_s = " << (c.nts_lambda_s ? fmt(*c.nts_lambda_s) : "") << "\n";
  out << "nts_auto_k = " << fmt(c.nts_auto_k) << "\n";
  out << "nts_min_samples = " << c.nts_min_samples << "\n";
  out << "nts_calibration_samples = " << c.nts_calibration_samples << "\n";
  out << "\n[ll]\n";
  out << "m = " << c.ll.m << "\n";
  out << "alpha = " << fmt(c.ll.alpha) << "\n";
  out << "; empty: calibrated on a benign run to target_fa\n";
  out << "lambda = " << (c.ll.lambda ? fmt(*c.ll.lambda) : "") << "\n";
  out << "mode = " << detector::to_string(c.ll.mode) << "\n";
  out << "polarity = " << detector::to_string(c.ll.polarity) << "\n";
  out << "mu0 = " << fmt(c.ll.mu0) << "\n";
  out << "sigma0_sq = " << fmt(c.ll.sigma0_sq) << "\n";
  out << "sigma2_floor = " << fmt(c.ll.sigma2_floor) << "\n";
  out << "target_fa = " << fmt(c.ll_target_fa) << "\n";
  out << "calibration_epochs = " << c.ll_calibration_epochs << "\n";
  out << "calibration_seed = " << c.ll_calibration_seed << "\n";
  out << "\n[orchestrator]\n";
  out << "ephemeris_validity_s = " << fmt(c.orchestrator.ephemeris_validity_s) << "\n";
  out << "auto_clear_k = " << c.orchestrator.auto_clear_k << "\n";
  out << "unauthenticated_configured = " << (c.orchestrator.unauthenticated_configured ? "true" : "false") << "\n";
  out << "\n[roughtime]\n";
  out << "server = " << c.rt_server << "\n";
  out << "public_key = " << c.rt_public_key << "\n";
  out << "version = " << c.rt_version << "\n";
  out << "attempts = " << c.rt_attempts << "\n";
  out << "timeout_ms = " << c.rt_timeout_ms << "\n";
  out << "poll_every = " << c.rt_poll_every << "\n";
  out << "\n[nts]\n";
  out << "server = " << c.nts_server << "\n";
  out << "ca_file = " << c.nts_ca_file << "\n";
  out << "era = " << c.nts_era << "\n";
  out << "target_cookies = " << c.nts_target_cookies << "\n";
  out << "timeout_ms = " << c.nts_timeout_ms << "\n";
  out << "poll_every = " << c.nts_poll_every << "\n";
  out << "fast_poll_every = " << c.nts_fast_poll_every << "\n";
  out << "fast_poll_window = " << c.nts_fast_poll_window << "\n";
}

std::string config_hash(const RunConfig& cfg, const sim::ScenarioSpec* scenario) {
  std::ostringstream s;
  dump_config(s, cfg);
  if (scenario != nullptr) {
    s << "\n";
    dump_scenario(s, *scenario);
  }
  const auto d = crypto::sha512(as_bytes(s.str()));
  return to_hex(ByteView(d.data(), 16));
}

// ---- scenarios -----------------------------------------------------------------

sim::ScenarioSpec parse_scenario(const std::string& ini_text) {
  sim::ScenarioSpec spec;
  bool replaced = false;
  std::map<std::string, std::string> attack, network;
  walk(read_ini(ini_text), [&](const std::string& section) -> Setter {
    if (section.rfind("oscillator.", 0) == 0) return oscillator_setter(spec.oscillators, section.substr(11), replaced);
    if (section == "scenario") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "scenario.id") spec.id = v;
        else if (k == "scenario.duration_epochs") spec.duration_epochs = to_u64(k, v);
        else if (k == "scenario.epoch_period_s") spec.epoch_period_s = to_double(k, v);
        else if (k == "scenario.benign_jitter_sigma") spec.benign_jitter_sigma = parse_seconds(v);
        else if (k == "scenario.seed") spec.seed = to_u64(k, v);
        else if (k == "scenario.start") spec.start = Timestamp::parse(v);
        else throw ConfigError("unknown key " + k);
      };
    }
    if (section == "attack") return [&](const std::string& k, const std::string& v) { attack[k.substr(7)] = v; };
    if (section == "network") return [&](const std::string& k, const std::string& v) { network[k.substr(8)] = v; };
    if (section == "providers") {
      return [&](const std::string& k, const std::string& v) {
        if (k == "providers.delay_min") spec.delay_min_s = parse_seconds(v);
        else if (k == "providers.delay_max") spec.delay_max_s = parse_seconds(v);
        else if (k == "providers.nts_offset_sigma") spec.nts_offset_sigma_s = parse_seconds(v);
        else if (k == "providers.nts_calibration_sigma") spec.nts_calibration_sigma_s = parse_seconds(v);
        else if (k == "providers.rt_radius") spec.rt_radius_s = parse_seconds(v);
        else if (k == "providers.rt_poll_every") spec.rt_poll_every = v.empty() ? std::nullopt : std::optional(to_u64(k, v));
        else if (k == "providers.nts_poll_every") spec.nts_poll_every = v.empty() ? std::nullopt : std::optional(to_u64(k, v));
        else throw ConfigError("unknown key " + k);
      };
    }
    return {};
  });

  auto take = [](std::map<std::string, std::string>& m, const std::string& key, const std::string& section,
                 const std::string& def = "") {
    const auto it = m.find(key);
    if (it == m.end()) {
      if (def.empty()) throw ConfigError(section + "." + key + " is required");
      return def;
    }
    std::string v = it->second;
    m.erase(it);
    return v;
  };
  const std::string type = attack.empty() ? "none" : take(attack, "type", "attack", "none");
  if (type == "none") {
    spec.attack = sim::NoAttack{};
  } else if (type == "step") {
    spec.attack = sim::StepAttack{parse_duration(take(attack, "offset", "attack")),
                                  to_u64("attack.onset", take(attack, "onset", "attack"))};
  } else if (type == "incremental") {
    sim::IncrementalAttack a;
    a.delta = parse_duration(take(attack, "delta", "attack"));
    a.every_k = to_u64("attack.every_k", take(attack, "every_k", "attack", "30"));
    a.onset = to_u64("attack.onset", take(attack, "onset", "attack"));
    spec.attack = a;
  } else if (type == "smooth_pull") {
    sim::SmoothPull a;
    a.total = parse_duration(take(attack, "total", "attack"));
    a.span = to_u64("attack.span", take(attack, "span", "attack"));
    a.onset = to_u64("attack.onset", take(attack, "onset", "attack"));
    a.profile = sim::ramp_profile_from_string(take(attack, "profile", "attack", "raised-cosine"));
    spec.attack = a;
  } else if (type == "meacon_delay") {
    spec.attack = sim::MeaconDelay{parse_duration(take(attack, "d", "attack")),
                                   to_u64("attack.onset", take(attack, "onset", "attack", "0"))};
  } else {
    throw ConfigError("unknown attack.type '" + type + "'");
  }
  if (!attack.empty()) throw ConfigError("unknown key attack." + attack.begin()->first);

  const std::string ntype = network.empty() ? "always_on" : take(network, "type", "network", "always_on");
  if (ntype == "always_on") {
    spec.network = sim::AlwaysOn{};
  } else if (ntype == "down") {
    spec.network = sim::NetworkDown{to_u64("network.t1", take(network, "t1", "network")),
                                    to_u64("network.t2", take(network, "t2", "network"))};
  } else if (ntype == "provider_compromise") {
    spec.network = sim::ProviderCompromise{parse_duration(take(network, "bias", "network")),
                                           to_u64("network.onset", take(network, "onset", "network", "0"))};
  } else {
    throw ConfigError("unknown network.type '" + ntype + "'");
  }
  if (!network.empty()) throw ConfigError("unknown key network." + network.begin()->first);

  spec.validate();
  return spec;
}

sim::ScenarioSpec load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

void dump_scenario(std::ostream& out, const sim::ScenarioSpec& s) {
  out << "[scenario]\n";
  out << "id = " << s.id << "\n";
  out << "duration_epochs = " << s.duration_epochs << "\n";
  out << "epoch_period_s = " << fmt(s.epoch_period_s) << "\n";
  out << "benign_jitter_sigma = " << fmt_seconds(s.benign_jitter_sigma) << "\n";
  out << "seed = " << s.seed << "\n";
  out << "start = " << s.start.to_string() << "\n";
  out << "\n[attack]\n";
  out << "type = " << sim::attack_name(s.attack) << "\n";
  if (const auto* a = std::get_if<sim::StepAttack>(&s.attack)) {
    out << "offset = " << fmt_duration(a->offset) << "\nonset = " << a->onset << "\n";
  } else if (const auto* a = std::get_if<sim::IncrementalAttack>(&s.attack)) {
    out << "delta = " << fmt_duration(a->delta) << "\nevery_k = " << a->every_k << "\nonset = " << a->onset << "\n";
  } else if (const auto* a = std::get_if<sim::SmoothPull>(&s.attack)) {
    out << "total = " << fmt_duration(a->total) << "\nspan = " << a->span << "\nonset = " << a->onset
        << "\nprofile = " << sim::to_string(a->profile) << "\n";
  } else if (const auto* a = std::get_if<sim::MeaconDelay>(&s.attack)) {
    out << "d = " << fmt_duration(a->d) << "\nonset = " << a->onset << "\n";
  }
  out << "\n[network]\n";
  out << "type = " << sim::network_name(s.network) << "\n";
  if (const auto* n = std::get_if<sim::NetworkDown>(&s.network)) {
    out << "t1 = " << n->t1 << "\nt2 = " << n->t2 << "\n";
  } else if (const auto* n = std::get_if<sim::ProviderCompromise>(&s.network)) {
    out << "bias = " << fmt_duration(n->bias) << "\nonset = " << n->onset << "\n";
  }
  out << "\n[providers]\n";
  auto dur = [](double sec) { return fmt_seconds(sec); };
  out << "delay_min = " << dur(s.delay_min_s) << "\n";
  out << "delay_max = " << dur(s.delay_max_s) << "\n";
  out << "nts_offset_sigma = " << dur(s.nts_offset_sigma_s) << "\n";
  out << "nts_calibration_sigma = " << dur(s.nts_calibration_sigma_s) << "\n";
  out << "rt_radius = " << dur(s.rt_radius_s) << "\n";
  out << "rt_poll_every = " << opt_str(s.rt_poll_every) << "\n";
  out << "nts_poll_every = " << opt_str(s.nts_poll_every) << "\n";
  dump_oscillators(out, s.oscillators);
}

std::optional<sim::ScenarioSpec> builtin_scenario(const std::string& name) {
  sim::ScenarioSpec s;
  s.id = name;
  if (name == "step4s") {
    s.duration_epochs = 1000;
    s.seed = 4;
    s.attack = sim::StepAttack{SignedDuration::from_seconds(4), 100};
    s.rt_poll_every = 10;
  } else if (name == "incr2us") {
    s.duration_epochs = 3000;
    s.seed = 2;
    s.attack = sim::IncrementalAttack{SignedDuration::from_micros(2), 30, 100};
  } else if (name == "pull2us") {
    s.duration_epochs = 1500;
    s.seed = 3;
    s.attack = sim::SmoothPull{SignedDuration::from_micros(2), 600, 300, sim::RampProfile::RaisedCosine};
  } else if (name == "benign10k") {
    s.duration_epochs = 10000;
    s.seed = 10;
    s.rt_poll_every = 10;
  } else if (name == "holdover") {
    s.duration_epochs = 2000;
    s.seed = 5;
    s.network = sim::NetworkDown{500, 800};
  } else if (name == "compromise") {
    s.duration_epochs = 1200;
    s.seed = 6;
    s.network = sim::ProviderCompromise{SignedDuration::from_micros(1000), 600};
  } else {
    return std::nullopt;
  }
  return s;
}

std::vector<std::string> builtin_scenario_names() {
  return {"step4s", "incr2us", "pull2us", "benign10k", "holdover", "compromise"};
}

sim::ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  if (auto s = builtin_scenario(name_or_path)) return *s;
  return load_scenario(name_or_path);
}

}  // namespace gtv::config
