#include "gtv/attack_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gtv/rng.hpp"

namespace gtv::sim {

namespace {

// Substream ids; fixed so that adding a consumer never shifts another's draws.
constexpr uint64_t kJitterStream = 1;
constexpr uint64_t kProviderStream = 2;
constexpr uint64_t kOscillatorStream = 100;

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& f : v) s += (s.empty() ? "" : ", ") + f;
  return s;
}

SignedDuration scale(SignedDuration d, double w) {
  return SignedDuration::from_units(static_cast<int128>(static_cast<long double>(d.units()) * w));
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> fields)
    : Error(ErrorClass::Validation, "invalid scenario fields: " + join(fields)), fields_(std::move(fields)) {}

const char* attack_name(const Attack& a) {
  static constexpr const char* names[] = {"none", "step", "incremental", "smooth_pull", "meacon_delay"};
  return names[a.index()];
}

const char* network_name(const Network& n) {
  static constexpr const char* names[] = {"always_on", "down", "provider_compromise"};
  return names[n.index()];
}

const char* to_string(RampProfile p) { return p == RampProfile::Linear ? "linear" : "raised-cosine"; }

RampProfile ramp_profile_from_string(const std::string& s) {
  if (s == "raised-cosine") return RampProfile::RaisedCosine;
  if (s == "linear") return RampProfile::Linear;
  throw ScenarioError({"attack.profile"});
}

std::optional<uint64_t> ScenarioSpec::onset() const {
  return std::visit(
      [](const auto& a) -> std::optional<uint64_t> {
        if constexpr (std::is_same_v<std::decay_t<decltype(a)>, NoAttack>) {
          return std::nullopt;
        } else {
          return a.onset;
        }
      },
      attack);
}

void ScenarioSpec::validate() const {
  std::vector<std::string> bad;
  if (id.empty()) bad.push_back("id");
  if (duration_epochs < 1) bad.push_back("duration_epochs");
  if (!(std::isfinite(epoch_period_s) && epoch_period_s > 0)) bad.push_back("epoch_period_s");
  if (!(std::isfinite(benign_jitter_sigma) && benign_jitter_sigma >= 0)) bad.push_back("benign_jitter_sigma");
  if (const auto o = onset(); o && *o >= duration_epochs) bad.push_back("attack.onset");
  if (const auto* inc = std::get_if<IncrementalAttack>(&attack); inc && inc->every_k < 1) {
    bad.push_back("attack.every_k");
  }
  if (const auto* sp = std::get_if<SmoothPull>(&attack); sp && sp->span < 1) bad.push_back("attack.span");
  if (const auto* dn = std::get_if<NetworkDown>(&network); dn && (dn->t1 > dn->t2 || dn->t1 >= duration_epochs)) {
    bad.push_back("network.t1/t2");
  }
  if (const auto* pc = std::get_if<ProviderCompromise>(&network); pc && pc->onset >= duration_epochs) {
    bad.push_back("network.onset");
  }
  if (oscillators.empty()) bad.push_back("oscillators");
  for (size_t i = 0; i < oscillators.size(); ++i) {
    try {
      oscillators[i].validate();
    } catch (const Error&) {
      bad.push_back("oscillator." + oscillators[i].label);
    }
  }
  if (!(delay_min_s >= 0 && delay_max_s >= delay_min_s && std::isfinite(delay_max_s))) {
    bad.push_back("delay_min_s/delay_max_s");
  }
  if (!(nts_offset_sigma_s >= 0 && std::isfinite(nts_offset_sigma_s))) bad.push_back("nts_offset_sigma_s");
  if (!(nts_calibration_sigma_s >= 0 && std::isfinite(nts_calibration_sigma_s))) {
    bad.push_back("nts_calibration_sigma_s");
  }
  if (!(rt_radius_s > 0 && std::isfinite(rt_radius_s))) bad.push_back("rt_radius_s");
  if (!bad.empty()) throw ScenarioError(bad);
}

double ramp(RampProfile p, double u) {
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  if (p == RampProfile::Linear) return u;
  return 0.5 * (1 - std::cos(std::numbers::pi * u));
}

SignedDuration attack_offset(const Attack& attack, uint64_t n) {
  if (const auto* s = std::get_if<StepAttack>(&attack)) {
    return n >= s->onset ? s->offset : SignedDuration{};
  }
  if (const auto* inc = std::get_if<IncrementalAttack>(&attack)) {
    if (n < inc->onset) return {};
    const uint64_t k = (n - inc->onset) / inc->every_k;
    return SignedDuration::from_units(inc->delta.units() * static_cast<int128>(k));
  }
  if (const auto* sp = std::get_if<SmoothPull>(&attack)) {
    if (n < sp->onset) return {};
    const double u = static_cast<double>(n - sp->onset) / static_cast<double>(sp->span);
    if (u >= 1) return sp->total;
    return scale(sp->total, ramp(sp->profile, u));
  }
  if (const auto* m = std::get_if<MeaconDelay>(&attack)) {
    return n >= m->onset ? m->d : SignedDuration{};
  }
  return {};
}

OscillatorTruth simulate_oscillator_states(const ensemble::OscillatorSpec& spec, uint64_t n, double period_s,
                                           uint64_t seed, double b0, double d0) {
  spec.validate();
  if (n < 1) throw InputError("simulate_oscillator needs n >= 1");
  const Eigen::Matrix2d F = ensemble::transition(period_s);
  const Eigen::Matrix2d Q = ensemble::process_noise(spec.q_b, spec.q_d, period_s);
  // Cholesky by hand so a singular Q (q_b = 0 or q_d = 0) stays well defined.
  const double l11 = std::sqrt(std::max(Q(0, 0), 0.0));
  const double l21 = l11 > 0 ? Q(1, 0) / l11 : 0.0;
  const double l22 = std::sqrt(std::max(Q(1, 1) - l21 * l21, 0.0));

  CounterRng rng(seed, kOscillatorStream);
  OscillatorTruth out;
  out.bias.resize(n);
  out.drift.resize(n);
  Eigen::Vector2d e = Eigen::Vector2d::Zero();
  for (uint64_t k = 0; k < n; ++k) {
    out.bias[k] = b0 + static_cast<double>(k) * period_s * d0 + e(0);
    out.drift[k] = d0 + e(1);
    const double g1 = rng.gaussian();
    const double g2 = rng.gaussian();
    e = F * e + Eigen::Vector2d(l11 * g1, l21 * g1 + l22 * g2);
  }
  return out;
}

std::vector<double> simulate_oscillator(const ensemble::OscillatorSpec& spec, uint64_t n, double period_s,
                                        uint64_t seed, double b0, double d0) {
  return simulate_oscillator_states(spec, n, period_s, seed, b0, d0).bias;
}

Timestamp SimOutputs::local_time(size_t oscillator, uint64_t n) const {
  return ts_add(true_time.at(n), SignedDuration::from_seconds_f(oscillator_bias.at(oscillator).at(n)));
}

SimOutputs gen_scenario(const ScenarioSpec& spec) {
  spec.validate();
  SimOutputs out;
  out.scenario_id = spec.id;
  out.seed = spec.seed;
  out.prng = kPrngAlgorithm;
  const uint64_t n = spec.duration_epochs;
  const auto period_ns = static_cast<int64_t>(std::llround(spec.epoch_period_s * 1e9));

  for (size_t i = 0; i < spec.oscillators.size(); ++i) {
    // Each oscillator draws from its own seed so its series does not depend on the others.
    out.oscillator_bias.push_back(
        simulate_oscillator(spec.oscillators[i], n, spec.epoch_period_s, splitmix64_mix(spec.seed + i)));
  }

  CounterRng jitter(spec.seed, kJitterStream);
  CounterRng prov(spec.seed, kProviderStream);
  out.epochs.reserve(n);
  for (uint64_t k = 0; k < n; ++k) {
    const Timestamp t_true =
        ts_add(spec.start, SignedDuration::from_nanos(static_cast<int64_t>(k) * period_ns));
    const SignedDuration offset = attack_offset(spec.attack, k);
    SignedDuration noise;
    if (spec.benign_jitter_sigma > 0) noise = SignedDuration::from_seconds_f(jitter.gaussian(0, spec.benign_jitter_sigma));

    EpochRecord rec;
    rec.t_mono = MonotonicInstant{spec.mono_start_ns + k * static_cast<uint64_t>(period_ns)};
    rec.t_gnss = ts_add(t_true, offset + noise);
    rec.fix_valid = true;
    rec.source_id = "sim";
    out.epochs.push_back(rec);
    out.true_time.push_back(t_true);
    out.ground_truth.push_back(offset);

    ProviderScript ps;
    if (const auto* dn = std::get_if<NetworkDown>(&spec.network)) ps.reachable = k < dn->t1 || k > dn->t2;
    if (const auto* pc = std::get_if<ProviderCompromise>(&spec.network); pc && k >= pc->onset) ps.nts_bias = pc->bias;
    ps.rt_delay_s = prov.uniform(spec.delay_min_s, spec.delay_max_s);
    ps.nts_delay_s = prov.uniform(spec.delay_min_s, spec.delay_max_s);
    const double asym = prov.gaussian(0, spec.nts_offset_sigma_s);
    // Neither leg may go negative.
    ps.nts_asymmetry_s = std::clamp(asym, -ps.nts_delay_s / 2, ps.nts_delay_s / 2);
    out.providers.push_back(ps);
  }
  return out;
}

namespace {

// Exact decimal nanoseconds of a duration, trailing zeros trimmed (sub-ns digits
// rounded to the nearest 1e-6 ns).
std::string decimal_nanos(SignedDuration d) {
  const bool neg = d.is_negative();
  const uint128 u = static_cast<uint128>(neg ? -d.units() : d.units());
  const uint128 scaled = u * 1'000'000'000u;
  uint128 whole = scaled >> 64;
  const uint128 rem = scaled & ~uint64_t{0};
  uint64_t micro = static_cast<uint64_t>(((rem * 1'000'000u) + (uint128{1} << 63)) >> 64);
  if (micro == 1'000'000) {
    micro = 0;
    ++whole;
  }
  std::string out = neg && (whole || micro) ? "-" : "";
  std::string digits;
  for (uint128 w = whole; w > 0; w /= 10) digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(w % 10)));
  out += digits.empty() ? "0" : digits;
  if (micro) {
    std::string frac = std::to_string(micro);
    frac.insert(frac.begin(), 6 - frac.size(), '0');
    while (frac.back() == '0') frac.pop_back();
    out += "." + frac;
  }
  return out;
}

}  // namespace

void write_ground_truth_csv(std::ostream& out, const SimOutputs& sim) {
  out << "# prng=" << sim.prng << " seed=" << sim.seed << " scenario=" << sim.scenario_id << "\n";
  out << "epoch,injected_offset_ns\n";
  for (size_t k = 0; k < sim.ground_truth.size(); ++k) out << k << ',' << decimal_nanos(sim.ground_truth[k]) << '\n';
}

void write_epochs_jsonl(std::ostream& out, const SimOutputs& sim) {
  for (const auto& e : sim.epochs) out << to_jsonl(e) << '\n';
}

}  // namespace gtv::sim
