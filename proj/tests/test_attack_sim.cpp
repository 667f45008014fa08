#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gtv/attack_sim.hpp"
#include "gtv/rng.hpp"

using namespace gtv;
using namespace gtv::sim;

namespace {

ScenarioSpec base(uint64_t n = 500) {
  ScenarioSpec s;
  s.id = "t";
  s.duration_epochs = n;
  s.seed = 9;
  return s;
}

std::string dump(const SimOutputs& o) {
  std::ostringstream s;
  write_epochs_jsonl(s, o);
  write_ground_truth_csv(s, o);
  for (const auto& osc : o.oscillator_bias) {
    for (double b : osc) s << std::hexfloat << b << '\n';
  }
  for (const auto& p : o.providers) {
    s << p.reachable << p.nts_bias.to_string() << std::hexfloat << p.rt_delay_s << p.nts_delay_s << p.nts_asymmetry_s
      << '\n';
  }
  return s.str();
}

}  // namespace

TEST(Rng, SplitmixKnownAnswer) {
  // First output of the reference SplitMix64 generator seeded with 0.
  EXPECT_EQ(splitmix64_mix(0x9e3779b97f4a7c15ULL), 0xe220a8397b1dcdafULL);
}

TEST(Rng, CounterFormula) {
  const uint64_t g = 0x9e3779b97f4a7c15ULL;
  const uint64_t seed = 1234, stream = 7;
  const uint64_t key = splitmix64_mix(seed ^ splitmix64_mix(stream + g));
  CounterRng r(seed, stream);
  for (uint64_t k = 0; k < 5; ++k) EXPECT_EQ(r.next_u64(), splitmix64_mix(key + (k + 1) * g));
  EXPECT_EQ(r.counter(), 5u);
}

TEST(Rng, UniformAndGaussianMoments) {
  CounterRng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const double x = r.gaussian();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0, 0.01);
  EXPECT_NEAR(s2 / n, 1, 0.01);
}

TEST(GenScenario, NoAttackNoJitterIsTrueTime) {
  auto spec = base();
  spec.benign_jitter_sigma = 0;
  const auto out = gen_scenario(spec);
  ASSERT_EQ(out.epochs.size(), 500u);
  for (size_t k = 0; k < out.epochs.size(); ++k) {
    ASSERT_EQ(out.epochs[k].t_gnss, out.true_time[k]);
    ASSERT_EQ(out.true_time[k], ts_add(spec.start, SignedDuration::from_seconds(static_cast<int64_t>(k))));
    ASSERT_EQ(out.epochs[k].t_mono.nanos, spec.mono_start_ns + k * 1'000'000'000ULL);
  }
}

TEST(GenScenario, StepProfile) {
  auto spec = base();
  spec.attack = StepAttack{SignedDuration::from_seconds(4), 100};
  const auto out = gen_scenario(spec);
  for (uint64_t k = 0; k < 500; ++k) {
    ASSERT_EQ(out.ground_truth[k], k < 100 ? SignedDuration{} : SignedDuration::from_seconds(4)) << k;
  }
}

TEST(GenScenario, IncrementalClosedForm) {
  auto spec = base(3000);
  spec.attack = IncrementalAttack{SignedDuration::from_micros(2), 30, 100};
  const auto out = gen_scenario(spec);
  for (uint64_t k = 0; k < 3000; ++k) {
    const int64_t steps = k < 100 ? 0 : static_cast<int64_t>((k - 100) / 30);
    ASSERT_EQ(out.ground_truth[k].to_nanos(), 2000 * steps) << k;
  }
}

TEST(GenScenario, MeaconConstantAfterOnset) {
  auto spec = base();
  spec.attack = MeaconDelay{SignedDuration::from_micros(300), 50};
  const auto out = gen_scenario(spec);
  EXPECT_EQ(out.ground_truth[49], SignedDuration{});
  EXPECT_EQ(out.ground_truth[50], SignedDuration::from_micros(300));
  EXPECT_EQ(out.ground_truth[499], SignedDuration::from_micros(300));
}

TEST(GenScenario, SmoothPullEndpoints) {
  auto spec = base(1500);
  spec.attack = SmoothPull{SignedDuration::from_micros(2), 600, 300, RampProfile::RaisedCosine};
  const auto out = gen_scenario(spec);
  EXPECT_EQ(out.ground_truth[300], SignedDuration{});
  EXPECT_NEAR(out.ground_truth[600].to_seconds(), 1e-6, 1e-15);
  EXPECT_EQ(out.ground_truth[900], SignedDuration::from_micros(2));
  EXPECT_EQ(out.ground_truth[1499], SignedDuration::from_micros(2));
}

TEST(GenScenario, ProviderCompromiseAndNetworkDown) {
  auto spec = base();
  spec.network = ProviderCompromise{SignedDuration::from_micros(1000), 200};
  auto out = gen_scenario(spec);
  EXPECT_EQ(out.providers[199].nts_bias, SignedDuration{});
  EXPECT_EQ(out.providers[200].nts_bias, SignedDuration::from_micros(1000));

  spec.network = NetworkDown{100, 200};
  out = gen_scenario(spec);
  EXPECT_TRUE(out.providers[99].reachable);
  EXPECT_FALSE(out.providers[100].reachable);
  EXPECT_FALSE(out.providers[200].reachable);
  EXPECT_TRUE(out.providers[201].reachable);
  for (const auto& p : out.providers) {
    ASSERT_GE(p.rt_delay_s, spec.delay_min_s);
    ASSERT_LE(p.rt_delay_s, spec.delay_max_s);
  }
}

TEST(GenScenario, ValidationListsFields) {
  auto spec = base(100);
  spec.attack = SmoothPull{SignedDuration::from_micros(2), 0, 100};
  spec.epoch_period_s = 0;
  try {
    gen_scenario(spec);
    FAIL();
  } catch (const ScenarioError& e) {
    const auto& f = e.fields();
    EXPECT_NE(std::find(f.begin(), f.end(), "attack.onset"), f.end());
    EXPECT_NE(std::find(f.begin(), f.end(), "attack.span"), f.end());
    EXPECT_NE(std::find(f.begin(), f.end(), "epoch_period_s"), f.end());
  }
}

TEST(GenScenario, DeterministicByteIdentical) {
  auto spec = base(800);
  spec.attack = IncrementalAttack{SignedDuration::from_micros(2), 30, 100};
  spec.oscillators.push_back(ensemble::OscillatorSpec{"rb", 1e-22, 1e-26, 5e-9});
  const auto a = dump(gen_scenario(spec));
  EXPECT_EQ(a, dump(gen_scenario(spec)));
  spec.seed = 10;
  EXPECT_NE(a, dump(gen_scenario(spec)));
}

TEST(GenScenario, GroundTruthCsv) {
  auto spec = base(3);
  spec.attack = StepAttack{SignedDuration::from_nanos(1500), 1};
  std::ostringstream s;
  write_ground_truth_csv(s, gen_scenario(spec));
  EXPECT_EQ(s.str(), "# prng=splitmix64-ctr-v1 seed=9 scenario=t\nepoch,injected_offset_ns\n0,0\n1,1500\n2,1500\n");
}

// After removing truth and the injected profile only N(0, sigma) remains.
TEST(GenScenarioProperty, ResidualIsGaussianWithConfiguredSigma) {
  auto spec = base(10000);
  spec.attack = SmoothPull{SignedDuration::from_micros(2), 600, 3000};
  const auto out = gen_scenario(spec);
  const double sigma = spec.benign_jitter_sigma;
  std::vector<double> r;
  for (size_t k = 0; k < out.epochs.size(); ++k) {
    r.push_back((ts_diff(out.epochs[k].t_gnss, out.true_time[k]) - out.ground_truth[k]).to_seconds() / sigma);
  }
  const auto n = static_cast<double>(r.size());

  // Variance: (n - 1) s^2 / sigma^2 against chi-square(n - 1), two-sided 5%.
  double mean = 0;
  for (double x : r) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : r) ss += (x - mean) * (x - mean);
  const boost::math::chi_squared var_dist(n - 1);
  EXPECT_GT(ss, boost::math::quantile(var_dist, 0.025));
  EXPECT_LT(ss, boost::math::quantile(var_dist, 0.975));

  // Normality: chi-square goodness of fit over 20 equiprobable bins.
  const int bins = 20;
  const boost::math::normal std_normal;
  std::vector<double> edges;
  for (int i = 1; i < bins; ++i) edges.push_back(boost::math::quantile(std_normal, static_cast<double>(i) / bins));
  std::vector<int> counts(bins, 0);
  for (double x : r) counts[std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()]++;
  double chi = 0;
  const double expect = n / bins;
  for (int c : counts) chi += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi, boost::math::quantile(boost::math::chi_squared(bins - 1), 0.95));
}

TEST(GenScenarioProperty, SmoothPullContinuity) {
  for (const auto profile : {RampProfile::RaisedCosine, RampProfile::Linear}) {
    auto spec = base(2000);
    const double total = 2e-6;
    const uint64_t span = 600;
    spec.attack = SmoothPull{SignedDuration::from_seconds_f(total), span, 400, profile};
    const auto out = gen_scenario(spec);
    const double max_slope = profile == RampProfile::RaisedCosine ? std::numbers::pi / 2 : 1.0;
    const double bound = total * max_slope * spec.epoch_period_s / static_cast<double>(span) +
                         6 * spec.benign_jitter_sigma;
    for (size_t k = 1; k < out.epochs.size(); ++k) {
      const double jump = ts_diff(out.epochs[k].t_gnss, out.true_time[k]).to_seconds() -
                          ts_diff(out.epochs[k - 1].t_gnss, out.true_time[k - 1]).to_seconds();
      ASSERT_LE(std::abs(jump), bound) << k;
    }
  }
}

TEST(Ramp, Shape) {
  EXPECT_EQ(ramp(RampProfile::RaisedCosine, -1), 0);
  EXPECT_EQ(ramp(RampProfile::RaisedCosine, 2), 1);
  EXPECT_NEAR(ramp(RampProfile::RaisedCosine, 0.5), 0.5, 1e-15);
  EXPECT_EQ(ramp(RampProfile::Linear, 0.25), 0.25);
}

TEST(Oscillator, NoiselessIntegration) {
  ensemble::OscillatorSpec spec{"x", 0, 0, 0};
  const auto b = simulate_oscillator(spec, 100, 2.0, 1, 1e-6, 1e-9);
  for (size_t k = 0; k < b.size(); ++k) ASSERT_EQ(b[k], 1e-6 + static_cast<double>(k) * 2.0 * 1e-9);
}

TEST(Oscillator, SameSeedSameSeries) {
  const ensemble::OscillatorSpec spec;
  EXPECT_EQ(simulate_oscillator(spec, 1000, 1.0, 5), simulate_oscillator(spec, 1000, 1.0, 5));
  EXPECT_NE(simulate_oscillator(spec, 1000, 1.0, 5), simulate_oscillator(spec, 1000, 1.0, 6));
  EXPECT_EQ(simulate_oscillator(spec, 1000, 1.0, 5), simulate_oscillator_states(spec, 1000, 1.0, 5).bias);
}

TEST(Oscillator, ZeroEpochsRejected) {
  EXPECT_THROW(simulate_oscillator({}, 0, 1.0, 1), InputError);
}

TEST(GenScenario, GroundTruthCsvFractionalAndNegative) {
  auto spec = base(700);
  spec.attack = SmoothPull{SignedDuration::from_seconds_f(-2e-6), 600, 10};
  const auto out = gen_scenario(spec);
  std::ostringstream s;
  write_ground_truth_csv(s, out);
  std::istringstream in(s.str());
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  for (size_t k = 0; std::getline(in, line); ++k) {
    const double ns = std::stod(line.substr(line.find(',') + 1));
    ASSERT_NEAR(ns, out.ground_truth[k].to_seconds() * 1e9, 1e-6) << line;
  }
}
