#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "gtv/attack_sim.hpp"
#include "gtv/ensemble.hpp"
#include "gtv/rng.hpp"

using namespace gtv;
using namespace gtv::ensemble;

namespace {

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0 : std::abs(a - b) / scale;
}

// Second, scalar implementation of the same filter (predict, 3-sigma gate, Joseph update).
struct ReferenceFilter {
  double b, d, pbb, pbd, pdd;
  double qb, qd;

  void predict(double t) {
    b += d * t;
    const double nbb = pbb + 2 * t * pbd + t * t * pdd + qb * t + qd * t * t * t / 3;
    const double nbd = pbd + t * pdd + qd * t * t / 2;
    const double ndd = pdd + qd * t;
    pbb = nbb;
    pbd = nbd;
    pdd = ndd;
  }

  bool update(double z, double r, double gate) {
    const double nu = z - b;
    const double s = pbb + r;
    if (std::abs(nu) > gate * std::sqrt(s)) return false;
    const double kb = pbb / s, kd = pbd / s;
    b += kb * nu;
    d += kd * nu;
    // (I - K H) P (I - K H)^T + K R K^T with H = [1 0]
    const double a11 = 1 - kb, a21 = -kd;
    const double m11 = a11 * pbb, m12 = a11 * pbd;
    const double m21 = a21 * pbb + pbd, m22 = a21 * pbd + pdd;
    const double nbb = m11 * a11 + kb * r * kb;
    const double nbd = m11 * a21 + m12 + kb * r * kd;
    const double ndd = m21 * a21 + m22 + kd * r * kd;
    pbb = nbb;
    pbd = nbd;
    pdd = ndd;
    return true;
  }
};

// Simpson's rule, exact for the cubic integrands of Q(tau).
Eigen::Matrix2d quadrature_q(double qb, double qd, double tau) {
  const int n = 64;
  const double h = tau / n;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (int i = 0; i <= n; ++i) {
    const double s = i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    Eigen::Matrix2d phi;
    phi << 1, s, 0, 1;
    Eigen::Matrix2d qc;
    qc << qb, 0, 0, qd;
    acc += w * phi * qc * phi.transpose();
  }
  return acc * h / 3;
}

}  // namespace

TEST(Predict, ZeroTauIsIdentity) {
  const auto s = make_state(1e-21, 1e-24, 3e-7, 1e-14, 2e-10, 1e-20);
  const auto p = kf_predict(s, 0);
  EXPECT_EQ(p.x, s.x);
  EXPECT_EQ(p.P, s.P);
}

TEST(Predict, BiasIntegratesDrift) {
  const auto s = make_state(0, 0, 0, 0, 1e-9, 0);
  EXPECT_DOUBLE_EQ(kf_predict(s, 10).x(0), 1e-8);
}

TEST(Predict, NegativeTauIsDomainError) {
  EXPECT_THROW(kf_predict(make_state(0, 0, 0, 1, 0, 1), -1), DomainError);
}

TEST(Predict, ProcessNoiseMatchesQuadrature) {
  for (const double tau : {0.1, 1.0, 7.5, 60.0}) {
    const auto q = process_noise(1e-21, 1e-23, tau);
    const auto ref = quadrature_q(1e-21, 1e-23, tau);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) EXPECT_LT(rel_err(q(i, j), ref(i, j)), 1e-12) << tau << " " << i << j;
    }
  }
}

TEST(Update, PredictedMeasurementIsAcceptedWithZeroInnovation) {
  const auto s = make_state(1e-21, 1e-24, 5e-8, 1e-14, 0, 1e-20);
  const auto r = kf_update(s, 5e-8, 1e-16, 3);
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.innovation(0), 0);
  EXPECT_LT(r.state.P(0, 0), s.P(0, 0));
}

TEST(Update, TenSigmaRejectedStateUnchanged) {
  const auto s = make_state(1e-21, 1e-24, 0, 1e-16, 0, 1e-20);
  const double sd = std::sqrt(1e-16 + 1e-16);
  const auto r = kf_update(s, 10 * sd, 1e-16, 3);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.state.x, s.x);
  EXPECT_EQ(r.state.P, s.P);
}

TEST(Update, FourSigmaRejectedAtGateThree) {
  const auto s = make_state(1e-21, 1e-24, 0, 1e-16, 0, 1e-20);
  const double sd = std::sqrt(2e-16);
  EXPECT_FALSE(kf_update(s, 4 * sd, 1e-16, 3).accepted);
  EXPECT_FALSE(kf_update(s, -4 * sd, 1e-16, 3).accepted);
  EXPECT_TRUE(kf_update(s, 2.9 * sd, 1e-16, 3).accepted);
}

TEST(Update, NonFiniteMeasurementIsInputError) {
  const auto s = make_state(0, 0, 0, 1, 0, 1);
  EXPECT_THROW(kf_update(s, std::nan(""), 1, 3), InputError);
  EXPECT_THROW(kf_update(s, INFINITY, 1, 3), InputError);
}

TEST(Update, TwoStateMeasurement) {
  const auto s = make_state(1e-21, 1e-24, 0, 1e-16, 0, 1e-20);
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * 1e-16;
  R(1, 1) = 1e-20;
  const auto r = kf_update(s, Eigen::Vector2d(1e-8, 1e-10), R, 3);
  EXPECT_TRUE(r.accepted);
  EXPECT_NEAR(r.state.x(0), 0.5e-8, 1e-20);
  EXPECT_NEAR(r.state.x(1), 0.5e-10, 1e-22);
}

TEST(Update, MatchesIndependentReferenceFilter) {
  const double qb = 1e-21, qd = 1e-23, sigma = 10e-9;
  sim::CounterRng g(51);
  auto s = make_state(qb, qd, 0, 1e-12, 0, 1e-18);
  ReferenceFilter ref{0, 0, 1e-12, 0, 1e-18, qb, qd};
  double truth = 0;
  for (int k = 0; k < 100; ++k) {
    truth += 2e-11 + g.gaussian(0, 3e-11);
    const double z = truth + g.gaussian(0, sigma);
    s = kf_predict(s, 1.0);
    ref.predict(1.0);
    const auto r = kf_update(s, z, sigma * sigma, 3);
    ASSERT_EQ(r.accepted, ref.update(z, sigma * sigma, 3)) << k;
    s = r.state;
  }
  EXPECT_LT(rel_err(s.x(0), ref.b), 1e-12);
  EXPECT_LT(rel_err(s.x(1), ref.d), 1e-12);
  EXPECT_LT(rel_err(s.P(0, 0), ref.pbb), 1e-12);
  EXPECT_LT(rel_err(s.P(0, 1), ref.pbd), 1e-12);
  EXPECT_LT(rel_err(s.P(1, 1), ref.pdd), 1e-12);
}

TEST(KfProperty, CovarianceStaysSymmetricPsd) {
  sim::CounterRng g(52);
  for (int run = 0; run < 200; ++run) {
    const double qb = std::pow(10, g.uniform(-24, -18)), qd = std::pow(10, g.uniform(-28, -20));
    auto s = make_state(qb, qd, 0, std::pow(10, g.uniform(-16, -10)), 0, std::pow(10, g.uniform(-22, -16)));
    for (int k = 0; k < 200; ++k) {
      s = kf_predict(s, g.uniform(0, 100));
      if (g.uniform() < 0.8) {
        s = kf_update(s, g.gaussian(0, 1e-7), std::pow(10, g.uniform(-18, -12)), 3).state;
      }
      ASSERT_TRUE(is_symmetric_psd(s.P)) << run << " " << k;
    }
  }
}

TEST(KfProperty, GatingMonotoneInK) {
  sim::CounterRng g(53);
  for (int i = 0; i < 10000; ++i) {
    const auto s = make_state(0, 0, 0, g.uniform(1e-18, 1e-14), 0, 1e-20);
    const double z = g.gaussian(0, 3e-7);
    const double k = g.uniform(0.5, 5);
    if (kf_update(s, z, 1e-16, k).accepted) {
      ASSERT_TRUE(kf_update(s, z, 1e-16, k + g.uniform(0, 5)).accepted);
    }
  }
}

TEST(KfProperty, ZeroProcessNoiseConvergesLikeROverN) {
  const double r = 1e-16;
  auto s = make_state(0, 0, 0, 1e6 * r, 0, 0);
  double prev = s.P(0, 0);
  for (int n = 1; n <= 500; ++n) {
    s = kf_update(kf_predict(s, 1), 0, r, 3).state;
    ASSERT_LE(s.P(0, 0), prev);
    prev = s.P(0, 0);
  }
  EXPECT_NEAR(s.P(0, 0) / (r / 500), 1.0, 0.01);
}

// Mean NEES over 100 independent runs against chi-square(200)/100.
TEST(KfProperty, NeesConsistency) {
  const OscillatorSpec spec;  // OCXO defaults
  const int runs = 100, steps = 1000;
  const double r = spec.sigma_meas * spec.sigma_meas;
  double nees_sum = 0;
  for (int run = 0; run < runs; ++run) {
    const auto truth = sim::simulate_oscillator_states(spec, steps, 1.0, 1000 + run);
    sim::CounterRng meas(2000 + run);
    auto s = make_state(spec.q_b, spec.q_d, 0, 0, 0, 0);
    for (int k = 1; k < steps; ++k) {
      s = kf_predict(s, 1.0);
      s = kf_update(s, truth.bias[k] + meas.gaussian(0, spec.sigma_meas), r, 1e9).state;
    }
    const Eigen::Vector2d e(truth.bias[steps - 1] - s.x(0), truth.drift[steps - 1] - s.x(1));
    nees_sum += e.dot(s.P.inverse() * e);
  }
  const boost::math::chi_squared chi(2 * runs);
  const double lo = boost::math::quantile(chi, 0.025) / runs;
  const double hi = boost::math::quantile(chi, 0.975) / runs;
  const double mean = nees_sum / runs;
  EXPECT_GE(mean, lo);
  EXPECT_LE(mean, hi);
}

TEST(Combine, SingleReading) {
  const auto r = ensemble_combine({{3e-9, 4e-18}});
  EXPECT_EQ(r.bias, 3e-9);
  EXPECT_EQ(r.variance, 4e-18);
}

TEST(Combine, TwoEqualVariances) {
  const auto r = ensemble_combine({{0, 1}, {2, 1}});
  EXPECT_DOUBLE_EQ(r.bias, 1);
  EXPECT_DOUBLE_EQ(r.variance, 0.5);
}

TEST(Combine, ThreeRandomMatchesDirectFormula) {
  sim::CounterRng g(54);
  for (int i = 0; i < 100; ++i) {
    std::vector<Reading> v;
    for (int j = 0; j < 3; ++j) v.push_back({g.gaussian(0, 1e-8), g.uniform(1e-18, 1e-16)});
    const double w0 = 1 / v[0].variance, w1 = 1 / v[1].variance, w2 = 1 / v[2].variance;
    const double bias = (w0 * v[0].bias + w1 * v[1].bias + w2 * v[2].bias) / (w0 + w1 + w2);
    const auto r = ensemble_combine(v);
    EXPECT_LT(rel_err(r.bias, bias), 1e-12);
    EXPECT_LT(rel_err(r.variance, 1 / (w0 + w1 + w2)), 1e-12);
    for (const auto& x : v) EXPECT_LE(r.variance, x.variance);
  }
}

TEST(Combine, EmptyAndZeroVariance) {
  EXPECT_THROW(ensemble_combine({}), InputError);
  const auto r = ensemble_combine({{5, 0}, {100, 1}});
  EXPECT_EQ(r.bias, 5);
  EXPECT_EQ(r.variance, 0);
}

TEST(OscillatorSpecCheck, NegativeRejected) {
  OscillatorSpec s;
  s.q_b = -1;
  EXPECT_THROW(s.validate(), InputError);
}

TEST(Adev, ConstantSeriesIsZero) {
  const std::vector<double> phase(1000, 3.5e-6);
  for (const auto& p : allan_deviation(phase, 1.0, {1, 10, 100})) EXPECT_EQ(p.adev, 0);
}

TEST(Adev, WhiteFmSlopeMinusHalf) {
  sim::CounterRng g(55);
  std::vector<double> phase(100000);
  for (size_t i = 1; i < phase.size(); ++i) phase[i] = phase[i - 1] + g.gaussian(0, 1e-11);
  const auto curve = allan_deviation(phase, 1.0, {1, 2, 4, 8, 16, 32, 64, 128});
  EXPECT_NEAR(loglog_slope(curve), -0.5, 0.05);
}

TEST(Adev, RandomWalkFmSlopePlusHalf) {
  sim::CounterRng g(56);
  std::vector<double> phase(100000);
  double y = 0;
  for (size_t i = 1; i < phase.size(); ++i) {
    y += g.gaussian(0, 1e-12);
    phase[i] = phase[i - 1] + y;
  }
  const auto curve = allan_deviation(phase, 1.0, {16, 32, 64, 128, 256, 512});
  EXPECT_NEAR(loglog_slope(curve), 0.5, 0.05);
}

TEST(Adev, InsufficientData) {
  const std::vector<double> phase(20, 0);
  EXPECT_THROW(allan_deviation(phase, 1.0, {10}), CalibrationError);
  EXPECT_THROW(allan_deviation(phase, 1.0, {1.5}), InputError);
}

TEST(Adev, SimulatedOscillatorMatchesModel) {
  OscillatorSpec spec;
  spec.q_b = 1e-21;
  spec.q_d = 1e-23;
  const auto phase = sim::simulate_oscillator(spec, 200000, 1.0, 57);
  for (const auto& p : allan_deviation(phase, 1.0, {1, 10, 100, 1000})) {
    const double model = model_adev(spec.q_b, spec.q_d, p.tau);
    EXPECT_NEAR(p.adev / model, 1.0, 0.15) << "tau " << p.tau;
  }
}
