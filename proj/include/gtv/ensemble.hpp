#pragma once

// Two-state clock model (bias, drift) tracking the offset between the GNSS
// time solution and the local oscillator ensemble, with innovation gating,
// inverse-variance combination of oscillators and Allan deviation.

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

#include "gtv/error.hpp"
#include "gtv/timebase.hpp"

namespace gtv::ensemble {

struct OscillatorSpec {
  std::string label = "ocxo";
  double q_b = 1e-21;        // white FM, s^2/s
  double q_d = 1e-24;        // random-walk FM, (s/s)^2/s
  double sigma_meas = 10e-9;  // s

  /// Throws InputError when any parameter is negative or non-finite.
  void validate() const;
};

struct ClockKfState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();  // [bias s, drift s/s]
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  double q_b = 0;
  double q_d = 0;
  MonotonicInstant last_update;
};

/// Filter initialised at bias b0 / drift d0 with diagonal covariance.
ClockKfState make_state(double q_b, double q_d, double b0, double var_b, double d0, double var_d);

Eigen::Matrix2d transition(double tau);
/// Exact discretisation of the continuous model over tau.
Eigen::Matrix2d process_noise(double q_b, double q_d, double tau);

/// x <- F x, P <- F P F^T + Q(tau). tau < 0 is a domain error.
ClockKfState kf_predict(const ClockKfState& s, double tau);

struct UpdateResult {
  ClockKfState state;
  bool accepted = false;
  Eigen::VectorXd innovation;
  Eigen::MatrixXd S;
};

/// Bias-only measurement, H = [1 0].
UpdateResult kf_update(const ClockKfState& s, double z_bias, double r_meas, double gate_k);
/// Bias and drift measured, H = I.
UpdateResult kf_update(const ClockKfState& s, const Eigen::Vector2d& z, const Eigen::Matrix2d& r_meas, double gate_k);

/// Symmetric within `rel_tol` of the largest entry and eigenvalues >= -rel_tol * scale.
bool is_symmetric_psd(const Eigen::Matrix2d& P, double rel_tol = 1e-12);

struct Reading {
  double bias = 0;
  double variance = 0;
};

struct EnsembleReading {
  std::vector<Reading> readings;
  double bias = 0;
  double variance = 0;
};

/// Inverse-variance weighted mean. Readings with zero variance dominate:
/// the result is their plain mean with zero variance.
EnsembleReading ensemble_combine(const std::vector<Reading>& readings);

/// Process noise of the combined timescale for inverse-variance weights.
OscillatorSpec combined_spec(const std::vector<OscillatorSpec>& specs);

// ---- Allan deviation -------------------------------------------------------

struct AdevPoint {
  double tau = 0;
  double adev = 0;
  size_t terms = 0;
};

/// Overlapping Allan deviation from phase (time-error) samples taken every
/// `period` seconds. Each tau must be a positive multiple of the period
/// (InputError) with more than 2*tau/period samples available (CalibrationError).
std::vector<AdevPoint> allan_deviation(const std::vector<double>& phase, double period,
                                       const std::vector<double>& taus);

/// sigma_y(tau) of the clock model: sqrt(q_b/tau + q_d*tau/3).
double model_adev(double q_b, double q_d, double tau);

/// Least-squares slope of log(adev) against log(tau).
double loglog_slope(const std::vector<AdevPoint>& curve);

// ---- filter trace ------------------------------------------------------------

struct TraceRow {
  uint64_t epoch = 0;
  double predicted_bias = 0;
  double predicted_drift = 0;
  double bias = 0;
  double drift = 0;
  double p_bb = 0;
  double p_dd = 0;
  bool accepted = false;
};

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRow& row);

}  // namespace gtv::ensemble
