#include "gtv/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace gtv::ensemble {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InputError(std::string(what) + " is not finite");
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + " is not finite");
}

template <int N>
UpdateResult update(const ClockKfState& s, const Eigen::Matrix<double, N, 1>& z,
                    const Eigen::Matrix<double, N, 2>& H, const Eigen::Matrix<double, N, N>& R, double gate_k) {
  require_finite(z, "measurement");
  require_finite(R, "measurement noise");
  if (!(gate_k > 0)) throw InputError("gate_k must be positive");

  const Eigen::Matrix<double, N, 1> nu = z - H * s.x;
  const Eigen::Matrix<double, N, N> S = H * s.P * H.transpose() + R;

  UpdateResult r;
  r.innovation = nu;
  r.S = S;
  r.state = s;
  r.accepted = true;
  for (int i = 0; i < N; ++i) {
    if (std::abs(nu(i)) > gate_k * std::sqrt(S(i, i))) r.accepted = false;
  }
  if (!r.accepted) return r;

  const Eigen::Matrix<double, 2, N> K = s.P * H.transpose() * S.inverse();
  const Eigen::Matrix2d I_KH = Eigen::Matrix2d::Identity() - K * H;
  r.state.x = s.x + K * nu;
  // Joseph form
  const Eigen::Matrix2d P = I_KH * s.P * I_KH.transpose() + K * R * K.transpose();
  r.state.P = 0.5 * (P + P.transpose());
  return r;
}

}  // namespace

void OscillatorSpec::validate() const {
  for (const auto& [v, name] : {std::pair{q_b, "q_b"}, std::pair{q_d, "q_d"}, std::pair{sigma_meas, "sigma_meas"}}) {
    if (!std::isfinite(v) || v < 0) throw InputError("oscillator '" + label + "': " + name + " must be >= 0");
  }
}

ClockKfState make_state(double q_b, double q_d, double b0, double var_b, double d0, double var_d) {
  ClockKfState s;
  s.x << b0, d0;
  s.P << var_b, 0, 0, var_d;
  s.q_b = q_b;
  s.q_d = q_d;
  return s;
}

Eigen::Matrix2d transition(double tau) {
  Eigen::Matrix2d F;
  F << 1, tau, 0, 1;
  return F;
}

Eigen::Matrix2d process_noise(double q_b, double q_d, double tau) {
  Eigen::Matrix2d Q;
  Q << q_b * tau + q_d * tau * tau * tau / 3, q_d * tau * tau / 2, q_d * tau * tau / 2, q_d * tau;
  return Q;
}

ClockKfState kf_predict(const ClockKfState& s, double tau) {
  if (!(tau >= 0)) throw DomainError("kf_predict: tau must be >= 0");
  if (tau == 0) return s;
  const Eigen::Matrix2d F = transition(tau);
  ClockKfState out = s;
  out.x = F * s.x;
  const Eigen::Matrix2d P = F * s.P * F.transpose() + process_noise(s.q_b, s.q_d, tau);
  out.P = 0.5 * (P + P.transpose());
  return out;
}

UpdateResult kf_update(const ClockKfState& s, double z_bias, double r_meas, double gate_k) {
  require_finite(z_bias, "measurement");
  Eigen::Matrix<double, 1, 1> z(z_bias);
  Eigen::Matrix<double, 1, 2> H(1, 0);
  Eigen::Matrix<double, 1, 1> R(r_meas);
  return update<1>(s, z, H, R, gate_k);
}

UpdateResult kf_update(const ClockKfState& s, const Eigen::Vector2d& z, const Eigen::Matrix2d& r_meas,
                       double gate_k) {
  return update<2>(s, z, Eigen::Matrix2d::Identity(), r_meas, gate_k);
}

bool is_symmetric_psd(const Eigen::Matrix2d& P, double rel_tol) {
  if (!P.allFinite()) return false;
  const double scale = std::max(P.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (std::abs(P(0, 1) - P(1, 0)) > rel_tol * scale) return false;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(P);
  return eig.eigenvalues().minCoeff() >= -rel_tol * scale;
}

EnsembleReading ensemble_combine(const std::vector<Reading>& readings) {
  if (readings.empty()) throw InputError("ensemble_combine: no readings");
  EnsembleReading out;
  out.readings = readings;
  size_t zero = 0;
  double zero_sum = 0;
  for (const Reading& r : readings) {
    require_finite(r.bias, "reading bias");
    if (!std::isfinite(r.variance) || r.variance < 0) throw InputError("reading variance must be finite and >= 0");
    if (r.variance == 0) {
      ++zero;
      zero_sum += r.bias;
    }
  }
  if (readings.size() == 1) {
    out.bias = readings[0].bias;
    out.variance = readings[0].variance;
    return out;
  }
  if (zero > 0) {
    out.bias = zero_sum / static_cast<double>(zero);
    out.variance = 0;
    return out;
  }
  double w_sum = 0;
  double wb_sum = 0;
  for (const Reading& r : readings) {
    w_sum += 1 / r.variance;
    wb_sum += r.bias / r.variance;
  }
  out.bias = wb_sum / w_sum;
  out.variance = 1 / w_sum;
  return out;
}

OscillatorSpec combined_spec(const std::vector<OscillatorSpec>& specs) {
  if (specs.empty()) throw InputError("ensemble needs at least one oscillator");
  std::vector<double> w;
  const bool any_exact = std::any_of(specs.begin(), specs.end(), [](const auto& s) { return s.sigma_meas == 0; });
  for (const auto& s : specs) {
    s.validate();
    w.push_back(any_exact ? (s.sigma_meas == 0 ? 1.0 : 0.0) : 1 / (s.sigma_meas * s.sigma_meas));
  }
  double total = 0;
  for (double v : w) total += v;
  OscillatorSpec out;
  out.label = specs.size() == 1 ? specs[0].label : "ensemble";
  out.q_b = 0;
  out.q_d = 0;
  for (size_t i = 0; i < specs.size(); ++i) {
    const double wi = w[i] / total;
    out.q_b += wi * wi * specs[i].q_b;
    out.q_d += wi * wi * specs[i].q_d;
  }
  out.sigma_meas = any_exact ? 0 : std::sqrt(1 / total);
  return out;
}

void write_trace_header(std::ostream& out) {
  out << "epoch,predicted_bias_s,predicted_drift,bias_s,drift,p_bb,p_dd,accepted\n";
}

void write_trace_row(std::ostream& out, const TraceRow& row) {
  out << row.epoch << std::setprecision(12) << ',' << row.predicted_bias << ',' << row.predicted_drift << ','
      << row.bias << ',' << row.drift << ',' << row.p_bb << ',' << row.p_dd << ',' << (row.accepted ? 1 : 0)
      << '\n';
}

}  // namespace gtv::ensemble
