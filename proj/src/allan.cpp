#include <cmath>

#include "gtv/ensemble.hpp"

namespace gtv::ensemble {

std::vector<AdevPoint> allan_deviation(const std::vector<double>& phase, double period,
                                       const std::vector<double>& taus) {
  if (!(period > 0)) throw InputError("sample period must be positive");
  std::vector<AdevPoint> out;
  const size_t n = phase.size();
  for (double tau : taus) {
    const double ratio = tau / period;
    const auto m = static_cast<size_t>(std::llround(ratio));
    if (m == 0 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio) {
      throw InputError("tau " + std::to_string(tau) + " is not a multiple of the sample period");
    }
    if (n <= 2 * m) {
      throw CalibrationError("ADEV at tau " + std::to_string(tau) + " needs more than " + std::to_string(2 * m) +
                             " samples, have " + std::to_string(n));
    }
    const size_t terms = n - 2 * m;
    double sum = 0;
    for (size_t i = 0; i < terms; ++i) {
      const double d = phase[i + 2 * m] - 2 * phase[i + m] + phase[i];
      sum += d * d;
    }
    const double var = sum / (2.0 * tau * tau * static_cast<double>(terms));
    out.push_back({tau, std::sqrt(var), terms});
  }
  return out;
}

double model_adev(double q_b, double q_d, double tau) { return std::sqrt(q_b / tau + q_d * tau / 3); }

double loglog_slope(const std::vector<AdevPoint>& curve) {
  if (curve.size() < 2) throw InputError("slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : curve) {
    const double x = std::log(p.tau);
    const double y = std::log(p.adev);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto k = static_cast<double>(curve.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace gtv::ensemble
