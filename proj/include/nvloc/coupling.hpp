#ifndef NVLOC_COUPLING_HPP
#define NVLOC_COUPLING_HPP

// Spin-resonator coupling from alpha_perp and the single-spin detection time.

#include <cmath>

#include "nvloc/errors.hpp"
#include "nvloc/spin_model.hpp"
#include "nvloc/units.hpp"

namespace nvloc {

struct ResonatorParams {
  double delta_i = 35e-9;  // A, vacuum current fluctuations
  double kappa = 1e5;      // 1/s, resonator energy damping
  double gamma2 = 1e5;     // 1/s, NV decoherence
  double eta = 1.0;        // detection efficiency

  void validate() const {
    require(delta_i > 0 && kappa > 0 && gamma2 > 0, "resonator parameters must be positive");
    require(eta > 0 && eta <= 1, "detection efficiency must lie in (0, 1]");
  }
};

/// g in both conventions; the detection time only uses g_angular.
struct CouplingEstimate {
  double g_over_2pi = 0;  // Hz
  double g_angular = 0;   // rad/s
  double detection_time = 0;  // s, 0 until computed
};

/// g/2pi = gamma_e alpha_perp delta_i <0|S_x|-1>.
inline CouplingEstimate coupling_constant(double alpha_perp, const ResonatorParams& r, const SpinConstants& c = {}) {
  r.validate();
  require(alpha_perp >= 0 && std::isfinite(alpha_perp), "alpha_perp must be non-negative");
  CouplingEstimate g;
  g.g_over_2pi = c.gamma_e * alpha_perp * r.delta_i * sx_matrix_element(c);
  g.g_angular = 2 * units::pi * g.g_over_2pi;
  return g;
}

/// T = kappa^2 gamma2 / (eta g^4), g in rad/s.
inline double detection_time(const CouplingEstimate& g, const ResonatorParams& r) {
  r.validate();
  if (!(g.g_angular > 0)) fail(ErrorKind::validation, "detection time undefined for zero coupling");
  return r.kappa * r.kappa * r.gamma2 / (r.eta * std::pow(g.g_angular, 4));
}

/// Coupling with a given g/2pi (Hz), detection time filled in.
inline CouplingEstimate coupling_from_frequency(double g_over_2pi, const ResonatorParams& r) {
  CouplingEstimate g{g_over_2pi, 2 * units::pi * g_over_2pi, 0};
  g.detection_time = detection_time(g, r);
  return g;
}

}  // namespace nvloc

#endif  // NVLOC_COUPLING_HPP
