#ifndef NVLOC_WIRE_FIELD_HPP
#define NVLOC_WIRE_FIELD_HPP

// Magnetostatic forward model of the nanowire.
//
// Lab frame: y' along the wire (current flows toward +y'), z' normal to the
// diamond surface (surface at z' = 0, diamond below), x' = y' x z'. The wire
// cross-section is x' in [-w/2, w/2], z' in [0, t]; the finite wire spans
// y' in [-L/2, L/2]. Current density is uniform.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "nvloc/errors.hpp"
#include "nvloc/grid.hpp"
#include "nvloc/parallel.hpp"
#include "nvloc/quadrature.hpp"
#include "nvloc/spin_model.hpp"
#include "nvloc/units.hpp"

namespace nvloc {

struct WireGeometry {
  double width = 36e-9;
  double thickness = 20e-9;
  double length = 500e-9;

  void validate() const {
    require(width > 0 && thickness > 0 && length > 0, "wire width, thickness and length must be positive");
    require(std::isfinite(width) && std::isfinite(thickness) && std::isfinite(length),
            "wire dimensions must be finite");
  }
};

struct LabPoint {
  double x = 0;
  double y = 0;
  double z = 0;
};

struct LabVector {
  double x = 0;
  double y = 0;
  double z = 0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  LabVector operator*(double s) const { return {x * s, y * s, z * s}; }
};

enum class WireModel { infinite, finite };

inline const char* to_string(WireModel m) { return m == WireModel::infinite ? "infinite" : "finite"; }

inline WireModel parse_wire_model(const std::string& s) {
  if (s == "infinite") return WireModel::infinite;
  if (s == "finite") return WireModel::finite;
  fail(ErrorKind::validation, "unknown wire model '" + s + "' (expected infinite|finite)");
}

/// Unit vector of the NV symmetry axis in the lab frame.
class NVAxis {
 public:
  /// Requires |u| = 1 within 1e-12.
  static NVAxis from_lab(const Eigen::Vector3d& u) {
    require(u.allFinite(), "NV axis must be finite");
    require(std::abs(u.norm() - 1.0) <= 1e-12, "NV axis must be a unit vector");
    return NVAxis(u);
  }

  /// Axis from crystal directions: the NV bond direction, the wire
  /// direction (lab y') and the surface normal (lab z'), all in crystal
  /// coordinates, e.g. [111], [110], [001].
  static NVAxis from_crystal(const Eigen::Vector3d& nv_direction, const Eigen::Vector3d& wire_direction,
                             const Eigen::Vector3d& surface_normal) {
    require(nv_direction.norm() > 0 && wire_direction.norm() > 0 && surface_normal.norm() > 0,
            "crystal directions must be non-zero");
    const Eigen::Vector3d ey = wire_direction.normalized();
    const Eigen::Vector3d ez = surface_normal.normalized();
    require(std::abs(ey.dot(ez)) < 1e-12, "wire direction must lie in the surface plane");
    const Eigen::Vector3d ex = ey.cross(ez);
    const Eigen::Vector3d n = nv_direction.normalized();
    Eigen::Vector3d u(n.dot(ex), n.dot(ey), n.dot(ez));
    return NVAxis(u.normalized());
  }

  /// [111] NV axis, wire along [110], (001) surface.
  static NVAxis standard() {
    return from_crystal(Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 1, 0), Eigen::Vector3d(0, 0, 1));
  }

  const Eigen::Vector3d& lab() const { return u_; }

 private:
  explicit NVAxis(const Eigen::Vector3d& u) : u_(u) {}
  Eigen::Vector3d u_;
};

/// Field-to-current ratios at a point, T/A.
struct AlphaPair {
  double alpha_z = 0;
  double alpha_perp = 0;
};

/// Parallel and transverse parts of a lab field relative to the NV axis.
struct AxisComponents {
  double parallel = 0;
  double transverse = 0;
};

inline AxisComponents project_to_nv_frame(const LabVector& b, const Eigen::Vector3d& axis) {
  require(std::abs(axis.norm() - 1.0) <= 1e-12, "project_to_nv_frame: axis must be a unit vector");
  const Eigen::Vector3d v(b.x, b.y, b.z);
  const double par = v.dot(axis);
  const double perp = (v - par * axis).norm();
  return {par, perp};
}

inline AxisComponents project_to_nv_frame(const LabVector& b, const NVAxis& axis) {
  return project_to_nv_frame(b, axis.lab());
}

/// NV-frame field with the whole transverse part placed along x.
inline NVFrameField to_nv_frame_field(const LabVector& b, const NVAxis& axis) {
  const auto c = project_to_nv_frame(b, axis);
  return {c.transverse, 0.0, c.parallel};
}

/// Filament on the wire center line (x' = 0, z' = t/2), infinite length.
inline LabVector thin_wire_field(const WireGeometry& g, double current, const LabPoint& p) {
  const double dz = p.z - 0.5 * g.thickness;
  const double r2 = p.x * p.x + dz * dz;
  if (r2 == 0) fail(ErrorKind::singular_point, "thin_wire_field: point lies on the wire axis");
  const double k = units::mu0 * current / (2 * units::pi * r2);
  return {k * dz, 0.0, -k * p.x};
}

namespace detail {

// Antiderivatives of the 2D kernel over the rectangle, with
// u = x_source - x and v = z - z_source:
//   d2/du dv F_x = v / (u^2 + v^2),  d2/du dv F_z = u / (u^2 + v^2).
inline double corner_fx(double u, double v) {
  const double r2 = u * u + v * v;
  const double a = v != 0 ? v * std::atan(u / v) : 0.0;
  const double b = r2 > 0 ? 0.5 * u * std::log(r2) : 0.0;
  return a + b;
}

inline double corner_fz(double u, double v) {
  const double r2 = u * u + v * v;
  const double a = r2 > 0 ? 0.5 * v * (std::log(r2) - 2.0) : 0.0;
  const double b = u != 0 ? u * std::atan(v / u) : 0.0;
  return a + b;
}

inline double half_log(double r2) { return r2 > 0 ? 0.5 * std::log(r2) : 0.0; }

// Current-element kernel integrated analytically over the wire width and
// along a wire end at signed distance c (c = end - y); returns the (x', z')
// integrands for a source slab at height a = z - z_source. c -> infinity
// for both ends recovers the infinite wire.
inline std::array<double, 2> width_integrated_end(double u1, double u2, double a, double c) {
  if (c == 0) return {0.0, 0.0};
  auto gx = [&](double u) {
    if (a == 0) return 0.0;
    const double s = std::sqrt(u * u + a * a + c * c);
    return std::atan(u * c / (a * s));
  };
  auto gz = [&](double u) {
    const double rho2 = u * u + a * a;
    const double s = std::sqrt(rho2 + c * c);
    // 0.5 ln((s - c) / (s + c)) without cancellation.
    return c > 0 ? half_log(rho2) - std::log(s + c) : std::log(s - c) - half_log(rho2);
  };
  return {gx(u2) - gx(u1), gz(u2) - gz(u1)};
}

inline std::array<double, 2> width_integrated_infinite(double u1, double u2, double a) {
  auto gx = [&](double u) { return a != 0 ? 2.0 * std::atan(u / a) : 0.0; };
  auto gz = [&](double u) { return 2.0 * half_log(u * u + a * a); };
  return {gx(u2) - gx(u1), gz(u2) - gz(u1)};
}

inline std::vector<double> source_breakpoints(const WireGeometry& g, const LabPoint& p) {
  if (p.z > 0 && p.z < g.thickness) return {p.z};
  return {};
}

}  // namespace detail

/// Infinite rectangular wire, closed form (corner sums of the antiderivatives).
inline LabVector rect_wire_field_infinite_exact(const WireGeometry& g, double current, const LabPoint& p) {
  const double u2 = 0.5 * g.width - p.x;
  const double u1 = -0.5 * g.width - p.x;
  const double v_bottom = p.z;  // source at z' = 0
  const double v_top = p.z - g.thickness;
  auto corners = [&](auto f) { return f(u2, v_bottom) - f(u1, v_bottom) - f(u2, v_top) + f(u1, v_top); };
  const double k = units::mu0 * current / (g.width * g.thickness) / (2 * units::pi);
  return {k * corners(detail::corner_fx), 0.0, k * corners(detail::corner_fz)};
}

/// Infinite rectangular wire: width integral analytic, thickness integral by
/// adaptive Gauss-Kronrod quadrature.
inline LabVector rect_wire_field_infinite(const WireGeometry& g, double current, const LabPoint& p,
                                          const QuadratureOptions& opt = {}) {
  const double u2 = 0.5 * g.width - p.x;
  const double u1 = -0.5 * g.width - p.x;
  auto integrand = [&](double zs) { return detail::width_integrated_infinite(u1, u2, p.z - zs); };
  const auto r = integrate<2>(integrand, 0.0, g.thickness, opt, detail::source_breakpoints(g, p));
  const double k = units::mu0 * current / (g.width * g.thickness) / (4 * units::pi);
  return {k * r.value[0], 0.0, k * r.value[1]};
}

/// Straight finite segment of rectangular cross-section. The length and
/// width integrals are analytic, the thickness integral adaptive. A current
/// along y' has no y' field component anywhere.
inline LabVector rect_wire_field_finite(const WireGeometry& g, double current, const LabPoint& p,
                                        const QuadratureOptions& opt = {}) {
  const double u2 = 0.5 * g.width - p.x;
  const double u1 = -0.5 * g.width - p.x;
  const double c_far = 0.5 * g.length - p.y;
  const double c_near = -0.5 * g.length - p.y;
  auto integrand = [&](double zs) {
    const double a = p.z - zs;
    const auto far = detail::width_integrated_end(u1, u2, a, c_far);
    const auto near = detail::width_integrated_end(u1, u2, a, c_near);
    return std::array<double, 2>{far[0] - near[0], far[1] - near[1]};
  };
  const auto r = integrate<2>(integrand, 0.0, g.thickness, opt, detail::source_breakpoints(g, p));
  const double k = units::mu0 * current / (g.width * g.thickness) / (4 * units::pi);
  return {k * r.value[0], 0.0, k * r.value[1]};
}

/// Field of the selected model. The infinite model uses the closed form.
inline LabVector wire_field(const WireGeometry& g, double current, const LabPoint& p, WireModel model,
                            const QuadratureOptions& opt = {}) {
  return model == WireModel::infinite ? rect_wire_field_infinite_exact(g, current, p)
                                      : rect_wire_field_finite(g, current, p, opt);
}

/// Multiplicative errors on the modelled lab-frame field components.
struct FieldScaling {
  double x = 1.0;
  double z = 1.0;
};

inline AlphaPair alpha_from_field(const LabVector& per_ampere, const NVAxis& axis, const FieldScaling& s = {}) {
  const LabVector scaled{per_ampere.x * s.x, per_ampere.y, per_ampere.z * s.z};
  const auto c = project_to_nv_frame(scaled, axis);
  return {c.parallel, c.transverse};
}

/// Field per unit current at p, projected on the NV axis.
inline AlphaPair alpha_map(const WireGeometry& g, const LabPoint& p, const NVAxis& axis, WireModel model,
                           const FieldScaling& s = {}, const QuadratureOptions& opt = {}) {
  return alpha_from_field(wire_field(g, 1.0, p, model, opt), axis, s);
}

/// |B| on an (x', z') grid at y' = 0, tesla.
inline Grid2D field_magnitude_grid(const WireGeometry& g, double current, const GridSpec& grid,
                                   WireModel model = WireModel::infinite, unsigned threads = 0) {
  g.validate();
  grid.validate();
  Grid2D out{grid, std::vector<double>(grid.size())};
  parallel_for(
      grid.nz,
      [&](std::size_t j) {
        for (std::size_t i = 0; i < grid.nx; ++i)
          out.at(i, j) = wire_field(g, current, {grid.x(i), 0.0, grid.z(j)}, model).norm();
      },
      threads);
  return out;
}

}  // namespace nvloc

#endif  // NVLOC_WIRE_FIELD_HPP
