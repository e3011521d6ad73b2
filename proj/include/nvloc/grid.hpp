#ifndef NVLOC_GRID_HPP
#define NVLOC_GRID_HPP

#include <cstddef>
#include <vector>

#include "nvloc/errors.hpp"

namespace nvloc {

/// Rectangular grid over the lab (x', z') plane, meters. A single point
/// along an axis is allowed (min must then equal max).
struct GridSpec {
  double x_min = -200e-9;
  double x_max = 200e-9;
  std::size_t nx = 101;
  double z_min = -100e-9;
  double z_max = 50e-9;
  std::size_t nz = 51;

  void validate() const {
    require(nx >= 1 && nz >= 1, "grid needs at least one point per axis");
    require(x_max >= x_min && z_max >= z_min, "grid bounds must be ordered");
    require(nx > 1 || x_max == x_min, "a one-point axis needs min == max");
    require(nz > 1 || z_max == z_min, "a one-point axis needs min == max");
  }
  double dx() const { return nx > 1 ? (x_max - x_min) / static_cast<double>(nx - 1) : 0.0; }
  double dz() const { return nz > 1 ? (z_max - z_min) / static_cast<double>(nz - 1) : 0.0; }
  double x(std::size_t i) const { return x_min + dx() * static_cast<double>(i); }
  double z(std::size_t j) const { return z_min + dz() * static_cast<double>(j); }
  std::size_t size() const { return nx * nz; }
};

/// Scalar field sampled on a GridSpec; value(i, j) at (x(i), z(j)),
/// stored row-major in z.
struct Grid2D {
  GridSpec spec;
  std::vector<double> values;

  double& at(std::size_t i, std::size_t j) { return values[j * spec.nx + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * spec.nx + i]; }
};

}  // namespace nvloc

#endif  // NVLOC_GRID_HPP
