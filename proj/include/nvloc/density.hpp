#ifndef NVLOC_DENSITY_HPP
#define NVLOC_DENSITY_HPP

// Kernel density maps of bootstrap positions and their iso-probability
// contours.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "nvloc/errors.hpp"
#include "nvloc/grid.hpp"
#include "nvloc/locator.hpp"

namespace nvloc {

/// Probability masses of the 1, 2 and 3 sigma regions of a 2D Gaussian.
inline const std::vector<double> kDefaultMassLevels{0.39, 0.86, 0.99};

struct ContourLine {
  std::vector<std::array<double, 2>> points;  // (x', z') in m
  bool closed = false;                        // otherwise clipped at the grid edge
};

struct Contour {
  double mass = 0;       // enclosed probability
  double threshold = 0;  // density level, 1/m^2
  std::vector<ContourLine> lines;
};

struct PositionPDF {
  Grid2D density;  // 1/m^2, sums to 1 over cells of area dx dz
  double bandwidth_x = 0, bandwidth_z = 0;
  bool delta_like = false;
  double mode_x = 0, mode_z = 0;
  std::vector<Contour> contours;
};

namespace detail {

inline double sample_std(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Silverman's rule for a 2D product kernel: h = s n^(-1/6), with the
/// robust scale s = min(std, IQR / 1.349).
inline double silverman_2d(const std::vector<double>& v) {
  const double sd = sample_std(v);
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  const double s = iqr > 0 ? std::min(sd, iqr / 1.349) : sd;
  return s * std::pow(static_cast<double>(v.size()), -1.0 / 6.0);
}

inline Eigen::MatrixXd kernel_matrix(const std::vector<double>& centers, std::size_t m,
                                     const std::function<double(std::size_t)>& coord, double h) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(centers.size()));
  for (std::size_t i = 0; i < m; ++i) {
    const double c = coord(i);
    for (std::size_t s = 0; s < centers.size(); ++s) {
      const double d = (c - centers[s]) / h;
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = std::exp(-0.5 * d * d);
    }
  }
  return k;
}

}  // namespace detail

/// Grid centered on the sample mean, +-max(5 std, 4 bandwidth) per axis,
/// with depth capped at the surface.
inline GridSpec auto_pdf_grid(const std::vector<PositionSample>& samples, std::size_t nx = 121,
                              std::size_t nz = 121) {
  require(samples.size() >= 2, "auto grid needs samples");
  std::vector<double> xs, zs;
  for (const auto& s : samples) {
    xs.push_back(s.x);
    zs.push_back(s.z);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double mz = std::accumulate(zs.begin(), zs.end(), 0.0) / static_cast<double>(zs.size());
  const double hx = std::max({5 * detail::sample_std(xs), 4 * detail::silverman_2d(xs), 1e-9});
  const double hz = std::max({5 * detail::sample_std(zs), 4 * detail::silverman_2d(zs), 1e-9});
  GridSpec g;
  g.x_min = mx - hx;
  g.x_max = mx + hx;
  g.z_min = mz - hz;
  g.z_max = std::min(mz + hz, 0.0);
  if (g.z_max <= g.z_min) g.z_max = g.z_min + hz;
  g.nx = nx;
  g.nz = nz;
  return g;
}

/// Highest-density threshold whose super-level set holds `mass` of the
/// grid probability.
inline double hpd_threshold(const Grid2D& density, double mass) {
  require(mass > 0 && mass < 1, "contour mass must be in (0, 1)");
  std::vector<double> v = density.values;
  std::sort(v.begin(), v.end(), std::greater<>());
  const double cell = density.spec.dx() * density.spec.dz();
  double acc = 0;
  for (double d : v) {
    acc += d * cell;
    if (acc >= mass) return d;
  }
  return v.back();
}

/// Marching squares at `level`, segments joined into polylines. Lines that
/// end on the grid boundary are open (clipped).
inline std::vector<ContourLine> contour_lines(const Grid2D& f, double level) {
  const auto& g = f.spec;
  if (g.nx < 2 || g.nz < 2) return {};
  // Crossing point on each grid edge, keyed by edge id: 2*(j*nx+i) for the
  // edge (i,j)-(i+1,j), +1 for (i,j)-(i,j+1).
  std::map<std::size_t, std::array<double, 2>> point;
  std::map<std::size_t, std::vector<std::size_t>> links;
  auto edge_point = [&](std::size_t id) {
    auto it = point.find(id);
    if (it != point.end()) return;
    const std::size_t cell = id / 2;
    const std::size_t i = cell % g.nx, j = cell / g.nx;
    const bool vertical = id % 2;
    const std::size_t i2 = vertical ? i : i + 1, j2 = vertical ? j + 1 : j;
    const double a = f.at(i, j), b = f.at(i2, j2);
    const double t = a == b ? 0.5 : std::clamp((level - a) / (b - a), 0.0, 1.0);
    point[id] = {g.x(i) + t * (g.x(i2) - g.x(i)), g.z(j) + t * (g.z(j2) - g.z(j))};
  };
  auto link = [&](std::size_t a, std::size_t b) {
    edge_point(a);
    edge_point(b);
    links[a].push_back(b);
    links[b].push_back(a);
  };
  for (std::size_t j = 0; j + 1 < g.nz; ++j)
    for (std::size_t i = 0; i + 1 < g.nx; ++i) {
      const double v0 = f.at(i, j), v1 = f.at(i + 1, j), v2 = f.at(i + 1, j + 1), v3 = f.at(i, j + 1);
      const int code = (v0 >= level) | ((v1 >= level) << 1) | ((v2 >= level) << 2) | ((v3 >= level) << 3);
      if (code == 0 || code == 15) continue;
      const std::size_t bottom = 2 * (j * g.nx + i), left = bottom + 1;
      const std::size_t top = 2 * ((j + 1) * g.nx + i), right = 2 * (j * g.nx + i + 1) + 1;
      const bool center_high = 0.25 * (v0 + v1 + v2 + v3) >= level;
      switch (code) {
        case 1: case 14: link(left, bottom); break;
        case 2: case 13: link(bottom, right); break;
        case 3: case 12: link(left, right); break;
        case 4: case 11: link(right, top); break;
        case 6: case 9: link(bottom, top); break;
        case 7: case 8: link(left, top); break;
        case 5:
          if (center_high) { link(left, top); link(bottom, right); }
          else { link(left, bottom); link(right, top); }
          break;
        case 10:
          if (center_high) { link(left, bottom); link(right, top); }
          else { link(left, top); link(bottom, right); }
          break;
        default: break;
      }
    }

  std::vector<ContourLine> out;
  std::map<std::size_t, bool> used;
  auto walk = [&](std::size_t start) {
    ContourLine line;
    std::size_t prev = start, cur = start;
    line.points.push_back(point[cur]);
    used[cur] = true;
    while (true) {
      std::optional<std::size_t> next;
      for (std::size_t n : links[cur])
        if (n != prev && !used[n]) {
          next = n;
          break;
        }
      if (!next) {
        for (std::size_t n : links[cur])
          if (n == start && n != prev && line.points.size() > 2) line.closed = true;
        break;
      }
      prev = cur;
      cur = *next;
      used[cur] = true;
      line.points.push_back(point[cur]);
    }
    if (line.closed) line.points.push_back(line.points.front());
    out.push_back(std::move(line));
  };
  // Open chains start at their ends (degree 1), then the remaining loops.
  for (const auto& [id, adj] : links)
    if (adj.size() == 1 && !used[id]) walk(id);
  for (const auto& [id, adj] : links)
    if (!used[id]) walk(id);
  return out;
}

/// Gaussian product-kernel density of the samples on `grid`, normalized so
/// that the cell sum times dx dz is 1. Bandwidths default to Silverman's
/// rule per axis. Samples with zero spread in an axis give a delta-like map.
inline PositionPDF position_pdf(const std::vector<PositionSample>& samples, const GridSpec& grid,
                                std::optional<std::array<double, 2>> bandwidth = std::nullopt,
                                const std::vector<double>& masses = kDefaultMassLevels) {
  require(samples.size() >= 100, "position_pdf needs at least 100 samples");
  grid.validate();
  require(grid.nx >= 2 && grid.nz >= 2 && grid.dx() > 0 && grid.dz() > 0, "position_pdf needs a 2D grid");
  std::vector<double> xs, zs;
  for (const auto& s : samples) {
    xs.push_back(s.x);
    zs.push_back(s.z);
  }
  PositionPDF pdf;
  pdf.density = Grid2D{grid, std::vector<double>(grid.size(), 0.0)};
  if (bandwidth) {
    require((*bandwidth)[0] > 0 && (*bandwidth)[1] > 0, "KDE bandwidths must be positive");
    pdf.bandwidth_x = (*bandwidth)[0];
    pdf.bandwidth_z = (*bandwidth)[1];
  } else {
    pdf.bandwidth_x = detail::silverman_2d(xs);
    pdf.bandwidth_z = detail::silverman_2d(zs);
  }

  const double cell = grid.dx() * grid.dz();
  if (!(pdf.bandwidth_x > 0) || !(pdf.bandwidth_z > 0)) {
    pdf.delta_like = true;
    auto nearest = [](double v, double lo, double step, std::size_t n) {
      if (n < 2) return std::size_t{0};
      const double k = std::round((v - lo) / step);
      return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n - 1)));
    };
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double mz = std::accumulate(zs.begin(), zs.end(), 0.0) / static_cast<double>(zs.size());
    const std::size_t i = nearest(mx, grid.x_min, grid.dx(), grid.nx);
    const std::size_t j = nearest(mz, grid.z_min, grid.dz(), grid.nz);
    pdf.density.at(i, j) = 1.0 / cell;
    pdf.mode_x = grid.x(i);
    pdf.mode_z = grid.z(j);
    return pdf;
  }

  const Eigen::MatrixXd kx = detail::kernel_matrix(xs, grid.nx, [&](std::size_t i) { return grid.x(i); },
                                                   pdf.bandwidth_x);
  const Eigen::MatrixXd kz = detail::kernel_matrix(zs, grid.nz, [&](std::size_t j) { return grid.z(j); },
                                                   pdf.bandwidth_z);
  const Eigen::MatrixXd d = kz * kx.transpose();  // nz x nx
  const double total = d.sum() * cell;
  require(total > 0, "position_pdf: grid does not cover the samples");
  for (std::size_t j = 0; j < grid.nz; ++j)
    for (std::size_t i = 0; i < grid.nx; ++i)
      pdf.density.at(i, j) = d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) / total;

  const auto peak = std::max_element(pdf.density.values.begin(), pdf.density.values.end());
  const auto k = static_cast<std::size_t>(peak - pdf.density.values.begin());
  pdf.mode_x = grid.x(k % grid.nx);
  pdf.mode_z = grid.z(k / grid.nx);

  for (double m : masses) {
    Contour c;
    c.mass = m;
    c.threshold = hpd_threshold(pdf.density, m);
    c.lines = contour_lines(pdf.density, c.threshold);
    pdf.contours.push_back(std::move(c));
  }
  return pdf;
}

/// Local maxima of the density above `fraction` of the global maximum.
inline std::size_t count_modes(const Grid2D& f, double fraction = 0.05) {
  const auto& g = f.spec;
  const double top = *std::max_element(f.values.begin(), f.values.end());
  std::size_t modes = 0;
  for (std::size_t j = 0; j < g.nz; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double v = f.at(i, j);
      if (v < fraction * top) continue;
      bool is_max = true;
      for (int dj = -1; dj <= 1 && is_max; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (!di && !dj) continue;
          const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
          if (ii < 0 || jj < 0 || ii >= static_cast<long>(g.nx) || jj >= static_cast<long>(g.nz)) continue;
          if (f.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)) > v) {
            is_max = false;
            break;
          }
        }
      modes += is_max;
    }
  return modes;
}

}  // namespace nvloc

#endif  // NVLOC_DENSITY_HPP
