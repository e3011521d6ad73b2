#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nvloc/density.hpp"

using namespace nvloc;

namespace {

std::vector<PositionSample> gaussian_samples(std::size_t n, double mx, double mz, double sx, double sz,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nx(mx, sx), nz(mz, sz);
  std::vector<PositionSample> s;
  for (std::size_t k = 0; k < n; ++k) s.push_back({nx(rng), nz(rng)});
  return s;
}

GridSpec box(double half) {
  GridSpec g;
  g.x_min = -half;
  g.x_max = half;
  g.z_min = -half;
  g.z_max = half;
  g.nx = g.nz = 121;
  return g;
}

double grid_mass(const Grid2D& d) {
  double s = 0;
  for (double v : d.values) s += v;
  return s * d.spec.dx() * d.spec.dz();
}

}  // namespace

TEST(PositionPdf, NormalizedAndPeaksAtMean) {
  const auto s = gaussian_samples(4000, 1.0, -0.5, 1.0, 1.0, 1);
  const auto pdf = position_pdf(s, box(6.0));
  EXPECT_NEAR(grid_mass(pdf.density), 1.0, 1e-3);
  for (double v : pdf.density.values) EXPECT_GE(v, 0.0);
  EXPECT_NEAR(pdf.mode_x, 1.0, pdf.bandwidth_x);
  EXPECT_NEAR(pdf.mode_z, -0.5, pdf.bandwidth_z);
  EXPECT_EQ(count_modes(pdf.density), 1u);
  EXPECT_NEAR(pdf.bandwidth_x, std::pow(4000.0, -1.0 / 6.0), 0.05);
}

TEST(PositionPdf, OneSigmaContourIsUnitCircle) {
  // A 2D standard normal holds 1 - exp(-1/2) = 0.393 inside radius 1.
  const auto s = gaussian_samples(5000, 0.0, 0.0, 1.0, 1.0, 2);
  const auto pdf = position_pdf(s, box(6.0));
  ASSERT_EQ(pdf.contours.size(), 3u);
  const auto& c = pdf.contours[0];
  ASSERT_EQ(c.lines.size(), 1u);
  EXPECT_TRUE(c.lines[0].closed);
  double r = 0;
  for (const auto& p : c.lines[0].points) r += std::hypot(p[0], p[1]);
  r /= static_cast<double>(c.lines[0].points.size());
  // KDE smoothing inflates the radius by sqrt(1 + n^(-1/3)).
  EXPECT_NEAR(r, std::sqrt(1 + std::pow(5000.0, -1.0 / 3.0)), 0.06);

  // Monte-Carlo check of the enclosed mass.
  std::size_t inside = 0;
  for (const auto& p : s)
    if (std::hypot(p.x, p.z) < r) ++inside;
  EXPECT_NEAR(static_cast<double>(inside) / s.size(), 0.39, 0.04);
}

TEST(PositionPdf, ContoursNestAndClip) {
  const auto s = gaussian_samples(2000, 0.0, 0.0, 1.0, 1.0, 3);
  const auto pdf = position_pdf(s, box(6.0));
  EXPECT_GT(pdf.contours[0].threshold, pdf.contours[1].threshold);
  EXPECT_GT(pdf.contours[1].threshold, pdf.contours[2].threshold);
  // Cutting the grid through the middle leaves clipped lines.
  GridSpec half = box(6.0);
  half.z_min = 0.0;
  const auto cut = position_pdf(s, half);
  bool any_open = false;
  for (const auto& l : cut.contours[1].lines) any_open |= !l.closed;
  EXPECT_TRUE(any_open);
}

TEST(PositionPdf, DeltaLikeSamples) {
  const std::vector<PositionSample> s(200, {0.5, -0.5});
  const auto pdf = position_pdf(s, box(2.0));
  EXPECT_TRUE(pdf.delta_like);
  EXPECT_NEAR(grid_mass(pdf.density), 1.0, 1e-12);
  EXPECT_NEAR(pdf.mode_x, 0.5, box(2.0).dx());
}

TEST(PositionPdf, NeedsSamples) {
  const auto s = gaussian_samples(50, 0, 0, 1, 1, 4);
  EXPECT_THROW(position_pdf(s, box(3.0)), Error);
}

TEST(PositionPdf, Nv1BootstrapIsUnimodalNearPointFit) {
  const auto axis = NVAxis::standard();
  const WireGeometry wire{};
  const auto a = alpha_map(wire, {-83.9e-9, 0, -8.6e-9}, axis, WireModel::infinite);
  const AlphaMeasurement m{a.alpha_z, a.alpha_perp, 0.02};
  BootstrapOptions o;
  o.n = 2000;
  const auto boot = bootstrap_positions(m, GeometryPrior{}, axis, WireModel::infinite, o);
  const auto pdf = position_pdf(boot.samples, auto_pdf_grid(boot.samples));
  // Draws pinned at the z' = -1 nm bound add a shallow local bump next to
  // the surface, so unimodality is judged by the iso-probability regions.
  EXPECT_EQ(pdf.contours[0].lines.size(), 1u);
  EXPECT_EQ(pdf.contours[1].lines.size(), 1u);
  EXPECT_NEAR(pdf.mode_x, -83.9e-9, 1e-9);
  EXPECT_NEAR(pdf.mode_z, -8.6e-9, 1e-9);
}

TEST(HpdThreshold, FullMassTakesSmallestCell) {
  Grid2D g{box(1.0), std::vector<double>(121 * 121, 1.0)};
  EXPECT_EQ(hpd_threshold(g, 0.5), 1.0);
  EXPECT_THROW(hpd_threshold(g, 1.5), Error);
}
