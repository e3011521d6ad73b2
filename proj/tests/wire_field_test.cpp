#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "nvloc/wire_field.hpp"

using namespace nvloc;
using namespace nvloc::units;

namespace {

const WireGeometry kWire{};

// Independent oracle: brute-force nested quadrature of the Biot-Savart
// kernel over the cross-section. `filament` gives the field of a current
// filament at (xs, zs) running along y' over the modelled length.
template <class Filament>
LabVector brute_force(const WireGeometry& g, double current, Filament filament) {
  QuadratureOptions opt;
  opt.rel_tol = 1e-10;
  const double density = current / (g.width * g.thickness);
  auto over_z = [&](double xs) {
    auto inner = [&](double zs) { return filament(xs, zs); };
    return integrate<2>(inner, 0.0, g.thickness, opt).value;
  };
  const auto r = integrate<2>(over_z, -0.5 * g.width, 0.5 * g.width, opt);
  return {density * r.value[0], 0.0, density * r.value[1]};
}

LabVector brute_force_infinite(const WireGeometry& g, double current, const LabPoint& p) {
  return brute_force(g, current, [&](double xs, double zs) {
    const double dx = p.x - xs, dz = p.z - zs;
    const double k = mu0 / (2 * pi * (dx * dx + dz * dz));
    return std::array<double, 2>{k * dz, -k * dx};
  });
}

LabVector brute_force_finite(const WireGeometry& g, double current, const LabPoint& p) {
  return brute_force(g, current, [&](double xs, double zs) {
    const double dx = p.x - xs, dz = p.z - zs;
    const double rho2 = dx * dx + dz * dz;
    const double c2 = 0.5 * g.length - p.y, c1 = -0.5 * g.length - p.y;
    const double span = c2 / std::sqrt(rho2 + c2 * c2) - c1 / std::sqrt(rho2 + c1 * c1);
    const double k = mu0 / (4 * pi * rho2) * span;
    return std::array<double, 2>{k * dz, -k * dx};
  });
}

double rel_diff(const LabVector& a, const LabVector& b) {
  const LabVector d{a.x - b.x, a.y - b.y, a.z - b.z};
  return d.norm() / b.norm();
}

}  // namespace

TEST(ThinWire, AmpereLaw) {
  const LabPoint p{0, 0, kWire.thickness / 2 - 100 * nm};
  const auto b = thin_wire_field(kWire, 1 * mA, p);
  EXPECT_NEAR(b.norm(), 2.0 * mT, 1e-6 * 2.0 * mT);
  // Directly below the center the field is purely along x'.
  EXPECT_EQ(b.z, 0.0);
  EXPECT_EQ(b.y, 0.0);
  const auto flipped = thin_wire_field(kWire, -1 * mA, p);
  EXPECT_DOUBLE_EQ(flipped.x, -b.x);
}

TEST(ThinWire, SingularOnAxis) {
  try {
    thin_wire_field(kWire, 1 * mA, {0, 0, kWire.thickness / 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::singular_point);
  }
}

TEST(RectInfinite, FarFieldMatchesThinWire) {
  const double r = 25 * std::max(kWire.width, kWire.thickness);
  for (double angle : {-2.5, -1.57, -0.7, 0.3}) {
    const LabPoint p{r * std::cos(angle), 0, kWire.thickness / 2 + r * std::sin(angle)};
    const auto thin = thin_wire_field(kWire, 1 * mA, p);
    EXPECT_LT(rel_diff(rect_wire_field_infinite(kWire, 1 * mA, p), thin), 1e-3);
    EXPECT_LT(rel_diff(rect_wire_field_infinite_exact(kWire, 1 * mA, p), thin), 1e-3);
  }
}

TEST(RectInfinite, ThinCrossSectionLimit) {
  const WireGeometry tiny{1 * nm, 1 * nm, 500 * nm};
  const LabPoint p{0, 0, 0.5 * nm - 100 * nm};
  EXPECT_NEAR(rect_wire_field_infinite(tiny, 1 * mA, p).norm(), 2.0 * mT, 1e-4 * 2.0 * mT);
}

TEST(RectInfinite, FieldScaleAtShallowLateralPosition) {
  const LabPoint p{-83.9 * nm, 0, -8.6 * nm};
  const double quad = rect_wire_field_infinite(kWire, 1.0, p).norm();
  const double thin = thin_wire_field(kWire, 1.0, p).norm();
  EXPECT_NEAR(quad, thin, 0.05 * thin);
  EXPECT_NEAR(quad, 2.35, 0.1);
}

TEST(RectInfinite, QuadratureMatchesClosedFormAndBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(-300 * nm, 300 * nm);
  std::uniform_real_distribution<double> z(-100 * nm, -1 * nm);
  for (int k = 0; k < 30; ++k) {
    const LabPoint p{x(rng), 0, z(rng)};
    const auto quad = rect_wire_field_infinite(kWire, 1.0, p);
    const auto exact = rect_wire_field_infinite_exact(kWire, 1.0, p);
    EXPECT_LT(rel_diff(quad, exact), 2e-6);
    if (k < 6) {
      EXPECT_LT(rel_diff(exact, brute_force_infinite(kWire, 1.0, p)), 1e-8);
    }
  }
  // Inside the conductor the field is finite and both routes agree.
  const LabPoint inside{5 * nm, 0, 7 * nm};
  EXPECT_LT(rel_diff(rect_wire_field_infinite(kWire, 1.0, inside),
                     rect_wire_field_infinite_exact(kWire, 1.0, inside)),
            2e-6);
}

TEST(RectInfinite, HalvingToleranceIsStable) {
  const LabPoint p{-40 * nm, 0, -2 * nm};
  QuadratureOptions a, b;
  a.rel_tol = 1e-6;
  b.rel_tol = 0.5e-6;
  const auto fa = rect_wire_field_infinite(kWire, 1.0, p, a);
  const auto fb = rect_wire_field_infinite(kWire, 1.0, p, b);
  EXPECT_LT(rel_diff(fa, fb), 1e-6);
}

TEST(RectFinite, LongWireMatchesInfinite) {
  WireGeometry longer = kWire;
  longer.length = 100 * kWire.width;
  for (const LabPoint p : {LabPoint{0, 0, -10 * nm}, LabPoint{-30 * nm, 0, -10 * nm}}) {
    EXPECT_LT(rel_diff(rect_wire_field_finite(longer, 1.0, p), rect_wire_field_infinite_exact(longer, 1.0, p)),
              1e-3);
  }
  longer.length = 1000 * kWire.width;
  const LabPoint nv1{-83.9 * nm, 0, -8.6 * nm};
  EXPECT_LT(rel_diff(rect_wire_field_finite(longer, 1.0, nv1), rect_wire_field_infinite_exact(longer, 1.0, nv1)),
            1e-3);
}

TEST(RectFinite, MatchesBruteForce) {
  for (const LabPoint p : {LabPoint{-83.9 * nm, 0, -8.6 * nm}, LabPoint{20 * nm, 120 * nm, -30 * nm},
                           LabPoint{-150 * nm, -260 * nm, -5 * nm}}) {
    EXPECT_LT(rel_diff(rect_wire_field_finite(kWire, 1.0, p), brute_force_finite(kWire, 1.0, p)), 2e-6);
  }
}

TEST(RectFinite, MidplaneSymmetry) {
  const LabPoint p{-60 * nm, 0, -12 * nm};
  const auto b = rect_wire_field_finite(kWire, 1.0, p);
  EXPECT_EQ(b.y, 0.0);
  const auto up = rect_wire_field_finite(kWire, 1.0, {p.x, 80 * nm, p.z});
  const auto down = rect_wire_field_finite(kWire, 1.0, {p.x, -80 * nm, p.z});
  EXPECT_NEAR(up.x, down.x, 1e-9 * std::abs(up.x));
  EXPECT_NEAR(up.z, down.z, 1e-9 * std::abs(up.z));
}

TEST(RectFinite, PercentScaleReductionAtMidplane) {
  const LabPoint p{-84 * nm, 0, -10 * nm};
  const double ratio = rect_wire_field_finite(kWire, 1.0, p).norm() / rect_wire_field_infinite_exact(kWire, 1.0, p).norm();
  EXPECT_LT(ratio, 0.999);
  EXPECT_GT(ratio, 0.9);
}

TEST(WireField, LinearInCurrent) {
  const LabPoint p{-70 * nm, 30 * nm, -15 * nm};
  for (auto field : {+[](double i, const LabPoint& q) { return thin_wire_field(kWire, i, q); },
                     +[](double i, const LabPoint& q) { return rect_wire_field_infinite(kWire, i, q); },
                     +[](double i, const LabPoint& q) { return rect_wire_field_finite(kWire, i, q); }}) {
    const auto one = field(1e-3, p);
    const auto three = field(-3e-3, p);
    EXPECT_NEAR(three.x, -3 * one.x, 1e-12 * std::abs(one.x));
    EXPECT_NEAR(three.z, -3 * one.z, 1e-12 * std::abs(one.z));
  }
}

TEST(WireField, MirrorSymmetryInfinite) {
  const auto axis = NVAxis::standard();
  for (double x : {10 * nm, 55 * nm, 140 * nm}) {
    for (double z : {-3 * nm, -25 * nm}) {
      const auto left = rect_wire_field_infinite_exact(kWire, 1.0, {-x, 0, z});
      const auto right = rect_wire_field_infinite_exact(kWire, 1.0, {x, 0, z});
      EXPECT_NEAR(left.x, right.x, 1e-12 * std::abs(left.x));
      EXPECT_NEAR(left.z, -right.z, 1e-12 * std::abs(left.z));
      const auto al = alpha_map(kWire, {-x, 0, z}, axis, WireModel::infinite);
      const auto ar = alpha_map(kWire, {x, 0, z}, axis, WireModel::infinite);
      EXPECT_NEAR(al.alpha_z, -ar.alpha_z, 1e-12);
      EXPECT_NEAR(al.alpha_perp, ar.alpha_perp, 1e-12);
    }
  }
}

TEST(WireField, ReflectionThroughCenterPlaneLeavesAlphaInvariant) {
  const auto axis = NVAxis::standard();
  for (double x : {-120 * nm, -30 * nm, 45 * nm}) {
    for (double z : {-2 * nm, -40 * nm}) {
      const auto below = alpha_map(kWire, {x, 0, z}, axis, WireModel::infinite);
      const auto above = alpha_map(kWire, {x, 0, kWire.thickness - z}, axis, WireModel::infinite);
      EXPECT_NEAR(below.alpha_z, above.alpha_z, 1e-9);
      EXPECT_NEAR(below.alpha_perp, above.alpha_perp, 1e-9);
    }
  }
}

TEST(NVAxisTest, StandardConfiguration) {
  const auto u = NVAxis::standard().lab();
  EXPECT_NEAR(u.x(), 0.0, 1e-15);
  EXPECT_NEAR(u.y(), std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(u.z(), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(u.norm(), 1.0, 1e-12);
  EXPECT_THROW(NVAxis::from_lab(Eigen::Vector3d(0, 1, 1)), Error);
  EXPECT_THROW(NVAxis::from_crystal({1, 1, 1}, {1, 1, 1}, {0, 0, 1}), Error);
}

TEST(Projection, ParallelAndOrthogonal) {
  const Eigen::Vector3d u = NVAxis::standard().lab();
  const auto par = project_to_nv_frame({2 * u.x(), 2 * u.y(), 2 * u.z()}, u);
  EXPECT_NEAR(par.parallel, 2.0, 1e-15);
  EXPECT_NEAR(par.transverse, 0.0, 1e-7);
  const auto orth = project_to_nv_frame({3.0, 0, 0}, u);
  EXPECT_NEAR(orth.parallel, 0.0, 1e-15);
  EXPECT_NEAR(orth.transverse, 3.0, 1e-15);
  EXPECT_THROW(project_to_nv_frame({1, 0, 0}, Eigen::Vector3d(0, 0, 2)), Error);
}

TEST(Projection, InfiniteWireComponents) {
  const auto axis = NVAxis::standard();
  const LabVector b{-0.52, 0, 2.29};
  const auto c = project_to_nv_frame(b, axis);
  EXPECT_NEAR(c.parallel, b.z / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(c.transverse, std::sqrt(b.x * b.x + 2.0 / 3.0 * b.z * b.z), 1e-14);
}

TEST(AlphaMap, ConsistentWithMeasuredSlopesAtShallowSite) {
  const auto a = alpha_map(kWire, {-83.9 * nm, 0, -8.6 * nm}, NVAxis::standard(), WireModel::infinite);
  EXPECT_NEAR(a.alpha_z, 1.4, 0.1);
  EXPECT_NEAR(a.alpha_perp, 1.9, 0.3);
}

TEST(AlphaMap, TransverseRatioPositiveBelowSurface) {
  const auto axis = NVAxis::standard();
  for (double x = -300 * nm; x <= 300 * nm; x += 10 * nm)
    for (double z = -100 * nm; z <= -1 * nm; z += 3 * nm)
      EXPECT_GT(alpha_map(kWire, {x, 0, z}, axis, WireModel::infinite).alpha_perp, 0.0);
}

TEST(AlphaMap, DoublingWidthChangesSmoothlyFarAway) {
  const auto axis = NVAxis::standard();
  WireGeometry wide = kWire;
  wide.width *= 2;
  for (double x : {-200 * nm, -150 * nm, 100 * nm}) {
    const auto a = alpha_map(kWire, {x, 0, -10 * nm}, axis, WireModel::infinite);
    const auto b = alpha_map(wide, {x, 0, -10 * nm}, axis, WireModel::infinite);
    EXPECT_LT(std::abs(b.alpha_perp / a.alpha_perp - 1), 0.1);
    EXPECT_LT(std::abs(b.alpha_z / a.alpha_z - 1), 0.1);
  }
}

TEST(AlphaMap, ScalingActsOnLabComponents) {
  const auto axis = NVAxis::standard();
  const LabPoint p{-84 * nm, 0, -9 * nm};
  const auto base = alpha_map(kWire, p, axis, WireModel::infinite);
  const auto scaled = alpha_map(kWire, p, axis, WireModel::infinite, {1.0, 1.1});
  EXPECT_NEAR(scaled.alpha_z, 1.1 * base.alpha_z, 1e-12);
}

TEST(FieldMagnitudeGrid, AmpereScaleAndSymmetry) {
  GridSpec spec{-100 * nm, 100 * nm, 41, kWire.thickness / 2 - 100 * nm, -1 * nm, 21};
  const Grid2D grid = field_magnitude_grid(kWire, 1 * mA, spec);
  EXPECT_NEAR(grid.at(20, 0), 2.0 * mT, 0.01 * 2.0 * mT);
  for (std::size_t j = 0; j < spec.nz; ++j)
    for (std::size_t i = 0; i < spec.nx; ++i)
      EXPECT_NEAR(grid.at(i, j), grid.at(spec.nx - 1 - i, j), 1e-12 * grid.at(i, j));
}

TEST(FieldMagnitudeGrid, MaximumSitsNextToTheConductor) {
  GridSpec spec{-150 * nm, 150 * nm, 61, -100 * nm, -1 * nm, 34};
  const Grid2D grid = field_magnitude_grid(kWire, 1 * mA, spec);
  auto distance = [&](double x, double z) {
    const double dx = std::max(0.0, std::abs(x) - kWire.width / 2);
    const double dz = std::max(0.0, -z);
    return std::hypot(dx, dz);
  };
  std::size_t best = 0;
  double nearest = 1;
  for (std::size_t k = 0; k < grid.values.size(); ++k) {
    if (grid.values[k] > grid.values[best]) best = k;
    nearest = std::min(nearest, distance(spec.x(k % spec.nx), spec.z(k / spec.nx)));
  }
  EXPECT_NEAR(distance(spec.x(best % spec.nx), spec.z(best / spec.nx)), nearest, 1e-15);
}

TEST(FieldMagnitudeGrid, SinglePoint) {
  GridSpec spec{-50 * nm, -50 * nm, 1, -10 * nm, -10 * nm, 1};
  const Grid2D grid = field_magnitude_grid(kWire, 1 * mA, spec);
  ASSERT_EQ(grid.values.size(), 1u);
  EXPECT_NEAR(grid.values[0], rect_wire_field_infinite_exact(kWire, 1 * mA, {-50 * nm, 0, -10 * nm}).norm(), 0);
}
