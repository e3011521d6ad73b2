#include <gtest/gtest.h>

#include <cmath>

#include "nvloc/quadrature.hpp"

using namespace nvloc;

TEST(Quadrature, PolynomialIsExact) {
  const double v = integrate_scalar([](double x) { return 3 * x * x - 2 * x + 1; }, -1.0, 2.0);
  EXPECT_NEAR(v, 9.0 - 3.0 + 3.0, 1e-13);
}

TEST(Quadrature, SmoothIntegrands) {
  EXPECT_NEAR(integrate_scalar([](double x) { return std::exp(-x * x); }, -6.0, 6.0), std::sqrt(M_PI), 1e-10);
  EXPECT_NEAR(integrate_scalar([](double x) { return std::sin(x); }, 0.0, M_PI), 2.0, 1e-10);
}

TEST(Quadrature, EndpointLogSingularity) {
  QuadratureOptions opt;
  opt.rel_tol = 1e-10;
  EXPECT_NEAR(integrate_scalar([](double x) { return std::log(x); }, 0.0, 1.0, opt), -1.0, 1e-9);
}

TEST(Quadrature, ReversedInterval) {
  EXPECT_NEAR(integrate_scalar([](double x) { return x; }, 1.0, 0.0), -0.5, 1e-14);
}

TEST(Quadrature, VectorValuedWithBreakpoint) {
  auto f = [](double x) { return std::array<double, 2>{x < 0.3 ? 1.0 : 2.0, std::abs(x - 0.3)}; };
  const auto r = integrate<2>(f, 0.0, 1.0, {}, {0.3});
  EXPECT_NEAR(r.value[0], 0.3 + 1.4, 1e-12);
  EXPECT_NEAR(r.value[1], 0.5 * (0.09 + 0.49), 1e-12);
  EXPECT_EQ(r.intervals, 2);
}

TEST(Quadrature, HalvingToleranceMovesResultLessThanTolerance) {
  auto f = [](double x) { return 1.0 / (1e-3 + x * x); };
  QuadratureOptions coarse;
  coarse.rel_tol = 1e-6;
  QuadratureOptions fine;
  fine.rel_tol = 0.5e-6;
  const double a = integrate_scalar(f, -1.0, 1.0, coarse);
  const double b = integrate_scalar(f, -1.0, 1.0, fine);
  EXPECT_LT(std::abs(a - b), 1e-6 * std::abs(b));
  const double exact = 2.0 / std::sqrt(1e-3) * std::atan(1.0 / std::sqrt(1e-3));
  EXPECT_NEAR(b, exact, 1e-6 * exact);
}

TEST(Quadrature, NonConvergenceReportsDiagnostics) {
  QuadratureOptions opt;
  opt.max_intervals = 3;
  opt.rel_tol = 1e-14;
  try {
    integrate_scalar([](double x) { return std::sin(200 * x); }, 0.0, 10.0, opt);
    FAIL() << "expected a numerical error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_NE(std::string(e.what()).find("intervals"), std::string::npos);
  }
}
