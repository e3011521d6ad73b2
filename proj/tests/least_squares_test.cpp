#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nvloc/least_squares.hpp"

using namespace nvloc;

TEST(FitLine, ExactTwoPointLine) {
  const std::vector<double> x{1.0, 3.0}, y{2.0, 6.0};
  const auto f = fit_line(x, y);
  EXPECT_DOUBLE_EQ(f.slope, 2.0);
  EXPECT_NEAR(f.intercept, 0.0, 1e-15);
  EXPECT_EQ(f.dof, 0u);
  EXPECT_EQ(f.slope_se, 0.0);
}

TEST(FitLine, MatchesClosedFormStandardErrors) {
  // Reference: numpy.polyfit(x, y, 1, cov=True).
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1.1, 2.9, 5.2, 7.1, 8.8};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 1.96, 1e-12);
  EXPECT_NEAR(f.intercept, 1.1, 1e-12);
  EXPECT_NEAR(f.slope_se, 0.05537749241945377, 1e-12);
  EXPECT_NEAR(f.intercept_se, 0.1356465996625052, 1e-12);
  EXPECT_EQ(f.dof, 3u);
}

TEST(FitLine, WeightedFitPrefersPrecisePoints) {
  const std::vector<double> x{0, 1, 2}, y{0, 1, 10}, w{1e6, 1e6, 1e-6};
  const auto f = fit_line(x, y, w);
  EXPECT_NEAR(f.slope, 1.0, 1e-4);
}

TEST(FitLine, DegenerateInputs) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(fit_line(one, one), Error);
  const std::vector<double> x{2, 2, 2}, y{1, 2, 3};
  try {
    fit_line(x, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(LevenbergMarquardt, ExponentialDecay) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0, 0.01);
  std::vector<double> t, y;
  for (int k = 0; k < 50; ++k) {
    t.push_back(0.1 * k);
    y.push_back(2.0 * std::exp(-0.7 * t.back()) + noise(rng));
  }
  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(50);
    j.resize(50, 2);
    for (int k = 0; k < 50; ++k) {
      const double e = std::exp(-p(1) * t[k]);
      r(k) = p(0) * e - y[k];
      j(k, 0) = e;
      j(k, 1) = -p(0) * t[k] * e;
    }
  };
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.1;
  const auto fit = levenberg_marquardt(model, x0);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params(0), 2.0, 3 * fit.standard_errors(0) + 1e-9);
  EXPECT_NEAR(fit.params(1), 0.7, 3 * fit.standard_errors(1) + 1e-9);
  EXPECT_LT(fit.iterations, 200);
}

TEST(LevenbergMarquardt, Rosenbrock) {
  auto model = [](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(2);
    j.resize(2, 2);
    r << 10 * (p(1) - p(0) * p(0)), 1 - p(0);
    j << -20 * p(0), 10, -1, 0;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const auto fit = levenberg_marquardt(model, x0);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params(0), 1.0, 1e-8);
  EXPECT_NEAR(fit.params(1), 1.0, 1e-8);
}
