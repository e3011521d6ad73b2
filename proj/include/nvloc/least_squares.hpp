#ifndef NVLOC_LEAST_SQUARES_HPP
#define NVLOC_LEAST_SQUARES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "nvloc/errors.hpp"

namespace nvloc {

struct LmOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-8;  // max_j |J_j . r| / (|J_j| |r|)
  double step_tol = 1e-12;     // relative parameter step
  double initial_lambda = 1e-3;
  bool absolute_sigma = false;  // residuals already divided by known sigmas
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd standard_errors;
  double rss = 0;
  double scaled_gradient = 0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt with Marquardt's diagonal scaling.
///
/// `model(params, residuals, jacobian)` fills the residual vector and its
/// analytic Jacobian. Converged when the scaled gradient drops below
/// gradient_tol or the relative step below step_tol. Covariance is
/// s^2 (J^T J)^-1 with s^2 = rss / (n - p), or (J^T J)^-1 with absolute_sigma.
template <class Model>
LmResult levenberg_marquardt(Model&& model, Eigen::VectorXd x0, const LmOptions& opt = {}) {
  const Eigen::Index p = x0.size();
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  model(x0, r, jac);
  const Eigen::Index n = r.size();
  require(n >= p, "least squares needs at least as many residuals as parameters");

  LmResult out;
  out.params = x0;
  double rss = r.squaredNorm();
  double lambda = opt.initial_lambda;

  auto scaled_gradient = [&](const Eigen::MatrixXd& j, const Eigen::VectorXd& res) {
    const double rn = res.norm();
    if (rn == 0) return 0.0;
    const Eigen::VectorXd g = j.transpose() * res;
    double worst = 0;
    for (Eigen::Index k = 0; k < p; ++k) {
      const double cn = j.col(k).norm();
      if (cn > 0) worst = std::max(worst, std::abs(g(k)) / (cn * rn));
    }
    return worst;
  };

  Eigen::VectorXd r_try;
  Eigen::MatrixXd j_try;
  for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
    out.scaled_gradient = scaled_gradient(jac, r);
    if (out.scaled_gradient < opt.gradient_tol) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);

    bool accepted = false;
    bool tiny_step = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd x_try = out.params + step;
      model(x_try, r_try, j_try);
      const double rss_try = r_try.allFinite() ? r_try.squaredNorm() : std::numeric_limits<double>::infinity();
      tiny_step = step.norm() <= opt.step_tol * (out.params.norm() + opt.step_tol);
      if (rss_try < rss) {
        out.params = x_try;
        r.swap(r_try);
        jac.swap(j_try);
        rss = rss_try;
        lambda = std::max(lambda / 10, 1e-12);
        accepted = true;
        break;
      }
      if (tiny_step) break;
      lambda *= 10;
    }
    if (tiny_step || !accepted) {
      out.scaled_gradient = scaled_gradient(jac, r);
      out.converged = tiny_step;
      if (accepted) ++out.iterations;
      break;
    }
  }
  if (out.iterations >= opt.max_iterations) out.scaled_gradient = scaled_gradient(jac, r);

  out.rss = rss;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::MatrixXd inv = jtj.completeOrthogonalDecomposition().pseudoInverse();
  const double s2 = opt.absolute_sigma ? 1.0 : (n > p ? rss / static_cast<double>(n - p) : 0.0);
  out.covariance = s2 * inv;
  out.standard_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

/// Straight-line fit y = slope * x + intercept.
struct LinearFit {
  double slope = 0;
  double slope_se = 0;
  double intercept = 0;
  double intercept_se = 0;
  double residual_rms = 0;
  std::size_t points = 0;
  std::size_t dof = 0;
};

/// (Weighted) ordinary least squares. Needs at least two distinct x; with
/// exactly two points the line is exact and standard errors are 0 (dof = 0).
/// Weights, when given, are inverse variances.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y,
                          std::span<const double> weights = {}) {
  require(x.size() == y.size(), "fit_line: x and y lengths differ");
  require(weights.empty() || weights.size() == x.size(), "fit_line: weight length mismatch");
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorKind::insufficient_data, "fit_line: need at least two points");
  auto w = [&](std::size_t k) { return weights.empty() ? 1.0 : weights[k]; };

  double sw = 0, sx = 0, sy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    require(w(k) > 0 && std::isfinite(w(k)), "fit_line: weights must be positive");
    sw += w(k);
    sx += w(k) * x[k];
    sy += w(k) * y[k];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += w(k) * (x[k] - xm) * (x[k] - xm);
    sxy += w(k) * (x[k] - xm) * (y[k] - ym);
  }
  const double xscale = std::max(std::abs(xm), 1e-300);
  if (!(sxx > 1e-24 * sw * xscale * xscale) || sxx == 0)
    fail(ErrorKind::insufficient_data, "fit_line: all x values are identical");

  LinearFit f;
  f.points = n;
  f.dof = n - 2;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  double chi2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double res = y[k] - (f.slope * x[k] + f.intercept);
    chi2 += w(k) * res * res;
  }
  f.residual_rms = std::sqrt(chi2 / sw);
  if (f.dof > 0) {
    // With inverse-variance weights the scale is absolute.
    const double s2 = weights.empty() ? chi2 / static_cast<double>(f.dof) : 1.0;
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / sw + xm * xm / sxx));
  }
  return f;
}

}  // namespace nvloc

#endif  // NVLOC_LEAST_SQUARES_HPP
