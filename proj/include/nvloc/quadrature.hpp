#ifndef NVLOC_QUADRATURE_HPP
#define NVLOC_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <sstream>
#include <tuple>
#include <vector>

#include "nvloc/errors.hpp"

namespace nvloc {

struct QuadratureOptions {
  double rel_tol = 1e-6;
  double abs_tol = 0;
  int max_intervals = 4000;
};

template <std::size_t N>
struct QuadratureResult {
  std::array<double, N> value{};
  double error = 0;
  int evaluations = 0;
  int intervals = 0;
};

namespace detail {

// 15-point Kronrod nodes (non-negative half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes.
inline constexpr std::array<double, 8> kKronrodNodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct Panel {
  double a = 0, b = 0;
  std::array<double, N> value{};
  double error = 0;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <std::size_t N, class F>
Panel<N> gauss_kronrod_15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::array<double, N> kronrod{};
  std::array<double, N> gauss{};

  const std::array<double, N> fc = f(center);
  for (std::size_t c = 0; c < N; ++c) {
    kronrod[c] = kKronrodWeights[7] * fc[c];
    gauss[c] = kGaussWeights[3] * fc[c];
  }
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const std::array<double, N> f1 = f(center - dx);
    const std::array<double, N> f2 = f(center + dx);
    for (std::size_t c = 0; c < N; ++c) {
      kronrod[c] += kKronrodWeights[j] * (f1[c] + f2[c]);
      if (j % 2 == 1) gauss[c] += kGaussWeights[j / 2] * (f1[c] + f2[c]);
    }
  }
  Panel<N> p{a, b, {}, 0};
  for (std::size_t c = 0; c < N; ++c) {
    p.value[c] = kronrod[c] * half;
    p.error = std::max(p.error, std::abs((kronrod[c] - gauss[c]) * half));
  }
  return p;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7-15) integration of a vector-valued
/// integrand f: double -> std::array<double, N> over [a, b].
/// Stops when the summed error estimate is below
/// max(abs_tol, rel_tol * max_c |I_c|); optional breakpoints split [a, b]
/// up front (use them for known kinks or jumps).
template <std::size_t N, class F>
QuadratureResult<N> integrate(F&& f, double a, double b, const QuadratureOptions& opt = {},
                              const std::vector<double>& breakpoints = {}) {
  QuadratureResult<N> out;
  if (a == b) return out;
  std::vector<double> edges{a};
  for (double x : breakpoints)
    if (x > std::min(a, b) && x < std::max(a, b)) edges.push_back(x);
  edges.push_back(b);
  std::sort(edges.begin() + 1, edges.end() - 1, [&](double l, double r) { return (l < r) == (a < b); });

  std::priority_queue<detail::Panel<N>> heap;
  auto total = [&] {
    std::array<double, N> value{};
    double error = 0;
    auto copy = heap;
    while (!copy.empty()) {
      for (std::size_t c = 0; c < N; ++c) value[c] += copy.top().value[c];
      error += copy.top().error;
      copy.pop();
    }
    return std::pair{value, error};
  };

  std::array<double, N> value{};
  double error = 0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    auto p = detail::gauss_kronrod_15<N>(f, edges[k], edges[k + 1]);
    for (std::size_t c = 0; c < N; ++c) value[c] += p.value[c];
    error += p.error;
    heap.push(p);
    out.evaluations += 15;
  }

  // Round-off floor: a result that cancels to ~0 cannot be resolved
  // relative to itself, only relative to the magnitudes that cancelled.
  double magnitude = 0;
  {
    auto copy = heap;
    while (!copy.empty()) {
      for (double v : copy.top().value) magnitude = std::max(magnitude, std::abs(v));
      copy.pop();
    }
  }
  auto target = [&] {
    double scale = 0;
    for (double v : value) scale = std::max(scale, std::abs(v));
    return std::max({opt.abs_tol, opt.rel_tol * scale, 1e-13 * magnitude});
  };

  int refreshed = 0;
  while (error > target()) {
    if (static_cast<int>(heap.size()) >= opt.max_intervals) {
      std::ostringstream msg;
      msg << "adaptive quadrature did not converge on [" << a << ", " << b << "]: error estimate "
          << error << " vs target " << target() << " after " << heap.size() << " intervals and "
          << out.evaluations << " evaluations";
      fail(ErrorKind::numerical, msg.str());
    }
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gauss_kronrod_15<N>(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15<N>(f, mid, worst.b);
    out.evaluations += 30;
    for (std::size_t c = 0; c < N; ++c) value[c] += left.value[c] + right.value[c] - worst.value[c];
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    // Re-sum periodically so round-off in the running totals cannot stall.
    if (++refreshed % 64 == 0) std::tie(value, error) = total();
  }
  std::tie(value, error) = total();
  out.value = value;
  out.error = error;
  out.intervals = static_cast<int>(heap.size());
  return out;
}

/// Scalar convenience wrapper.
template <class F>
double integrate_scalar(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  auto wrapped = [&](double x) { return std::array<double, 1>{f(x)}; };
  return integrate<1>(wrapped, a, b, opt).value[0];
}

}  // namespace nvloc

#endif  // NVLOC_QUADRATURE_HPP
