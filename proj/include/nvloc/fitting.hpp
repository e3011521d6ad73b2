#ifndef NVLOC_FITTING_HPP
#define NVLOC_FITTING_HPP

// Turns measured series into field-per-current ratios:
//   ODMR spectra  -> four Gaussian dips -> |B_z| per spectrum -> alpha_z
//   nutation data -> sinusoid frequency -> B_perp per trace  -> alpha_perp
// plus seeded synthetic generators used as round-trip oracles.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nvloc/errors.hpp"
#include "nvloc/least_squares.hpp"
#include "nvloc/parallel.hpp"
#include "nvloc/spin_model.hpp"
#include "nvloc/units.hpp"

namespace nvloc {

// ---------------------------------------------------------------------------
// Data series
// ---------------------------------------------------------------------------

struct OdmrSpectrum {
  std::vector<double> frequency;  // Hz, strictly increasing
  std::vector<double> pl;         // counts/s
  double current = 0;             // A
  std::vector<double> noise;      // optional per-point sigma, counts/s

  void validate() const {
    require(frequency.size() == pl.size(), "ODMR spectrum: frequency and PL lengths differ");
    require(frequency.size() >= 16, "ODMR spectrum: need at least 16 samples");
    require(noise.empty() || noise.size() == pl.size(), "ODMR spectrum: noise length mismatch");
    for (std::size_t k = 1; k < frequency.size(); ++k)
      require(frequency[k] > frequency[k - 1], "ODMR spectrum: frequencies must be strictly increasing");
  }
};

struct NutationTrace {
  std::vector<double> delay;   // s, strictly increasing
  std::vector<double> signal;  // normalized PL contrast
  double current = 0;          // A

  void validate() const {
    require(delay.size() == signal.size(), "nutation trace: delay and signal lengths differ");
    require(delay.size() >= 16, "nutation trace: need at least 16 samples");
    for (std::size_t k = 1; k < delay.size(); ++k)
      require(delay[k] > delay[k - 1], "nutation trace: delays must be strictly increasing");
  }
};

/// One (current, field) point of a field-versus-current series.
struct CurrentSample {
  double current = 0;  // A
  double value = 0;    // T
  double sigma = 0;    // T, 0 when unknown
};

// ---------------------------------------------------------------------------
// Four-Gaussian ODMR fit
// ---------------------------------------------------------------------------

struct GaussianLine {
  double center = 0, center_se = 0;        // Hz
  double sigma = 0, sigma_se = 0;          // Hz
  double amplitude = 0, amplitude_se = 0;  // counts/s, negative for dips
  Branch branch = Branch::plus;
  double m_i = 0.5;
};

struct GaussianQuadruplet {
  double baseline = 0, baseline_se = 0;
  std::array<GaussianLine, 4> lines{};  // centers ascending
  std::array<std::array<double, 4>, 4> center_covariance{};  // Hz^2, in line order; zero if unknown
  double rss = 0;
  double residual_rms = 0;
  int iterations = 0;
  // Set when the two branch means are closer than 2 A_z, so the lower and
  // upper line pairs cannot be told apart from the doublet structure.
  bool labels_ambiguous = false;
};

struct FourGaussianOptions {
  int smoothing_window = 5;
  double prominence = 4.0;  // in units of the smoothed noise level
  LmOptions lm{};
};

namespace detail {

inline std::vector<double> moving_average(std::span<const double> y, int window) {
  const int n = static_cast<int>(y.size());
  const int half = std::max(window, 1) / 2;
  std::vector<double> out(y.size());
  for (int k = 0; k < n; ++k) {
    const int lo = std::max(0, k - half), hi = std::min(n - 1, k + half);
    double s = 0;
    for (int j = lo; j <= hi; ++j) s += y[j];
    out[k] = s / (hi - lo + 1);
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

/// Robust white-noise sigma from first differences (MAD estimator).
inline double difference_noise(std::span<const double> y) {
  std::vector<double> d;
  for (std::size_t k = 1; k < y.size(); ++k) d.push_back(y[k] - y[k - 1]);
  const double m = median(d);
  for (double& v : d) v = std::abs(v - m);
  return 1.4826 * median(d) / std::sqrt(2.0);
}

struct Dip {
  std::size_t index = 0;
  double depth = 0;
};

/// Local minima of the smoothed trace that are deeper than the threshold
/// and separated from their neighbours by a rise of at least `prominence`.
inline std::vector<Dip> find_dips(const std::vector<double>& s, double baseline, double threshold,
                                  double prominence) {
  std::vector<Dip> dips;
  for (std::size_t k = 1; k + 1 < s.size(); ++k) {
    if (s[k] <= s[k - 1] && s[k] < s[k + 1] && baseline - s[k] > threshold) dips.push_back({k, baseline - s[k]});
  }
  bool merged = true;
  while (merged && dips.size() > 1) {
    merged = false;
    for (std::size_t k = 0; k + 1 < dips.size(); ++k) {
      const auto a = dips[k], b = dips[k + 1];
      const double ridge = *std::max_element(s.begin() + static_cast<std::ptrdiff_t>(a.index),
                                             s.begin() + static_cast<std::ptrdiff_t>(b.index) + 1);
      if (ridge - std::max(s[a.index], s[b.index]) < prominence) {
        dips.erase(dips.begin() + static_cast<std::ptrdiff_t>(a.depth >= b.depth ? k + 1 : k));
        merged = true;
        break;
      }
    }
  }
  return dips;
}

}  // namespace detail

/// Labels the four lines: lower pair is the - branch, upper pair the +
/// branch (so the recovered B_z is non-negative; the spectrum alone cannot
/// fix its sign). On the + branch the upper line is m_I = +1/2, on the
/// - branch the lower one.
inline void assign_branches(GaussianQuadruplet& q, const SpinConstants& c) {
  std::sort(q.lines.begin(), q.lines.end(), [](const auto& a, const auto& b) { return a.center < b.center; });
  q.lines[0].branch = Branch::minus;
  q.lines[0].m_i = 0.5;
  q.lines[1].branch = Branch::minus;
  q.lines[1].m_i = -0.5;
  q.lines[2].branch = Branch::plus;
  q.lines[2].m_i = -0.5;
  q.lines[3].branch = Branch::plus;
  q.lines[3].m_i = 0.5;
  const double separation =
      0.5 * (q.lines[2].center + q.lines[3].center) - 0.5 * (q.lines[0].center + q.lines[1].center);
  q.labels_ambiguous = separation < 2 * c.hyperfine_parallel;
}

/// Least-squares fit of baseline + four Gaussians. Initial guesses come from
/// dips of the moving-average-smoothed spectrum.
inline GaussianQuadruplet fit_four_gaussians(const OdmrSpectrum& s, const SpinConstants& c = {},
                                             const FourGaussianOptions& opt = {}) {
  s.validate();
  const std::size_t n = s.frequency.size();
  const double f_ref = 0.5 * (s.frequency.front() + s.frequency.back());
  const double f_scale = units::MHz;

  const double baseline = detail::median(s.pl);
  require(baseline > 0 || baseline < 0, "ODMR spectrum: zero baseline");
  const double y_scale = std::abs(baseline);
  std::vector<double> x(n), y(n), w(n, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = (s.frequency[k] - f_ref) / f_scale;
    y[k] = s.pl[k] / y_scale;
    if (!s.noise.empty()) {
      require(s.noise[k] > 0, "ODMR spectrum: noise estimates must be positive");
      w[k] = y_scale / s.noise[k];
    }
  }

  const auto smoothed = detail::moving_average(y, opt.smoothing_window);
  const double noise = detail::difference_noise(y) / std::sqrt(static_cast<double>(std::max(opt.smoothing_window, 1)));
  const double level = std::max(noise, 1e-12);
  auto dips = detail::find_dips(smoothed, 1.0, opt.prominence * level, opt.prominence * level);
  if (dips.size() < 4) {
    std::ostringstream msg;
    msg << "under-resolved spectrum: found " << dips.size()
        << " resolvable dips, need 4; widen the scan or improve the signal";
    fail(ErrorKind::under_resolved, msg.str());
  }
  std::stable_sort(dips.begin(), dips.end(), [](const auto& a, const auto& b) { return a.depth > b.depth; });
  dips.resize(4);
  std::sort(dips.begin(), dips.end(), [](const auto& a, const auto& b) { return a.index < b.index; });

  // Parameters: baseline, then (center, sigma, amplitude) per line.
  Eigen::VectorXd p0(13);
  p0(0) = 1.0;
  const double step = x[1] - x[0];
  for (int k = 0; k < 4; ++k) {
    const std::size_t i = dips[k].index;
    const double half = 1.0 - 0.5 * dips[k].depth;
    std::size_t lo = i, hi = i;
    while (lo > 0 && smoothed[lo] < half) --lo;
    while (hi + 1 < n && smoothed[hi] < half) ++hi;
    double sigma = std::min(x[i] - x[lo], x[hi] - x[i]) / 1.1774;
    double spacing = 1e300;
    if (k > 0) spacing = std::min(spacing, x[i] - x[dips[k - 1].index]);
    if (k < 3) spacing = std::min(spacing, x[dips[k + 1].index] - x[i]);
    sigma = std::clamp(sigma, 1.5 * step, std::max(0.5 * spacing, 1.5 * step));
    p0(1 + 3 * k) = x[i];
    p0(2 + 3 * k) = sigma;
    p0(3 + 3 * k) = -dips[k].depth;
  }

  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(static_cast<Eigen::Index>(n));
    j.setZero(static_cast<Eigen::Index>(n), 13);
    for (std::size_t k = 0; k < n; ++k) {
      double m = p(0);
      j(k, 0) = w[k];
      for (int l = 0; l < 4; ++l) {
        const double cen = p(1 + 3 * l), sig = p(2 + 3 * l), amp = p(3 + 3 * l);
        const double d = x[k] - cen;
        const double g = std::exp(-0.5 * d * d / (sig * sig));
        m += amp * g;
        j(k, 1 + 3 * l) = w[k] * amp * g * d / (sig * sig);
        j(k, 2 + 3 * l) = w[k] * amp * g * d * d / (sig * sig * sig);
        j(k, 3 + 3 * l) = w[k] * g;
      }
      r(k) = w[k] * (m - y[k]);
    }
  };

  LmOptions lm = opt.lm;
  lm.absolute_sigma = !s.noise.empty();
  const LmResult fit = levenberg_marquardt(model, p0, lm);
  if (!fit.converged || !fit.params.allFinite()) {
    std::ostringstream msg;
    msg << "four-Gaussian fit did not converge after " << fit.iterations << " iterations (scaled gradient "
        << fit.scaled_gradient << ", residual rms " << std::sqrt(fit.rss / static_cast<double>(n)) * y_scale
        << " counts/s)";
    fail(ErrorKind::fit_failure, msg.str());
  }

  GaussianQuadruplet q;
  q.baseline = fit.params(0) * y_scale;
  q.baseline_se = fit.standard_errors(0) * y_scale;
  std::array<int, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return fit.params(1 + 3 * a) < fit.params(1 + 3 * b); });
  for (int k = 0; k < 4; ++k) {
    const int l = order[k];
    auto& line = q.lines[k];
    line.center = f_ref + fit.params(1 + 3 * l) * f_scale;
    line.center_se = fit.standard_errors(1 + 3 * l) * f_scale;
    line.sigma = std::abs(fit.params(2 + 3 * l)) * f_scale;
    line.sigma_se = fit.standard_errors(2 + 3 * l) * f_scale;
    line.amplitude = fit.params(3 + 3 * l) * y_scale;
    line.amplitude_se = fit.standard_errors(3 + 3 * l) * y_scale;
    for (int m = 0; m < 4; ++m)
      q.center_covariance[k][m] = fit.covariance(1 + 3 * l, 1 + 3 * order[m]) * f_scale * f_scale;
  }
  q.rss = fit.rss * y_scale * y_scale;
  q.residual_rms = std::sqrt(fit.rss / static_cast<double>(n)) * y_scale;
  q.iterations = fit.iterations;
  assign_branches(q, c);
  return q;
}

struct FieldEstimate {
  double value = 0;           // T
  double standard_error = 0;  // T
};

/// B_z = (mean of + branch centers - mean of - branch centers) / (2 gamma_e);
/// the hyperfine offsets cancel within each branch mean.
inline FieldEstimate bz_from_centers(const GaussianQuadruplet& q, const SpinConstants& c) {
  if (q.labels_ambiguous)
    fail(ErrorKind::ambiguous_branches,
         "branch assignment ambiguous: branch means are closer than 2 A_z, B_z cannot be separated from the "
         "hyperfine doublets");
  double plus = 0, minus = 0;
  int n_plus = 0, n_minus = 0;
  std::array<double, 4> v{};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& line = q.lines[k];
    if (line.branch == Branch::plus) {
      plus += line.center;
      ++n_plus;
    } else {
      minus += line.center;
      ++n_minus;
    }
    v[k] = line.branch == Branch::plus ? 0.5 : -0.5;
  }
  require(n_plus == 2 && n_minus == 2, "bz_from_centers: need two lines per branch");
  // Full covariance when the fit supplied it, else independent centers.
  double var = 0;
  const bool have_cov = q.center_covariance[0][0] > 0;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      if (have_cov) var += v[a] * v[b] * q.center_covariance[a][b];
      else if (a == b) var += v[a] * v[a] * q.lines[a].center_se * q.lines[a].center_se;
  const double scale = 1.0 / (2 * c.gamma_e);
  return {(plus / 2 - minus / 2) * scale, std::sqrt(std::max(var, 0.0)) * scale};
}

namespace detail {

inline std::size_t distinct_count(std::span<const CurrentSample> s, bool magnitudes = false) {
  std::set<double> seen;
  for (const auto& p : s) seen.insert(magnitudes ? std::abs(p.current) : p.current);
  return seen.size();
}

}  // namespace detail

namespace detail {

/// Line through the samples. When every point carries a sigma the fit is
/// inverse-variance weighted and its standard errors are scaled up by
/// sqrt(chi2 / dof) if the scatter exceeds the stated errors; otherwise
/// plain OLS with errors from the residuals.
inline LinearFit series_line(std::span<const CurrentSample> series, bool fold) {
  std::vector<double> x, y, w;
  bool weighted = true;
  for (const auto& p : series) {
    x.push_back(fold ? std::abs(p.current) : p.current);
    y.push_back(p.value);
    weighted = weighted && p.sigma > 0 && std::isfinite(p.sigma);
    w.push_back(p.sigma > 0 ? 1.0 / (p.sigma * p.sigma) : 0.0);
  }
  if (!weighted) return fit_line(x, y);
  LinearFit f = fit_line(x, y, w);
  if (f.dof > 0) {
    double chi2 = 0;
    for (std::size_t k = 0; k < x.size(); ++k) chi2 += w[k] * std::pow(y[k] - f.slope * x[k] - f.intercept, 2);
    const double birge = std::sqrt(std::max(1.0, chi2 / static_cast<double>(f.dof)));
    f.slope_se *= birge;
    f.intercept_se *= birge;
  }
  return f;
}

}  // namespace detail

/// Least squares of B_z against drive current: slope = alpha_z, intercept =
/// ambient field projection.
inline LinearFit extract_alpha_z(std::span<const CurrentSample> series) {
  if (detail::distinct_count(series) < 3)
    fail(ErrorKind::insufficient_data, "alpha_z extraction needs at least 3 distinct currents");
  return detail::series_line(series, false);
}

// ---------------------------------------------------------------------------
// Nutation traces
// ---------------------------------------------------------------------------

struct SinusoidFit {
  double frequency = 0, frequency_se = 0;  // Hz
  double amplitude = 0, amplitude_se = 0;
  double phase = 0, phase_se = 0;  // rad, (-pi, pi]
  double offset = 0, offset_se = 0;
  double rss = 0;
  double peak_ratio = 0;  // periodogram peak / median
  int iterations = 0;
};

struct SinusoidOptions {
  int oversample = 10;
  double min_peak_ratio = 3.0;
  double min_periods = 2.0;
  double min_amplitude_snr = 5.0;  // fitted amplitude / its standard error
  LmOptions lm{};
};

/// Periodogram |sum (y - mean) exp(-2 pi i f t)|^2 on a uniform grid from
/// 1/(oversample span) up to the mean-sampling Nyquist frequency.
inline std::pair<std::vector<double>, std::vector<double>> periodogram(std::span<const double> t,
                                                                       std::span<const double> y,
                                                                       int oversample = 10) {
  const std::size_t n = t.size();
  const double span = t.back() - t.front();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  const double df = 1.0 / (oversample * span);
  const double f_max = 0.5 * static_cast<double>(n - 1) / span;
  std::vector<double> freq, power;
  for (double f = df; f <= f_max; f += df) {
    std::complex<double> acc = 0;
    for (std::size_t k = 0; k < n; ++k)
      acc += (y[k] - mean) * std::polar(1.0, -2 * units::pi * f * (t[k] - t.front()));
    freq.push_back(f);
    power.push_back(std::norm(acc));
  }
  return {freq, power};
}

/// Fits a + b cos(2 pi f t + phi) (no decay term). The starting frequency is
/// the periodogram peak; amplitude and phase start from a linear fit at
/// that frequency.
inline SinusoidFit fit_sinusoid(const NutationTrace& trace, const SinusoidOptions& opt = {}) {
  trace.validate();
  const std::size_t n = trace.delay.size();
  const double t0 = trace.delay.front();
  const double span = trace.delay.back() - t0;

  const auto [freq, power] = periodogram(trace.delay, trace.signal, opt.oversample);
  if (freq.empty()) fail(ErrorKind::no_oscillation, "trace too short for a periodogram");
  const auto peak = std::max_element(power.begin(), power.end());
  const double med = detail::median(power);
  if (!(*peak > 0) || *peak < opt.min_peak_ratio * med) {
    std::ostringstream msg;
    msg << "no significant oscillation: periodogram peak is " << (med > 0 ? *peak / med : 0.0)
        << "x the median (need " << opt.min_peak_ratio << "x)";
    fail(ErrorKind::no_oscillation, msg.str());
  }
  const double f0 = freq[static_cast<std::size_t>(peak - power.begin())];

  // Work in t/span and f*span units.
  std::vector<double> u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = (trace.delay[k] - t0) / span;
  const double nu0 = f0 * span;

  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (std::size_t k = 0; k < n; ++k) {
    design(k, 0) = 1;
    design(k, 1) = std::cos(2 * units::pi * nu0 * u[k]);
    design(k, 2) = std::sin(2 * units::pi * nu0 * u[k]);
    rhs(k) = trace.signal[k];
  }
  const Eigen::Vector3d lin = design.colPivHouseholderQr().solve(rhs);
  Eigen::VectorXd p0(4);
  p0 << lin(0), std::hypot(lin(1), lin(2)), nu0, std::atan2(-lin(2), lin(1));

  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(static_cast<Eigen::Index>(n));
    j.resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t k = 0; k < n; ++k) {
      const double arg = 2 * units::pi * p(2) * u[k] + p(3);
      const double cs = std::cos(arg), sn = std::sin(arg);
      r(k) = p(0) + p(1) * cs - trace.signal[k];
      j(k, 0) = 1;
      j(k, 1) = cs;
      j(k, 2) = -p(1) * sn * 2 * units::pi * u[k];
      j(k, 3) = -p(1) * sn;
    }
  };
  const LmResult fit = levenberg_marquardt(model, p0, opt.lm);
  if (!fit.converged || !fit.params.allFinite())
    fail(ErrorKind::fit_failure, "sinusoid fit did not converge after " + std::to_string(fit.iterations) +
                                     " iterations");

  SinusoidFit out;
  double amp = fit.params(1), phase = fit.params(3), nu = fit.params(2);
  if (nu < 0) {
    nu = -nu;
    phase = -phase;
  }
  if (amp < 0) {
    amp = -amp;
    phase += units::pi;
  }
  phase = std::remainder(phase, 2 * units::pi);  // referenced to the first delay
  out.offset = fit.params(0);
  out.offset_se = fit.standard_errors(0);
  out.amplitude = amp;
  out.amplitude_se = fit.standard_errors(1);
  out.frequency = nu / span;
  out.frequency_se = fit.standard_errors(2) / span;
  out.phase = phase;
  out.phase_se = fit.standard_errors(3);
  out.rss = fit.rss;
  out.peak_ratio = med > 0 ? *peak / med : 0.0;
  out.iterations = fit.iterations;
  // Pure noise also passes the median test: the largest of many
  // exponentially distributed periodogram values is ~10x their median.
  if (!(out.amplitude > opt.min_amplitude_snr * out.amplitude_se)) {
    std::ostringstream msg;
    msg << "no significant oscillation: fitted amplitude is " << out.amplitude / out.amplitude_se
        << " standard errors (need " << opt.min_amplitude_snr << ")";
    fail(ErrorKind::no_oscillation, msg.str());
  }
  if (nu + 3 * std::abs(fit.standard_errors(2)) < opt.min_periods) {
    std::ostringstream msg;
    msg << "trace spans only " << nu << " periods of the fitted oscillation (need " << opt.min_periods << ")";
    fail(ErrorKind::insufficient_data, msg.str());
  }
  return out;
}

/// B_perp = sqrt(f_NO^2 - (gamma_n B_z)^2) / gamma_n_perp.
inline double bperp_from_omega(double f_no, double bz, const SpinConstants& c) {
  const double floor = std::abs(c.gamma_n * bz);
  if (!(f_no >= floor)) {
    std::ostringstream msg;
    msg << "oscillation frequency " << f_no << " Hz is below the axial floor |gamma_n B_z| = " << floor << " Hz";
    fail(ErrorKind::inconsistent_inputs, msg.str());
  }
  return std::sqrt((f_no - floor) * (f_no + floor)) / c.gamma_n_perp;
}

/// sigma of B_perp from the frequency error: dB/df = f / (gamma_n_perp^2 B_perp).
inline double bperp_standard_error(const SinusoidFit& fit, double b_perp, const SpinConstants& c) {
  if (!(b_perp > 0)) return 0.0;
  return fit.frequency_se * fit.frequency / (c.gamma_n_perp * c.gamma_n_perp * b_perp);
}

enum class PerpLineModel {
  folded,        // plain line of B_perp against |i0|
  absolute_line  // |a i0 + b| against signed i0 (ambient transverse field along the wire field)
};

inline const char* to_string(PerpLineModel m) { return m == PerpLineModel::folded ? "folded" : "absolute"; }

/// alpha_perp from unsigned B_perp values at signed currents.
inline LinearFit extract_alpha_perp(std::span<const CurrentSample> series,
                                    PerpLineModel mode = PerpLineModel::folded) {
  if (detail::distinct_count(series) < 3)
    fail(ErrorKind::insufficient_data, "alpha_perp extraction needs at least 3 distinct currents");
  LinearFit folded = detail::series_line(series, true);
  if (mode == PerpLineModel::folded) return folded;

  const std::size_t n = series.size();
  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(static_cast<Eigen::Index>(n));
    j.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t k = 0; k < n; ++k) {
      const double i = series[k].current / units::uA;
      const double lin = p(0) * i + p(1);
      const double sgn = lin >= 0 ? 1.0 : -1.0;
      r(k) = (std::abs(lin) - series[k].value / units::uT);
      j(k, 0) = sgn * i;
      j(k, 1) = sgn;
    }
  };
  // Units: slope in uT/uA (= T/A), intercept in uT.
  Eigen::VectorXd p0(2);
  p0 << folded.slope, 0.0;
  LmOptions lm;
  const LmResult fit = levenberg_marquardt(model, p0, lm);
  if (!fit.converged) fail(ErrorKind::fit_failure, "absolute-value line fit did not converge");
  LinearFit out;
  const double sign = fit.params(0) >= 0 ? 1.0 : -1.0;
  out.slope = sign * fit.params(0);
  out.slope_se = fit.standard_errors(0);
  out.intercept = sign * fit.params(1) * units::uT;
  out.intercept_se = fit.standard_errors(1) * units::uT;
  out.points = n;
  out.dof = n - 2;
  out.residual_rms = std::sqrt(fit.rss / static_cast<double>(n)) * units::uT;
  return out;
}

// ---------------------------------------------------------------------------
// Series pipelines
// ---------------------------------------------------------------------------

enum class SeriesStatus { used, skipped, failed };

inline const char* to_string(SeriesStatus s) {
  switch (s) {
    case SeriesStatus::used: return "used";
    case SeriesStatus::skipped: return "skipped";
    case SeriesStatus::failed: return "failed";
  }
  return "?";
}

struct SpectrumReport {
  std::string source;
  double current = 0;
  SeriesStatus status = SeriesStatus::failed;
  std::string message;
  std::optional<GaussianQuadruplet> fit;
  std::optional<FieldEstimate> bz;  // signed
};

struct OdmrSeriesResult {
  std::vector<SpectrumReport> reports;
  std::optional<LinearFit> alpha_z;
  bool any_failed = false;
};

/// Fits every spectrum, turns |B_z| into a signed field and regresses it on
/// the current. B_z takes the sign of the drive current; a zero-current
/// spectrum takes the sign of the line through the other points, and is
/// skipped (not failed) when its lines cannot be resolved or labelled, since
/// its field is then the weak ambient one.
inline OdmrSeriesResult fit_odmr_series(std::span<const OdmrSpectrum> spectra, std::span<const std::string> sources,
                                        const SpinConstants& c, const FourGaussianOptions& opt = {}) {
  OdmrSeriesResult out;
  out.reports.resize(spectra.size());
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    auto& rep = out.reports[k];
    rep.source = k < sources.size() ? sources[k] : "spectrum " + std::to_string(k);
    rep.current = spectra[k].current;
    try {
      rep.fit = fit_four_gaussians(spectra[k], c, opt);
      rep.bz = bz_from_centers(*rep.fit, c);
      rep.status = SeriesStatus::used;
    } catch (const Error& e) {
      const bool zero = spectra[k].current == 0;
      const bool benign = e.kind() == ErrorKind::under_resolved || e.kind() == ErrorKind::ambiguous_branches;
      rep.status = zero && benign ? SeriesStatus::skipped : SeriesStatus::failed;
      rep.message = e.what();
      if (rep.status == SeriesStatus::failed) out.any_failed = true;
    }
  }

  std::vector<CurrentSample> signed_points;
  for (auto& rep : out.reports)
    if (rep.status == SeriesStatus::used && rep.current != 0) {
      rep.bz->value *= rep.current > 0 ? 1.0 : -1.0;
      signed_points.push_back({rep.current, rep.bz->value, rep.bz->standard_error});
    }
  std::optional<LinearFit> provisional;
  if (detail::distinct_count(signed_points) >= 2) provisional = fit_line(
      [&] { std::vector<double> v; for (auto& p : signed_points) v.push_back(p.current); return v; }(),
      [&] { std::vector<double> v; for (auto& p : signed_points) v.push_back(p.value); return v; }());
  for (auto& rep : out.reports) {
    if (rep.status != SeriesStatus::used || rep.current != 0) continue;
    if (provisional && provisional->intercept < 0) rep.bz->value = -rep.bz->value;
    signed_points.push_back({0.0, rep.bz->value, rep.bz->standard_error});
  }
  out.alpha_z = extract_alpha_z(signed_points);
  return out;
}

struct TraceReport {
  std::string source;
  double current = 0;
  SeriesStatus status = SeriesStatus::failed;
  std::string message;
  std::optional<SinusoidFit> fit;
  double bz = 0;  // T, from the alpha_z line
  std::optional<double> b_perp;
};

struct NutationSeriesResult {
  std::vector<TraceReport> reports;
  std::optional<LinearFit> alpha_perp;
  bool any_failed = false;
};

/// Fits every trace, converts the frequency to B_perp using B_z(i0) from the
/// alpha_z line (slope, intercept) and regresses B_perp on the current.
inline NutationSeriesResult fit_nutation_series(std::span<const NutationTrace> traces,
                                                std::span<const std::string> sources, double alpha_z,
                                                double bz_intercept, const SpinConstants& c,
                                                PerpLineModel mode = PerpLineModel::folded,
                                                const SinusoidOptions& opt = {}) {
  NutationSeriesResult out;
  out.reports.resize(traces.size());
  std::vector<CurrentSample> points;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    auto& rep = out.reports[k];
    rep.source = k < sources.size() ? sources[k] : "trace " + std::to_string(k);
    rep.current = traces[k].current;
    rep.bz = alpha_z * rep.current + bz_intercept;
    try {
      rep.fit = fit_sinusoid(traces[k], opt);
      rep.b_perp = bperp_from_omega(rep.fit->frequency, rep.bz, c);
      rep.status = SeriesStatus::used;
      points.push_back({rep.current, *rep.b_perp, bperp_standard_error(*rep.fit, *rep.b_perp, c)});
    } catch (const Error& e) {
      rep.status = SeriesStatus::failed;
      rep.message = e.what();
      out.any_failed = true;
    }
  }
  out.alpha_perp = extract_alpha_perp(points, mode);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct OdmrSynthesis {
  double linewidth = 1e6;      // Gaussian sigma, Hz
  double contrast = 0.03;      // fractional dip depth per line
  double rate = 1e5;           // off-resonant count rate, counts/s
  double integration = 1.0;    // s per frequency point
  double half_span = 25e6;     // Hz around D
  std::size_t points = 501;
  bool shot_noise = true;
};

/// Four Gaussian dips at the secular line positions for B_z, with Poisson
/// photon counts; deterministic given the seed.
inline OdmrSpectrum synth_odmr(const SpinConstants& c, double bz, double current, const OdmrSynthesis& o,
                               std::uint64_t seed) {
  require(o.linewidth > 0 && o.rate > 0 && o.integration > 0 && o.half_span > 0, "synth_odmr: positive parameters");
  require(o.contrast >= 0 && o.contrast < 0.25, "synth_odmr: contrast must be in [0, 0.25)");
  require(o.points >= 16, "synth_odmr: need at least 16 points");
  auto rng = make_stream(seed, 0);
  const auto lines = secular_transitions(c, bz);
  OdmrSpectrum s;
  s.current = current;
  for (std::size_t k = 0; k < o.points; ++k) {
    const double f = c.zero_field_splitting - o.half_span + 2 * o.half_span * static_cast<double>(k) /
                                                                static_cast<double>(o.points - 1);
    double dip = 0;
    for (const auto& t : lines.lines) {
      const double d = (f - t.frequency) / o.linewidth;
      dip += std::exp(-0.5 * d * d);
    }
    const double expected = o.rate * o.integration * (1 - o.contrast * dip);
    double counts = expected;
    if (o.shot_noise) counts = static_cast<double>(std::poisson_distribution<long long>(expected)(rng));
    s.frequency.push_back(f);
    s.pl.push_back(counts / o.integration);
  }
  return s;
}

struct NutationSynthesis {
  double noise = 0.01;            // Gaussian sigma on the normalized signal
  double readout_contrast = 0.3;  // PL drop for full m_S = +1 population
  double span = 200e-6;           // s
  std::size_t points = 201;
};

/// Normalized PL 1 - C p(+1), where p(+1) = v (1 - cos 2 pi f t) / 4 is the
/// m_S = +1 population after the sequence, f the nuclear oscillation
/// frequency and v = (gamma_n_perp B_perp / f)^2 its visibility.
inline NutationTrace synth_nutation(const SpinConstants& c, double bz, double b_perp, double current,
                                    const NutationSynthesis& o, std::uint64_t seed) {
  require(o.noise >= 0 && o.span > 0 && o.points >= 16, "synth_nutation: invalid parameters");
  auto rng = make_stream(seed, 0);
  const double f = nuclear_oscillation_frequency(c, bz, b_perp).frequency;
  const double vis = f > 0 ? std::pow(c.gamma_n_perp * b_perp / f, 2) : 0.0;
  NutationTrace t;
  t.current = current;
  for (std::size_t k = 0; k < o.points; ++k) {
    const double dt = o.span * static_cast<double>(k) / static_cast<double>(o.points - 1);
    const double clean = 1 - o.readout_contrast * vis * (1 - std::cos(2 * units::pi * f * dt)) / 4;
    t.delay.push_back(dt);
    t.signal.push_back(draw_normal(rng, clean, o.noise));
  }
  return t;
}

}  // namespace nvloc

#endif  // NVLOC_FITTING_HPP
