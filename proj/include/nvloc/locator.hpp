#ifndef NVLOC_LOCATOR_HPP
#define NVLOC_LOCATOR_HPP

// Inverse problem: NV position (x', z') from the measured field-to-current
// ratios, with bootstrap error bars.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nvloc/errors.hpp"
#include "nvloc/parallel.hpp"
#include "nvloc/units.hpp"
#include "nvloc/wire_field.hpp"

namespace nvloc {

struct AlphaMeasurement {
  double alpha_z = 0;        // T/A, signed
  double alpha_perp = 0;     // T/A
  double sigma_alpha = 0.02; // T/A, shared by both components

  void validate() const {
    require(std::isfinite(alpha_z) && std::isfinite(alpha_perp), "alpha values must be finite");
    require(sigma_alpha >= 0 && std::isfinite(sigma_alpha), "sigma_alpha must be non-negative");
  }
};

struct GeometryPrior {
  WireGeometry nominal{};
  double width_sigma = 5e-9;
  double thickness_sigma = 2e-9;
  double rel_perp = 0.011;  // finite mode: relative error on the modelled lab B_x'
  double rel_z = 0.037;     // finite mode: relative error on the modelled lab B_z'

  void validate() const {
    nominal.validate();
    require(width_sigma >= 0 && thickness_sigma >= 0, "geometry sigmas must be non-negative");
    require(rel_perp >= 0 && rel_z >= 0, "relative field errors must be non-negative");
  }
};

enum class HalfPlane { automatic, negative, positive };

inline const char* to_string(HalfPlane h) {
  switch (h) {
    case HalfPlane::automatic: return "auto";
    case HalfPlane::negative: return "negative";
    case HalfPlane::positive: return "positive";
  }
  return "?";
}

inline HalfPlane parse_half_plane(const std::string& s) {
  if (s == "auto") return HalfPlane::automatic;
  if (s == "negative") return HalfPlane::negative;
  if (s == "positive") return HalfPlane::positive;
  fail(ErrorKind::validation, "unknown half-plane '" + s + "' (expected auto, negative or positive)");
}

struct SearchOptions {
  double x_min = -300e-9, x_max = 300e-9;
  double z_min = -100e-9, z_max = -1e-9;
  double pitch = 2e-9;
  double tolerance = 0.01e-9;
  double max_residual_sigmas = 5.0;
  HalfPlane half_plane = HalfPlane::automatic;
  QuadratureOptions quadrature{};

  void validate() const {
    require(x_min < 0 && x_max > 0, "search must straddle x' = 0");
    require(z_min < z_max && z_max < 0, "search depth range must lie below the surface");
    require(pitch > 0 && tolerance > 0, "search pitch and tolerance must be positive");
  }
};

struct PositionFit {
  double x = 0, z = 0;   // m
  double residual = 0;   // T/A, Euclidean distance in (alpha_z, alpha_perp)
  bool mirror_ambiguous = false;
  std::optional<LabPoint> mirror;  // other half-plane minimum when ambiguous
  AlphaPair model{};
};

namespace detail {

/// Finite-segment reduction of a filament field at the midplane, used to
/// make the closed-form infinite grid a proxy for the finite model.
inline double finite_length_factor(double length, double rho) {
  return 0.5 * length / std::sqrt(0.25 * length * length + rho * rho);
}

inline double alpha_distance(const AlphaPair& a, const AlphaMeasurement& m) {
  return std::hypot(a.alpha_z - m.alpha_z, a.alpha_perp - m.alpha_perp);
}

}  // namespace detail

/// Precomputed coarse grid of (alpha_z, alpha_perp) for one geometry, plus
/// constrained local refinement against any geometry and field scaling.
class PositionSearch {
 public:
  PositionSearch(const WireGeometry& g, const NVAxis& axis, WireModel model, const FieldScaling& scaling = {},
                 const SearchOptions& opt = {})
      : geometry_(g), axis_(axis), model_(model), scaling_(scaling), opt_(opt) {
    g.validate();
    opt.validate();
    nx_ = static_cast<std::size_t>(std::floor((opt.x_max - opt.x_min) / opt.pitch + 1e-9)) + 1;
    nz_ = static_cast<std::size_t>(std::floor((opt.z_max - opt.z_min) / opt.pitch + 1e-9)) + 1;
    grid_.resize(nx_ * nz_);
    for (std::size_t j = 0; j < nz_; ++j)
      for (std::size_t i = 0; i < nx_; ++i) {
        const LabPoint p{grid_x(i), 0.0, grid_z(j)};
        LabVector b = rect_wire_field_infinite_exact(g, 1.0, p);
        if (model == WireModel::finite) {
          const double zc = 0.5 * g.thickness;
          b = b * detail::finite_length_factor(g.length, std::hypot(p.x, p.z - zc));
        }
        const AlphaPair a = alpha_from_field(b, axis, scaling);
        grid_[j * nx_ + i] = a;
        lo_.alpha_z = std::min(lo_.alpha_z, a.alpha_z);
        hi_.alpha_z = std::max(hi_.alpha_z, a.alpha_z);
        lo_.alpha_perp = std::min(lo_.alpha_perp, a.alpha_perp);
        hi_.alpha_perp = std::max(hi_.alpha_perp, a.alpha_perp);
      }
  }

  const WireGeometry& geometry() const { return geometry_; }
  const SearchOptions& options() const { return opt_; }
  AlphaPair range_min() const { return lo_; }
  AlphaPair range_max() const { return hi_; }

  /// Full search in this object's geometry, including range and
  /// consistency checks.
  PositionFit fit(const AlphaMeasurement& m) const {
    m.validate();
    require(m.alpha_perp > 0, "alpha_perp must be positive: the wire field has a transverse part everywhere below "
                              "the surface");
    if (m.alpha_z < lo_.alpha_z || m.alpha_z > hi_.alpha_z || m.alpha_perp > hi_.alpha_perp) {
      std::ostringstream msg;
      msg << "alpha pair (" << m.alpha_z << ", " << m.alpha_perp
          << ") T/A lies outside the values reachable on the search domain (alpha_z in [" << lo_.alpha_z << ", "
          << hi_.alpha_z << "], alpha_perp up to " << hi_.alpha_perp << ")";
      fail(ErrorKind::out_of_range, msg.str());
    }
    return fit_in(m, geometry_, scaling_);
  }

  /// Seeds from this grid, refines in geometry g with scaling s.
  PositionFit fit_in(const AlphaMeasurement& m, const WireGeometry& g, const FieldScaling& s) const {
    std::optional<Candidate> neg, pos;
    if (opt_.half_plane != HalfPlane::positive) neg = refine(m, g, s, best_seed(m, -1), -1);
    if (opt_.half_plane != HalfPlane::negative) pos = refine(m, g, s, best_seed(m, +1), +1);

    const double noise = m.sigma_alpha > 0 ? m.sigma_alpha : 1e-6;
    PositionFit out;
    const Candidate* chosen = nullptr;
    const Candidate* other = nullptr;
    if (neg && pos) {
      const bool close = std::abs(neg->residual - pos->residual) < noise;
      if (close) {
        // Prefer the half-plane whose modelled alpha_z sign matches the data.
        const auto agrees = [&](const Candidate& c) { return (c.alpha.alpha_z >= 0) == (m.alpha_z >= 0); };
        chosen = agrees(*neg) || !agrees(*pos) ? &*neg : &*pos;
        other = chosen == &*neg ? &*pos : &*neg;
        out.mirror_ambiguous = true;
      } else {
        chosen = neg->residual < pos->residual ? &*neg : &*pos;
      }
    } else {
      chosen = neg ? &*neg : &*pos;
    }
    out.x = chosen->x;
    out.z = chosen->z;
    out.residual = chosen->residual;
    out.model = chosen->alpha;
    if (other) out.mirror = LabPoint{other->x, 0.0, other->z};
    if (out.residual > opt_.max_residual_sigmas * noise) {
      std::ostringstream msg;
      msg << "no consistent position: best residual " << out.residual << " T/A exceeds "
          << opt_.max_residual_sigmas << " sigma (" << opt_.max_residual_sigmas * noise << " T/A)";
      fail(ErrorKind::no_consistent_position, msg.str());
    }
    return out;
  }

 private:
  struct Candidate {
    double x = 0, z = 0, residual = 0;
    AlphaPair alpha{};
  };

  double grid_x(std::size_t i) const { return opt_.x_min + opt_.pitch * static_cast<double>(i); }
  double grid_z(std::size_t j) const { return opt_.z_min + opt_.pitch * static_cast<double>(j); }

  LabPoint best_seed(const AlphaMeasurement& m, int side) const {
    double best = std::numeric_limits<double>::infinity();
    LabPoint p{};
    for (std::size_t j = 0; j < nz_; ++j)
      for (std::size_t i = 0; i < nx_; ++i) {
        const double x = grid_x(i);
        if ((side < 0 && x > 0) || (side > 0 && x < 0)) continue;
        const double d = detail::alpha_distance(grid_[j * nx_ + i], m);
        if (d < best) {
          best = d;
          p = {x, 0.0, grid_z(j)};
        }
      }
    return p;
  }

  AlphaPair evaluate(const WireGeometry& g, const FieldScaling& s, double x, double z) const {
    return alpha_map(g, {x, 0.0, z}, axis_, model_, s, opt_.quadrature);
  }

  /// Projected Levenberg-Marquardt in nm units on the box of one half-plane,
  /// with central-difference Jacobians.
  Candidate refine(const AlphaMeasurement& m, const WireGeometry& g, const FieldScaling& s, LabPoint start,
                   int side) const {
    const double xlo = side < 0 ? opt_.x_min : 0.0, xhi = side < 0 ? 0.0 : opt_.x_max;
    auto clamp = [&](Eigen::Vector2d p) {
      p(0) = std::clamp(p(0), xlo / units::nm, xhi / units::nm);
      p(1) = std::clamp(p(1), opt_.z_min / units::nm, opt_.z_max / units::nm);
      return p;
    };
    auto residual = [&](const Eigen::Vector2d& p) {
      const AlphaPair a = evaluate(g, s, p(0) * units::nm, p(1) * units::nm);
      return Eigen::Vector2d(a.alpha_z - m.alpha_z, a.alpha_perp - m.alpha_perp);
    };
    const double tol = opt_.tolerance / units::nm;
    const double h = 1e-3;

    Eigen::Vector2d p = clamp(Eigen::Vector2d(start.x / units::nm, start.z / units::nm));
    Eigen::Vector2d r = residual(p);
    double lambda = 1e-3;
    for (int it = 0; it < 100; ++it) {
      Eigen::Matrix2d jac;
      for (int k = 0; k < 2; ++k) {
        Eigen::Vector2d a = p, b = p;
        a(k) += h;
        b(k) -= h;
        jac.col(k) = (residual(a) - residual(b)) / (2 * h);
      }
      const Eigen::Matrix2d jtj = jac.transpose() * jac;
      const Eigen::Vector2d g_vec = jac.transpose() * r;
      bool accepted = false;
      double moved = 0;
      for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
        Eigen::Matrix2d a = jtj;
        a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
        const Eigen::Vector2d trial = clamp(p + a.ldlt().solve(-g_vec));
        const Eigen::Vector2d rt = residual(trial);
        if (rt.squaredNorm() < r.squaredNorm()) {
          moved = (trial - p).norm();
          p = trial;
          r = rt;
          lambda = std::max(lambda / 10, 1e-12);
          accepted = true;
        } else {
          lambda *= 10;
        }
      }
      if (!accepted || moved < 0.1 * tol) break;
    }
    Candidate c;
    c.x = p(0) * units::nm;
    c.z = p(1) * units::nm;
    c.residual = r.norm();
    c.alpha = evaluate(g, s, c.x, c.z);
    return c;
  }

  WireGeometry geometry_;
  NVAxis axis_;
  WireModel model_;
  FieldScaling scaling_;
  SearchOptions opt_;
  std::size_t nx_ = 0, nz_ = 0;
  std::vector<AlphaPair> grid_;
  AlphaPair lo_{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  AlphaPair hi_{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
};

/// Position whose modelled (alpha_z, alpha_perp) best matches the
/// measurement: coarse grid over both half-planes, then local refinement.
inline PositionFit fit_position(const AlphaMeasurement& m, const WireGeometry& g, const NVAxis& axis,
                                WireModel model, const SearchOptions& opt = {}) {
  return PositionSearch(g, axis, model, {}, opt).fit(m);
}

struct PositionSample {
  double x = 0, z = 0;
};

struct BootstrapOptions {
  std::size_t n = 5000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: NVLOC_THREADS or hardware concurrency
  double max_failure_fraction = 0.10;
  SearchOptions search{};
};

struct BootstrapResult {
  std::vector<PositionSample> samples;  // successful draws, in index order
  std::size_t failures = 0;
  std::size_t mirror_ambiguous = 0;
  double failure_fraction = 0;
};

/// Draws (w, t, alpha_z, alpha_perp) and, in finite mode, the two relative
/// field errors, from stream (seed, k) in that order, and refits. Width and
/// thickness draws that are not positive are redrawn.
inline BootstrapResult bootstrap_positions(const AlphaMeasurement& m, const GeometryPrior& prior,
                                           const NVAxis& axis, WireModel model, const BootstrapOptions& opt = {}) {
  m.validate();
  prior.validate();
  require(opt.n >= 100, "bootstrap needs at least 100 draws");
  const PositionSearch search(prior.nominal, axis, model, {}, opt.search);

  std::vector<std::optional<PositionSample>> slots(opt.n);
  std::vector<char> mirrored(opt.n, 0);
  parallel_for(
      opt.n,
      [&](std::size_t k) {
        auto rng = make_stream(opt.seed, k);
        WireGeometry g = prior.nominal;
        do g.width = draw_normal(rng, prior.nominal.width, prior.width_sigma);
        while (!(g.width > 0));
        do g.thickness = draw_normal(rng, prior.nominal.thickness, prior.thickness_sigma);
        while (!(g.thickness > 0));
        AlphaMeasurement mk = m;
        mk.alpha_z = draw_normal(rng, m.alpha_z, m.sigma_alpha);
        mk.alpha_perp = draw_normal(rng, m.alpha_perp, m.sigma_alpha);
        FieldScaling s;
        if (model == WireModel::finite) {
          s.x = draw_normal(rng, 1.0, prior.rel_perp);
          s.z = draw_normal(rng, 1.0, prior.rel_z);
        }
        try {
          const PositionFit f = search.fit_in(mk, g, s);
          slots[k] = PositionSample{f.x, f.z};
          mirrored[k] = f.mirror_ambiguous;
        } catch (const Error&) {
          // excluded and counted below
        }
      },
      opt.threads);

  BootstrapResult out;
  for (std::size_t k = 0; k < opt.n; ++k) {
    if (slots[k]) {
      out.samples.push_back(*slots[k]);
      out.mirror_ambiguous += mirrored[k];
    } else {
      ++out.failures;
    }
  }
  out.failure_fraction = static_cast<double>(out.failures) / static_cast<double>(opt.n);
  if (out.failure_fraction > opt.max_failure_fraction) {
    std::ostringstream msg;
    msg << "unstable inversion: " << out.failures << " of " << opt.n << " bootstrap fits failed (failure fraction "
        << out.failure_fraction << ", limit " << opt.max_failure_fraction << ")";
    fail(ErrorKind::unstable_inversion, msg.str());
  }
  return out;
}

struct PositionEstimate {
  double x = 0, z = 0;          // m, sample means
  double std_x = 0, std_z = 0;  // m, sample standard deviations
  std::vector<PositionSample> samples;
  std::optional<double> residual;  // of the point fit, when known
};

inline PositionEstimate summarize(const std::vector<PositionSample>& samples) {
  require(samples.size() >= 2, "summarize needs at least two samples");
  // Shifted sums keep identical samples at exactly zero spread.
  const PositionSample ref = samples.front();
  const double n = static_cast<double>(samples.size());
  double sx = 0, sz = 0;
  for (const auto& s : samples) {
    sx += s.x - ref.x;
    sz += s.z - ref.z;
  }
  double vx = 0, vz = 0;
  for (const auto& s : samples) {
    vx += std::pow(s.x - ref.x - sx / n, 2);
    vz += std::pow(s.z - ref.z - sz / n, 2);
  }
  PositionEstimate e;
  e.x = ref.x + sx / n;
  e.z = ref.z + sz / n;
  e.std_x = std::sqrt(vx / (n - 1));
  e.std_z = std::sqrt(vz / (n - 1));
  e.samples = samples;
  return e;
}

struct ArrayStatistics {
  double mean_lateral_shift = 0;      // m
  double lateral_population_std = 0;  // m
};

/// Mean and population standard deviation of lateral positions.
inline ArrayStatistics array_statistics(const std::vector<double>& lateral) {
  require(lateral.size() >= 2, "array statistics need at least two positions");
  const double n = static_cast<double>(lateral.size());
  ArrayStatistics a;
  a.mean_lateral_shift = std::accumulate(lateral.begin(), lateral.end(), 0.0) / n;
  double v = 0;
  for (double x : lateral) v += (x - a.mean_lateral_shift) * (x - a.mean_lateral_shift);
  a.lateral_population_std = std::sqrt(v / n);
  return a;
}

inline ArrayStatistics array_statistics(const std::vector<PositionEstimate>& estimates) {
  std::vector<double> x;
  for (const auto& e : estimates) x.push_back(e.x);
  return array_statistics(x);
}

}  // namespace nvloc

#endif  // NVLOC_LOCATOR_HPP
