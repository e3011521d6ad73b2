#ifndef NVLOC_SPIN_MODEL_HPP
#define NVLOC_SPIN_MODEL_HPP

// Ground-state spin Hamiltonian of an NV center with a 15N nucleus
// (S = 1, I = 1/2), its exact diagonalization, the secular line positions
// and an idealized model of the nuclear-nutation pulse sequence.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "nvloc/errors.hpp"
#include "nvloc/units.hpp"

namespace nvloc {

/// Spin Hamiltonian parameters; every value is an ordinary frequency (Hz)
/// or a gyromagnetic ratio in Hz/T.
struct SpinConstants {
  double zero_field_splitting = 2.87e9;   // D
  double gamma_e = 28e9;                  // electron
  double gamma_n = -4.3e6;                // 15N, signed
  double hyperfine_parallel = 3.03e6;     // A_z
  double hyperfine_perp = 3.65e6;         // A_perp
  double gamma_n_perp = 75e6;             // effective transverse nuclear ratio

  void validate() const {
    require(zero_field_splitting > 0, "zero-field splitting must be positive");
    require(gamma_e > 0, "electron gyromagnetic ratio must be positive");
    require(gamma_n < 0, "15N gyromagnetic ratio must be negative");
    require(hyperfine_parallel > 0, "secular hyperfine must be positive");
    require(hyperfine_perp > 0, "non-secular hyperfine must be positive");
    require(gamma_n_perp > 0, "transverse nuclear ratio must be positive");
  }
};

/// Magnetic field in the NV frame (z along the NV symmetry axis), tesla.
struct NVFrameField {
  double bx = 0;
  double by = 0;
  double bz = 0;

  double transverse() const { return std::hypot(bx, by); }
  double magnitude() const { return std::sqrt(bx * bx + by * by + bz * bz); }
};

inline constexpr int kSpinDim = 6;
using SpinMatrix = Eigen::Matrix<std::complex<double>, kSpinDim, kSpinDim>;
using SpinVector = Eigen::Matrix<std::complex<double>, kSpinDim, 1>;
using SpinEnergies = Eigen::Matrix<double, kSpinDim, 1>;

/// Basis index of |m_S, m_I>. Ordering: m_S = -1, 0, +1 (outer) and
/// m_I = -1/2, +1/2 (inner), so index = 2 (m_S + 1) + (m_I > 0).
constexpr int basis_index(int ms, double mi) { return 2 * (ms + 1) + (mi > 0 ? 1 : 0); }
constexpr int basis_ms(int index) { return index / 2 - 1; }
constexpr double basis_mi(int index) { return index % 2 == 0 ? -0.5 : 0.5; }

namespace detail {

using Mat3 = Eigen::Matrix<std::complex<double>, 3, 3>;
using Mat2 = Eigen::Matrix<std::complex<double>, 2, 2>;

// Spin-1 operators in the (-1, 0, +1) basis.
inline Mat3 spin1_raise() {
  Mat3 m = Mat3::Zero();
  m(1, 0) = std::sqrt(2.0);
  m(2, 1) = std::sqrt(2.0);
  return m;
}
inline Mat3 spin1_lower() { return spin1_raise().adjoint(); }
inline Mat3 spin1_x() { return 0.5 * (spin1_raise() + spin1_lower()); }
inline Mat3 spin1_y() {
  return std::complex<double>(0, -0.5) * (spin1_raise() - spin1_lower());
}
inline Mat3 spin1_z() {
  Mat3 m = Mat3::Zero();
  m(0, 0) = -1;
  m(2, 2) = 1;
  return m;
}

// Spin-1/2 operators in the (-1/2, +1/2) basis.
inline Mat2 spin_half_raise() {
  Mat2 m = Mat2::Zero();
  m(1, 0) = 1;
  return m;
}
inline Mat2 spin_half_lower() { return spin_half_raise().adjoint(); }
inline Mat2 spin_half_x() { return 0.5 * (spin_half_raise() + spin_half_lower()); }
inline Mat2 spin_half_y() {
  return std::complex<double>(0, -0.5) * (spin_half_raise() - spin_half_lower());
}
inline Mat2 spin_half_z() {
  Mat2 m = Mat2::Zero();
  m(0, 0) = -0.5;
  m(1, 1) = 0.5;
  return m;
}

inline SpinMatrix kron(const Mat3& a, const Mat2& b) {
  SpinMatrix out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
  return out;
}

inline double max_abs(const SpinMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// <ms_bra| S_x |ms_ket> for a spin 1, read off the S_x operator.
inline double spin1_sx_element(int ms_bra, int ms_ket) {
  require(std::abs(ms_bra) <= 1 && std::abs(ms_ket) <= 1, "spin-1 projections are -1, 0, +1");
  return detail::spin1_x()(ms_bra + 1, ms_ket + 1).real();
}

/// <m_S = 0| S_x |m_S = -1>, the transition matrix element entering the
/// spin-photon coupling.
inline double sx_matrix_element(const SpinConstants& /*constants*/) {
  return spin1_sx_element(0, -1);
}

/// H = D Sz^2 + gamma_e B.S + gamma_n B.I + A_z Sz Iz + A_perp (Sx Ix + Sy Iy).
///
/// The transverse hyperfine part is (A_perp / 2)(S+ I- + S- I+) with ladder
/// operators normalized as S+|m> = sqrt(S(S+1) - m(m+1)) |m+1>. Entries in Hz.
inline SpinMatrix build_hamiltonian(const SpinConstants& c, const NVFrameField& b) {
  using namespace detail;
  require(std::isfinite(b.bx) && std::isfinite(b.by) && std::isfinite(b.bz),
          "field components must be finite");
  const Mat3 e3 = Mat3::Identity();
  const Mat2 e2 = Mat2::Identity();
  const Mat3 sz = spin1_z();
  SpinMatrix h = c.zero_field_splitting * kron(sz * sz, e2);
  h += c.gamma_e * (b.bx * kron(spin1_x(), e2) + b.by * kron(spin1_y(), e2) + b.bz * kron(sz, e2));
  h += c.gamma_n *
       (b.bx * kron(e3, spin_half_x()) + b.by * kron(e3, spin_half_y()) + b.bz * kron(e3, spin_half_z()));
  h += c.hyperfine_parallel * kron(sz, spin_half_z());
  h += 0.5 * c.hyperfine_perp *
       (kron(spin1_raise(), spin_half_lower()) + kron(spin1_lower(), spin_half_raise()));
  return h;
}

struct Eigensystem {
  SpinEnergies values;  // ascending, Hz
  SpinMatrix vectors;   // columns
};

inline bool is_hermitian(const SpinMatrix& h) {
  const double scale = detail::max_abs(h);
  const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
  return defect <= 1e-9 * (scale > 0 ? scale : 1.0);
}

/// Dense Hermitian eigen-decomposition. Eigenvalues ascending; within a
/// degenerate cluster the eigenvectors are rotated onto the basis states
/// they overlap most, ordered by basis index, with the largest component
/// made real and positive.
inline Eigensystem eigensystem(const SpinMatrix& h) {
  if (!is_hermitian(h)) fail(ErrorKind::validation, "eigensystem: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<SpinMatrix> solver(h);
  if (solver.info() != Eigen::Success) fail(ErrorKind::numerical, "eigensystem: solver failed");

  Eigensystem out{solver.eigenvalues(), solver.eigenvectors()};
  const double scale = std::max(detail::max_abs(h), 1.0);
  const double tie = 1e-9 * scale;

  int start = 0;
  while (start < kSpinDim) {
    int stop = start + 1;
    while (stop < kSpinDim && out.values(stop) - out.values(stop - 1) <= tie) ++stop;
    const int size = stop - start;
    if (size > 1) {
      const auto sub = out.vectors.middleCols(start, size).eval();
      std::array<std::pair<double, int>, kSpinDim> weight{};
      for (int j = 0; j < kSpinDim; ++j) weight[j] = {sub.row(j).squaredNorm(), j};
      std::stable_sort(weight.begin(), weight.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::vector<int> chosen;
      for (int k = 0; k < size; ++k) chosen.push_back(weight[k].second);
      std::sort(chosen.begin(), chosen.end());
      for (int k = 0; k < size; ++k) {
        SpinVector v = sub * sub.row(chosen[k]).adjoint();
        for (int prev = 0; prev < k; ++prev) {
          const SpinVector u = out.vectors.col(start + prev);
          v -= u * u.dot(v);
        }
        out.vectors.col(start + k) = v.normalized();
      }
      const double mean = out.values.segment(start, size).mean();
      out.values.segment(start, size).setConstant(mean);
    }
    start = stop;
  }

  for (int k = 0; k < kSpinDim; ++k) {
    Eigen::Index big = 0;
    out.vectors.col(k).cwiseAbs().maxCoeff(&big);
    const auto z = out.vectors(big, k);
    out.vectors.col(k) *= std::conj(z) / std::abs(z);
  }
  return out;
}

/// Index of the basis state with the largest weight in each eigenvector.
inline std::array<int, kSpinDim> dominant_basis_states(const Eigensystem& es) {
  std::array<int, kSpinDim> out{};
  for (int k = 0; k < kSpinDim; ++k) {
    Eigen::Index big = 0;
    es.vectors.col(k).cwiseAbs2().maxCoeff(&big);
    out[k] = static_cast<int>(big);
  }
  return out;
}

enum class Branch { minus = -1, plus = +1 };

struct Transition {
  Branch branch = Branch::plus;
  double m_i = 0.5;
  double frequency = 0;  // Hz
};

/// Lines |0, m_I> -> |+-1, m_I>, ordered (+,+1/2), (+,-1/2), (-,+1/2), (-,-1/2).
struct TransitionSet {
  std::array<Transition, 4> lines{};
  bool outside_validity = false;

  double at(Branch branch, double m_i) const {
    for (const auto& t : lines)
      if (t.branch == branch && t.m_i == m_i) return t.frequency;
    fail(ErrorKind::validation, "no such transition");
  }
};

inline constexpr std::array<std::pair<Branch, double>, 4> kTransitionOrder{{
    {Branch::plus, 0.5}, {Branch::plus, -0.5}, {Branch::minus, 0.5}, {Branch::minus, -0.5}}};

/// Field above which the secular line formula is flagged (10 mT).
inline constexpr double kSecularFieldLimit = 10e-3;

/// omega_{+-, m_I} = D +- gamma_e B_z +- m_I A_z.
inline TransitionSet secular_transitions(const SpinConstants& c, double bz) {
  TransitionSet out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto [branch, mi] = kTransitionOrder[k];
    const double s = branch == Branch::plus ? 1.0 : -1.0;
    out.lines[k] = {branch, mi,
                    c.zero_field_splitting + s * c.gamma_e * bz + s * mi * c.hyperfine_parallel};
  }
  out.outside_validity = std::abs(bz) > kSecularFieldLimit;
  return out;
}

/// The same four lines from exact diagonalization; eigenstates are labelled
/// by their dominant basis state.
inline TransitionSet exact_transitions(const SpinConstants& c, const NVFrameField& b) {
  const Eigensystem es = eigensystem(build_hamiltonian(c, b));
  const auto dominant = dominant_basis_states(es);
  std::array<double, kSpinDim> energy{};
  std::array<bool, kSpinDim> seen{};
  for (int k = 0; k < kSpinDim; ++k) {
    if (seen[dominant[k]]) fail(ErrorKind::numerical, "exact_transitions: eigenstates are strongly mixed");
    seen[dominant[k]] = true;
    energy[dominant[k]] = es.values(k);
  }
  TransitionSet out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto [branch, mi] = kTransitionOrder[k];
    const int ms = branch == Branch::plus ? 1 : -1;
    out.lines[k] = {branch, mi, energy[basis_index(ms, mi)] - energy[basis_index(0, mi)]};
  }
  out.outside_validity = std::abs(b.bz) > kSecularFieldLimit;
  return out;
}

/// Energy gap between the two eigenstates with the largest m_S = 0 weight.
inline double ms0_splitting(const SpinConstants& c, const NVFrameField& b) {
  const Eigensystem es = eigensystem(build_hamiltonian(c, b));
  std::array<std::pair<double, int>, kSpinDim> weight{};
  for (int k = 0; k < kSpinDim; ++k) {
    const double w = std::norm(es.vectors(basis_index(0, -0.5), k)) +
                     std::norm(es.vectors(basis_index(0, 0.5), k));
    weight[k] = {w, k};
  }
  std::stable_sort(weight.begin(), weight.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  return std::abs(es.values(weight[0].second) - es.values(weight[1].second));
}

struct OscillationFrequency {
  double frequency = 0;  // Hz
  bool outside_validity = false;
};

/// omega_NO = sqrt((gamma_n B_z)^2 + (gamma_n_perp B_perp)^2).
/// Flags B_perp < 0 and B_perp beyond a tenth of A_z / |gamma_n|.
inline OscillationFrequency nuclear_oscillation_frequency(const SpinConstants& c, double bz,
                                                          double b_perp) {
  OscillationFrequency out;
  out.outside_validity =
      b_perp < 0 || std::abs(b_perp) > 0.1 * c.hyperfine_parallel / std::abs(c.gamma_n);
  out.frequency = std::hypot(c.gamma_n * bz, c.gamma_n_perp * b_perp);
  return out;
}

/// Idealized nutation sequence: equal mixture of |0,+-1/2>, instantaneous
/// selective swap |0,+1/2> <-> |+1,+1/2>, free evolution under the full
/// Hamiltonian for each delay, the same swap again, then the m_S = 0
/// population is returned.
inline std::vector<double> simulate_nutation_sequence(const SpinConstants& c, const NVFrameField& b,
                                                      std::span<const double> delays) {
  const Eigensystem es = eigensystem(build_hamiltonian(c, b));
  const SpinEnergies shifted = es.values.array() - es.values.mean();

  // After the first swap the populated states are |+1,+1/2> and |0,-1/2>;
  // the second swap maps exactly those two back into m_S = 0.
  const std::array<int, 2> states{basis_index(1, 0.5), basis_index(0, -0.5)};

  std::vector<double> signal;
  signal.reserve(delays.size());
  for (const double dt : delays) {
    require(dt >= 0, "delays must be non-negative");
    double population = 0;
    for (const int r : states) {
      for (const int s : states) {
        std::complex<double> amp = 0;
        for (int k = 0; k < kSpinDim; ++k) {
          const double phase = -2 * units::pi * std::fmod(shifted(k) * dt, 1.0);
          amp += es.vectors(s, k) * std::polar(1.0, phase) * std::conj(es.vectors(r, k));
        }
        population += 0.5 * std::norm(amp);
      }
    }
    signal.push_back(std::clamp(population, 0.0, 1.0));
  }
  return signal;
}

}  // namespace nvloc

#endif  // NVLOC_SPIN_MODEL_HPP
