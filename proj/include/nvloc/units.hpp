#ifndef NVLOC_UNITS_HPP
#define NVLOC_UNITS_HPP

#include <numbers>

// All internal quantities are SI. Frequencies are ordinary frequencies (Hz),
// never angular, unless a name says otherwise.
namespace nvloc::units {

inline constexpr double pi = std::numbers::pi;

/// Vacuum permeability, CODATA 2018 (T m / A).
inline constexpr double mu0 = 1.25663706212e-6;

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;

inline constexpr double uA = 1e-6;
inline constexpr double mA = 1e-3;
inline constexpr double nA = 1e-9;

inline constexpr double uT = 1e-6;
inline constexpr double mT = 1e-3;

inline constexpr double kHz = 1e3;
inline constexpr double MHz = 1e6;
inline constexpr double GHz = 1e9;

inline constexpr double us = 1e-6;

}  // namespace nvloc::units

#endif  // NVLOC_UNITS_HPP
