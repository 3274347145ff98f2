#pragma once

// Physical constants (CODATA 2018, SI). Pinned here so every module and test
// agrees on the same values.
namespace herald::constants {

inline constexpr double k_boltzmann = 1.380649e-23;    // J/K (exact)
inline constexpr double planck = 6.62607015e-34;       // J*s (exact)
inline constexpr double hbar = 1.054571817e-34;        // J*s, h/(2*pi) rounded per CODATA
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

}  // namespace herald::constants

// Unit helpers. Internally all frequencies and decay rates are angular
// (rad/s) and times are seconds; trace grids and file formats use
// microseconds. Conversions happen at these boundaries only.
namespace herald::units {

inline constexpr double hz(double f) { return constants::two_pi * f; }
inline constexpr double khz(double f) { return hz(f * 1e3); }
inline constexpr double mhz(double f) { return hz(f * 1e6); }
inline constexpr double us(double t) { return t * 1e-6; }
inline constexpr double s_to_us(double t) { return t * 1e6; }

}  // namespace herald::units
