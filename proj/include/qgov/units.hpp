#pragma once

// Atomic units throughout (hbar = 1). Energies in Hartree are already
// atomic units; times given in picoseconds are converted here, in one place.
namespace qgov::units {

// 1 a.u. of time = 2.4188843265e-17 s
inline constexpr double kAuTimeSeconds = 2.4188843265e-17;
inline constexpr double kAuPerPs = 1.0e-12 / kAuTimeSeconds;

inline constexpr double ps_to_au(double ps) { return ps * kAuPerPs; }
inline constexpr double au_to_ps(double au) { return au / kAuPerPs; }

}  // namespace qgov::units
