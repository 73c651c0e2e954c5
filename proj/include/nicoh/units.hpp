// units.hpp: SI constants used at the model boundaries

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nicoh {

/// CODATA SI values. Model interiors work in hbar = k_B = 1 rate units; these
/// are only used when converting physical inputs.
struct PhysicalConstants {
    double hbar = 1.054571817e-34;      // J s
    double kB = 1.380649e-23;           // J / K
    double eps0 = 8.8541878128e-12;     // F / m
    double c = 2.99792458e8;            // m / s
    double muB = 9.2740100783e-24;      // J / T
    double eV = 1.602176634e-19;        // J
    double debye = 3.33564e-30;         // C m
};

inline constexpr PhysicalConstants kSI{};

/// Mean photon number 1/(e^x - 1) for x = hbar*omega/(k_B*T).
inline double bose_einstein(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("bose_einstein: x must be > 0");
    return 1.0 / std::expm1(x);
}

/// Mean occupation at energy omega and temperature T in matching units.
inline double occupation(double omega, double temperature) {
    if (!(temperature > 0.0)) return 0.0;
    const double x = omega / temperature;
    if (x > 700.0) return 0.0;
    return bose_einstein(x);
}

/// Inverse of bose_einstein: x = ln(1 + 1/nbar).
inline double bose_einstein_argument(double nbar) {
    if (!(nbar > 0.0)) throw std::invalid_argument("bose_einstein_argument: nbar must be > 0");
    return std::log1p(1.0 / nbar);
}

/// eV -> internal angular-frequency units (rad/fs), with hbar = 1.
inline constexpr double kEvToRadPerFs = 1.602176634e-19 / 1.054571817e-34 * 1e-15;

/// Kelvin -> eV.
inline constexpr double kKelvinToEv = 1.380649e-23 / 1.602176634e-19;

}  // namespace nicoh
