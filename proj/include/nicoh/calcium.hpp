// calcium.hpp: polarized incoherent excitation of the Ca 4s-4p(m = +-1) V-system

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nicoh/core.hpp"
#include "nicoh/units.hpp"
#include "nicoh/vsystem.hpp"

namespace nicoh::calcium {

/// Natural linewidth of the Ca 4s-4p line, 2 pi x 34.6 MHz, in rad/s. Interior
/// rates are expressed in units of this value.
inline constexpr double kGammaSI = 2.0 * std::numbers::pi * 34.6e6;

/// Rates in units of gamma. The excited splitting is 2 * delta_Z.
struct Params {
    double omega0 = 0.0;  // transition frequency (only used for the Hamiltonian)
    double delta_Z = 0.0;
    double gamma = 1.0;
    double nbar = 0.0;
    std::optional<double> r_iso;  // defaults to nbar * gamma

    void validate() const {
        if (!(gamma > 0.0)) throw std::invalid_argument("calcium: gamma must be > 0");
        if (!(nbar >= 0.0)) throw std::invalid_argument("calcium: nbar must be >= 0");
        if (!std::isfinite(delta_Z)) throw std::invalid_argument("calcium: delta_Z must be finite");
        if (r_iso && !(*r_iso >= 0.0)) throw std::invalid_argument("calcium: r_iso must be >= 0");
    }

    double splitting() const { return 2.0 * delta_Z; }
    double isotropic_rate() const { return r_iso ? *r_iso : nbar * gamma; }
};

/// Only one polarization mode of the field is occupied: r = 3 r_iso / (16 pi).
inline double polarized_rate(double r_iso) {
    if (!(r_iso >= 0.0)) throw std::invalid_argument("polarized_rate: r_iso must be >= 0");
    return 3.0 * r_iso / (16.0 * std::numbers::pi);
}

/// Zeeman shift mu_B B_z in units of gamma.
inline double zeeman_shift(double b_tesla, const PhysicalConstants& k = kSI) {
    return k.muB * b_tesla / k.hbar / kGammaSI;
}

/// H = (w0 - dZ)|e1><e1| + (w0 + dZ)|e2><e2|, basis {g, e1(m=-1), e2(m=+1)}.
inline HermitianOperator hamiltonian(const Params& prm) {
    return HermitianOperator::diagonal(
        Eigen::Vector3d(0.0, prm.omega0 - prm.delta_Z, prm.omega0 + prm.delta_Z));
}

/// Polarized PSBR equations: pumping interferes fully (p = 1) while the
/// spontaneous-emission interference term is absent.
inline vsystem::State rhs(double r1, double r2, double g1, double g2, double delta, const vsystem::State& st,
                          double envelope = 1.0, bool secular = false) {
    if (r1 != r2 || g1 != g2)
        throw std::invalid_argument("calcium_rhs: both excited states must share r and gamma");
    const double r = envelope * r1, g = g1;
    const double x = secular ? 0.0 : r;
    vsystem::State d;
    d.e11 = r * st.gg - (r + g) * st.e11 - x * st.re;
    d.e22 = r * st.gg - (r + g) * st.e22 - x * st.re;
    d.gg = -(d.e11 + d.e22);
    d.re = x * st.gg + delta * st.im - (r + g) * st.re - 0.5 * x * (st.e11 + st.e22);
    d.im = -delta * st.re - (r + g) * st.im;
    return d;
}

inline vsystem::State rhs(const Params& prm, const vsystem::State& st, double envelope = 1.0, bool secular = false) {
    const double r = polarized_rate(prm.isotropic_rate());
    return rhs(r, r, prm.gamma, prm.gamma, prm.splitting(), st, envelope, secular);
}

/// Integrates the polarized equations from the ground state.
inline vsystem::Run simulate(const Params& prm, const TurnOnEnvelope& env, const std::vector<double>& times,
                             bool secular = false, Tolerance tol = {1e-10, 1e-14}) {
    prm.validate();
    const double r = polarized_rate(prm.isotropic_rate());
    const double g = prm.gamma, delta = prm.splitting();
    vsystem::Run run;
    run.times = times;
    run.states.reserve(times.size());
    using Vec = vsystem::State::Vec;
    auto f = [&](double t, const Vec& y) -> Vec {
        return rhs(r, r, g, g, delta, vsystem::State::from_vec(y), env(t), secular).vec();
    };
    integrate<Vec>(f, vsystem::State{}.vec(), times, tol,
                   [&](double, const Vec& y) { run.states.push_back(vsystem::State::from_vec(y)); });
    return run;
}

struct OverdampedSolution {
    double rho_ii;
    double rho_sec;
    double rho_nonsec;
};

/// Weak-pumping overdamped closed form. `warning` is set when delta/gamma > 0.1.
inline OverdampedSolution overdamped_analytic(double t, double r, double gamma, double delta = 0.0,
                                              std::string* warning = nullptr) {
    if (!(t >= 0.0)) throw std::invalid_argument("overdamped_analytic: t must be >= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("overdamped_analytic: gamma must be > 0");
    if (warning) {
        warning->clear();
        if (std::abs(delta) / gamma > 0.1)
            *warning = "overdamped_analytic: delta/gamma = " + std::to_string(std::abs(delta) / gamma) +
                       " exceeds 0.1; closed form is outside its regime";
    }
    const double pop = (r / gamma) * -std::expm1(-gamma * t);
    return {pop, 0.0, pop};
}

/// Emission prefactor I0 = nbar w0^4 / (32 pi^2 eps0 c^3 R^2) (SI inputs).
inline double intensity_prefactor(double nbar, double omega0, double distance, const PhysicalConstants& k = kSI) {
    if (!(distance > 0.0)) throw std::invalid_argument("intensity_prefactor: R must be > 0");
    return nbar * std::pow(omega0, 4) /
           (32.0 * std::numbers::pi * std::numbers::pi * k.eps0 * k.c * k.c * k.c * distance * distance);
}

/// Angular emission intensity in units of I0.
inline double emission_intensity(double theta, double phi, const vsystem::State& st) {
    const double c = std::cos(theta), s = std::sin(theta);
    return 0.5 * (1.0 + c * c) * (st.e11 + st.e22) +
           s * s * (st.re * std::cos(2.0 * phi) - st.im * std::sin(2.0 * phi));
}

/// Intensity at observation time t from a trajectory. By default the state is
/// read at t directly; `retardation` (= R/c in trajectory time units) shifts the
/// read-out to t' = t + R/c. Linear interpolation between output points.
inline double emission_intensity(double theta, double phi, double t, const vsystem::Run& run,
                                 double retardation = 0.0) {
    const double tp = t + retardation;
    const auto& ts = run.times;
    if (ts.empty() || tp < ts.front() || tp > ts.back())
        throw std::out_of_range("emission_intensity: time outside trajectory");
    const auto it = std::upper_bound(ts.begin(), ts.end(), tp);
    const std::size_t hi = std::min<std::size_t>(std::size_t(it - ts.begin()), ts.size() - 1);
    const std::size_t lo = hi == 0 ? 0 : hi - 1;
    const double w = hi == lo ? 0.0 : (tp - ts[lo]) / (ts[hi] - ts[lo]);
    const vsystem::State a = run.states[lo], b = run.states[hi];
    const vsystem::State s{(1 - w) * a.gg + w * b.gg, (1 - w) * a.e11 + w * b.e11, (1 - w) * a.e22 + w * b.e22,
                           (1 - w) * a.re + w * b.re, (1 - w) * a.im + w * b.im};
    return emission_intensity(theta, phi, s);
}

enum class Scheme { full_sphere_z, quadrants_A, quadrants_B };

/// Collected intensity (units of I0) for each detection region:
/// full sphere; phi in [-pi/4, pi/4] u [3pi/4, 5pi/4]; phi in [0, pi/2] u [pi, 3pi/2].
inline double collected_intensity(Scheme scheme, const vsystem::State& st) {
    const double iz = 8.0 * std::numbers::pi / 3.0 * (st.e11 + st.e22);
    switch (scheme) {
        case Scheme::full_sphere_z: return iz;
        case Scheme::quadrants_A: return 0.5 * iz + 8.0 / 3.0 * st.re;
        case Scheme::quadrants_B: return 0.5 * iz - 8.0 / 3.0 * st.im;
    }
    return 0.0;
}

struct DetectionSignals {
    double Iz, DA, DB;
};

/// I_z, D_A = I_A - I_A', D_B = I_B - I_B' with I_X' = I_z - I_X, units of I0.
inline DetectionSignals detection_signals(const vsystem::State& st) {
    return {8.0 * std::numbers::pi / 3.0 * (st.e11 + st.e22), 16.0 / 3.0 * st.re, -16.0 / 3.0 * st.im};
}

}  // namespace nicoh::calcium
