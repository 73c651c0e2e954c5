// vsystem.hpp: three-level V-system under incoherent pumping (PSBR equations)

#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nicoh/core.hpp"
#include "nicoh/units.hpp"

namespace nicoh::vsystem {

/// Rates in units of a reference decay rate. g1, g2 are the decay rates (gamma_i
/// for radiative decay, or independent Gamma_i when detailed balance is not
/// imposed). With stimulated_decay the pump rates also appear in the decay.
struct Params {
    double delta = 0.0;
    double r1 = 0.0, r2 = 0.0;
    double g1 = 1.0, g2 = 1.0;
    double p = 1.0;
    bool stimulated_decay = true;

    void validate() const {
        if (!(p >= -1.0 && p <= 1.0)) throw std::invalid_argument("vsystem: alignment p must lie in [-1, 1]");
        if (!(r1 >= 0.0 && r2 >= 0.0 && g1 >= 0.0 && g2 >= 0.0))
            throw std::invalid_argument("vsystem: rates must be >= 0");
        if (!std::isfinite(delta)) throw std::invalid_argument("vsystem: delta must be finite");
    }

    /// Detailed-balance parameter set r_i = nbar * gamma_i.
    static Params detailed_balance(double g1, double g2, double nbar, double p, double delta) {
        return {delta, nbar * g1, nbar * g2, g1, g2, p, true};
    }
};

/// Populations and the excited-state coherence rho_12 = re + i*im.
struct State {
    double gg = 1.0, e11 = 0.0, e22 = 0.0, re = 0.0, im = 0.0;

    using Vec = Eigen::Matrix<double, 5, 1>;

    Vec vec() const { return (Vec() << gg, e11, e22, re, im).finished(); }
    static State from_vec(const Vec& v) { return {v(0), v(1), v(2), v(3), v(4)}; }

    std::complex<double> coherence() const { return {re, im}; }
    double excited() const { return e11 + e22; }

    /// Basis order {g, e1, e2}; ground-excited coherences are zero.
    Matrix matrix() const {
        Matrix m = Matrix::Zero(3, 3);
        m(0, 0) = gg;
        m(1, 1) = e11;
        m(2, 2) = e22;
        m(1, 2) = {re, im};
        m(2, 1) = {re, -im};
        return m;
    }
    static State from_matrix(const Matrix& m) {
        return {m(0, 0).real(), m(1, 1).real(), m(2, 2).real(), m(1, 2).real(), m(1, 2).imag()};
    }

    bool valid(double tol = 1e-9) const {
        return std::abs(gg + e11 + e22 - 1.0) <= 1e-10 && re * re + im * im <= e11 * e22 + tol;
    }
};

namespace detail {

// Complex-linear form of the equations of motion on a 3x3 matrix in the
// {g, e1, e2} basis. `secular` drops every p-coupling term.
inline Matrix equations_of_motion(const Params& prm, double f, const Matrix& rho, bool secular) {
    const double r1 = f * prm.r1, r2 = f * prm.r2;
    const double s = prm.stimulated_decay ? 1.0 : 0.0;
    const double pump_x = secular ? 0.0 : prm.p * std::sqrt(r1 * r2);
    const double mix = secular ? 0.0 : prm.p * (std::sqrt(r1 * r2) + std::sqrt(prm.g1 * prm.g2));
    const double gbar = 0.5 * (r1 + r2 + prm.g1 + prm.g2);

    const cd gg = rho(0, 0), p11 = rho(1, 1), p22 = rho(2, 2), c12 = rho(1, 2), c21 = rho(2, 1);
    const cd cre = 0.5 * (c12 + c21);
    Matrix d = Matrix::Zero(3, 3);
    d(1, 1) = r1 * gg - (r1 * s + prm.g1) * p11 - mix * cre;
    d(2, 2) = r2 * gg - (r2 * s + prm.g2) * p22 - mix * cre;
    d(0, 0) = -(d(1, 1) + d(2, 2));
    d(1, 2) = pump_x * gg - I * prm.delta * c12 - gbar * c12 - 0.5 * mix * (p11 + p22);
    d(2, 1) = pump_x * gg + I * prm.delta * c21 - gbar * c21 - 0.5 * mix * (p11 + p22);
    // Ground-excited coherences are decoupled and damped.
    const double k1 = 0.5 * (r1 + r2 + r1 * s + prm.g1), k2 = 0.5 * (r1 + r2 + r2 * s + prm.g2);
    d(0, 1) = -k1 * rho(0, 1);
    d(1, 0) = -k1 * rho(1, 0);
    d(0, 2) = -k2 * rho(0, 2);
    d(2, 0) = -k2 * rho(2, 0);
    return d;
}

inline State rhs_impl(const Params& prm, const State& st, double f, bool secular) {
    const double r1 = f * prm.r1, r2 = f * prm.r2;
    const double s = prm.stimulated_decay ? 1.0 : 0.0;
    const double pump_x = secular ? 0.0 : prm.p * std::sqrt(r1 * r2);
    const double mix = secular ? 0.0 : prm.p * (std::sqrt(r1 * r2) + std::sqrt(prm.g1 * prm.g2));
    const double gbar = 0.5 * (r1 + r2 + prm.g1 + prm.g2);
    State d;
    d.e11 = r1 * st.gg - (r1 * s + prm.g1) * st.e11 - mix * st.re;
    d.e22 = r2 * st.gg - (r2 * s + prm.g2) * st.e22 - mix * st.re;
    d.gg = -(d.e11 + d.e22);
    d.re = pump_x * st.gg + prm.delta * st.im - gbar * st.re - 0.5 * mix * (st.e11 + st.e22);
    d.im = -prm.delta * st.re - gbar * st.im;
    return d;
}

}  // namespace detail

/// Time derivative of the PSBR equations; `envelope` scales r1 and r2.
inline State rhs(const Params& prm, const State& st, double envelope = 1.0) {
    return detail::rhs_impl(prm, st, envelope, false);
}

/// Secular (Pauli rate law) counterpart: all p-couplings removed.
inline State secular_rhs(const Params& prm, const State& st, double envelope = 1.0) {
    return detail::rhs_impl(prm, st, envelope, true);
}

/// Generator on the full 3x3 density matrix, basis {g, e1, e2}.
inline Superoperator generator(const Params& prm, double envelope = 1.0, bool secular = false) {
    prm.validate();
    return Superoperator::from_action(
        3, [&](const Matrix& r) { return detail::equations_of_motion(prm, envelope, r, secular); });
}

/// Closed-form steady-state coherence for p = 1, r1 = r2 = r:
/// rho_R = sqrt(G1 G2)/(G1+G2) * (sqrt G1 - sqrt G2)^2 / ((sqrt G1 - sqrt G2)^2 + 2 delta),
/// rho_I = -delta/(r + (G1+G2)/2) * rho_R.
inline std::pair<double, double> analytic_steady_coherence(double g1, double g2, double r, double delta) {
    if (!(g1 >= 0.0 && g2 >= 0.0)) throw std::invalid_argument("analytic_steady_coherence: rates must be >= 0");
    if (g1 + g2 == 0.0) throw std::invalid_argument("analytic_steady_coherence: G1 = G2 = 0");
    const double d = std::sqrt(g1) - std::sqrt(g2);
    const double num = d * d;
    const double rho_r = num == 0.0 ? 0.0 : std::sqrt(g1 * g2) / (g1 + g2) * num / (num + 2.0 * delta);
    const double rho_i = -delta / (r + 0.5 * (g1 + g2)) * rho_r;
    return {rho_r, rho_i};
}

/// Incoherent pumping rate r = hbar mu^2 omega0^3 nbar / (3 pi eps0 c^3), SI in
/// (mu in C m, omega0 in rad/s), result in 1/s.
inline double pumping_rate(double mu, double omega0, double nbar, const PhysicalConstants& k = kSI) {
    if (!(mu >= 0.0 && omega0 >= 0.0 && nbar >= 0.0))
        throw std::invalid_argument("pumping_rate: inputs must be >= 0");
    return k.hbar * mu * mu * omega0 * omega0 * omega0 * nbar / (3.0 * std::numbers::pi * k.eps0 * k.c * k.c * k.c);
}

/// r_i = gamma_i * nbar
inline double pumping_rate_from_decay(double gamma, double nbar) { return gamma * nbar; }

enum class Regime { underdamped, overdamped };

struct RegimeInfo {
    Regime regime;
    double ratio;  // delta / mean decay rate
};

/// Underdamped iff delta/gbar > 1, gbar = (g1+g2)/2; the boundary counts as overdamped.
inline RegimeInfo classify_regime(const Params& prm) {
    const double gbar = 0.5 * (prm.g1 + prm.g2);
    if (!(gbar > 0.0)) throw std::invalid_argument("classify_regime: mean decay rate must be > 0");
    const double ratio = std::abs(prm.delta) / gbar;
    return {ratio > 1.0 ? Regime::underdamped : Regime::overdamped, ratio};
}

struct Run {
    std::vector<double> times;
    std::vector<State> states;
};

/// Integrates the V-system from `initial` under a turn-on envelope.
inline Run simulate(const Params& prm, const TurnOnEnvelope& env, const std::vector<double>& times,
                    bool secular = false, State initial = {}, Tolerance tol = {1e-9, 1e-12}) {
    prm.validate();
    Run run;
    run.times = times;
    run.states.reserve(times.size());
    using Vec = State::Vec;
    auto f = [&](double t, const Vec& y) -> Vec {
        return detail::rhs_impl(prm, State::from_vec(y), env(t), secular).vec();
    };
    integrate<Vec>(f, initial.vec(), times, tol,
                   [&](double, const Vec& y) { run.states.push_back(State::from_vec(y)); });
    return run;
}

/// Steady state of the (time-independent, full intensity) generator.
inline State steady_state(const Params& prm, bool secular = false) {
    return State::from_matrix(nicoh::steady_state(generator(prm, 1.0, secular)).rho.matrix());
}

/// Rate-model Hamiltonian diag(0, omega0, omega0): both transitions see the
/// occupation at omega0, so the detailed-balance steady state is its Gibbs state.
inline HermitianOperator rate_model_hamiltonian(double omega0) {
    return HermitianOperator::diagonal(Eigen::Vector3d(0.0, omega0, omega0));
}

}  // namespace nicoh::vsystem
