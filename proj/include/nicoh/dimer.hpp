// dimer.hpp: two coupled qubits between hot and cold baths, single-excitation truncation

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nicoh/core.hpp"
#include "nicoh/units.hpp"
#include "nicoh/vsystem.hpp"

namespace nicoh::dimer {

struct UnsupportedCase : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Site basis {|gg>, |e_L g_R>, |g_L e_R>}; eigenbasis {|gg>, |e1>, |e2>}.
struct Params {
    double omega_L = 1.0, omega_R = 1.0;
    double J = 0.0;
    double T_L = 1.0, T_R = 1.0;
    double gamma_L = 1.0, gamma_R = 1.0;  // system-bath coupling rates

    void validate() const {
        if (!(omega_L > 0.0 && omega_R > 0.0)) throw std::invalid_argument("dimer: frequencies must be > 0");
        if (!std::isfinite(J)) throw std::invalid_argument("dimer: J must be finite");
        if (!(T_L > 0.0 && T_R > 0.0)) throw std::invalid_argument("dimer: temperatures must be > 0");
        if (!(gamma_L >= 0.0 && gamma_R >= 0.0)) throw std::invalid_argument("dimer: bath rates must be >= 0");
    }
};

inline HermitianOperator hamiltonian(const Params& prm) {
    prm.validate();
    Matrix h = Matrix::Zero(3, 3);
    h(1, 1) = prm.omega_L;
    h(2, 2) = prm.omega_R;
    h(1, 2) = h(2, 1) = prm.J;
    return HermitianOperator(h);
}

/// theta = arctan(J / (delta0/2)) on [0, pi); pi/2 for delta0 = 0, J > 0.
inline double mixing_angle(double J, double delta0) {
    if (J == 0.0 && delta0 == 0.0) throw std::invalid_argument("mixing_angle: undefined for J = delta0 = 0");
    if (delta0 < 0.0) throw std::invalid_argument("mixing_angle: delta0 must be >= 0");
    double th = std::atan2(J, 0.5 * delta0);
    if (th < 0.0) th += std::numbers::pi;
    return th;
}

struct SingleExcitationBasis {
    double theta = 0.0;
    Eigen::Vector2d e1, e2;  // coefficients over {|e_L g_R>, |g_L e_R>}
    Eigen::Vector2d energies;

    /// Columns are |gg>, |e1>, |e2> expressed in the site basis.
    Matrix unitary() const {
        Matrix u = Matrix::Zero(3, 3);
        u(0, 0) = 1.0;
        u(1, 1) = e1(0);
        u(2, 1) = e1(1);
        u(1, 2) = e2(0);
        u(2, 2) = e2(1);
        return u;
    }
};

/// |e1> = -sin(theta/2)|L> + cos(theta/2)|R>, |e2> = cos(theta/2)|L> + sin(theta/2)|R>,
/// with tan(theta) = 2J/(omega_L - omega_R) so that both are eigenvectors.
inline SingleExcitationBasis eigenbasis(const Params& prm) {
    prm.validate();
    SingleExcitationBasis b;
    const double split = prm.omega_L - prm.omega_R;
    b.theta = std::atan2(2.0 * prm.J, split);
    if (b.theta < 0.0) b.theta += std::numbers::pi;
    const double s = std::sin(0.5 * b.theta), c = std::cos(0.5 * b.theta);
    b.e1 << -s, c;
    b.e2 << c, s;
    Eigen::Matrix2d h;
    h << prm.omega_L, prm.J, prm.J, prm.omega_R;
    b.energies << b.e1.dot(h * b.e1), b.e2.dot(h * b.e2);
    return b;
}

inline Matrix site_to_eigen(const SingleExcitationBasis& b, const Matrix& rho_site) {
    if (rho_site.rows() != 3 || rho_site.cols() != 3) throw DimensionMismatch("site_to_eigen: expects 3x3");
    const Matrix u = b.unitary();
    return u.adjoint() * rho_site * u;
}

inline Matrix eigen_to_site(const SingleExcitationBasis& b, const Matrix& rho_eigen) {
    if (rho_eigen.rows() != 3 || rho_eigen.cols() != 3) throw DimensionMismatch("eigen_to_site: expects 3x3");
    const Matrix u = b.unitary();
    return u * rho_eigen * u.adjoint();
}

/// sigma_L^z = |e_L><e_L| - |g_L><g_L| restricted to the single-excitation space.
inline Matrix sigma_z_left_site() {
    Matrix z = Matrix::Zero(3, 3);
    z(0, 0) = -1.0;
    z(1, 1) = 1.0;
    z(2, 2) = -1.0;
    return z;
}

/// 4 J Im(rho_{e1 e2}).
inline double current_from_coherence(double J, const Matrix& rho_eigen) { return 4.0 * J * rho_eigen(1, 2).imag(); }

/// -i Tr(rho [sigma_L^z, H_S]) evaluated in the eigenbasis.
inline double current_from_commutator(const Params& prm, const SingleExcitationBasis& b, const Matrix& rho_eigen) {
    const Matrix u = b.unitary();
    const Matrix z = u.adjoint() * sigma_z_left_site() * u;
    const Matrix h = u.adjoint() * hamiltonian(prm).matrix() * u;
    const cd v = -I * (rho_eigen * (z * h - h * z)).trace();
    return v.real();
}

/// Energy current in the dimensionless form 4 J Im(rho_{e1e2}); the commutator
/// form is evaluated as a cross-check.
inline double energy_current(const Params& prm, const Matrix& rho_eigen) {
    const auto b = eigenbasis(prm);
    const double j = current_from_coherence(prm.J, rho_eigen);
    const double k = current_from_commutator(prm, b, rho_eigen);
    if (std::abs(j - k) > 1e-9 * std::max(1.0, std::abs(j)))
        throw InvariantViolation("energy_current: coherence form " + std::to_string(j) +
                                 " disagrees with commutator form " + std::to_string(k));
    return j;
}

/// Bath occupations, both evaluated at the mean site frequency so that equal
/// temperatures give a common nbar.
inline std::pair<double, double> bath_occupations(const Params& prm) {
    const double w = 0.5 * (prm.omega_L + prm.omega_R);
    return {occupation(w, prm.T_L), occupation(w, prm.T_R)};
}

/// Dissipator of one bath acting on one site, expressed in the eigenbasis.
inline Superoperator bath_dissipator(const Params& prm, bool left) {
    const auto b = eigenbasis(prm);
    const auto [nl, nr] = bath_occupations(prm);
    const double n = left ? nl : nr, g = left ? prm.gamma_L : prm.gamma_R;
    Matrix lower = Matrix::Zero(3, 3);
    lower(0, left ? 1 : 2) = 1.0;
    const Matrix u = b.unitary();
    const Matrix l = u.adjoint() * lower * u;
    return Superoperator::lindblad(std::sqrt((n + 1.0) * g) * l) +
           Superoperator::lindblad(std::sqrt(n * g) * Matrix(l.adjoint()));
}

/// Full eigenbasis generator: -i[H_S, .] + D_L + D_R.
inline Superoperator generator(const Params& prm) {
    const auto b = eigenbasis(prm);
    Eigen::Vector3d e(0.0, b.energies(0), b.energies(1));
    return Superoperator::commutator(HermitianOperator::diagonal(e)) + bath_dissipator(prm, true) +
           bath_dissipator(prm, false);
}

inline DensityMatrix steady_state(const Params& prm) { return nicoh::steady_state(generator(prm)).rho; }

/// Symmetric dimer (omega_L = omega_R) mapped onto the V-system: splitting 2|J|,
/// p = 1, r1 = r2 = r (hot bath), G1 = G2 = gamma (cold bath).
inline vsystem::Params vsystem_equivalent(const Params& prm, double r, double gamma) {
    prm.validate();
    if (prm.omega_L != prm.omega_R)
        throw UnsupportedCase("vsystem_equivalent: only the symmetric dimer (omega_L = omega_R) is supported");
    vsystem::Params v{2.0 * std::abs(prm.J), r, r, gamma, gamma, 1.0, true};
    v.validate();
    return v;
}

}  // namespace nicoh::dimer
