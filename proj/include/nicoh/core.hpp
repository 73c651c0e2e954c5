// core.hpp: density matrices, superoperators, propagation and steady states

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "nicoh/integrator.hpp"

namespace nicoh {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cd I{0.0, 1.0};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoSteadyState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tolerances used when validating a density matrix.
struct StateTolerance {
    double trace = 1e-10;
    double eigen = 1e-9;
    double cauchy_schwarz = 1e-9;
};

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double hermiticity_defect(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

/// Self-adjoint operator. Construction rejects inputs that are not Hermitian up
/// to round-off and stores the exactly symmetrized matrix.
class HermitianOperator {
public:
    HermitianOperator() = default;

    explicit HermitianOperator(const Matrix& m, double tol = 1e-12) {
        if (m.rows() != m.cols() || m.rows() == 0)
            throw std::invalid_argument("HermitianOperator: matrix must be square and non-empty");
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        if (hermiticity_defect(m) > tol * scale)
            throw std::invalid_argument("HermitianOperator: matrix is not Hermitian");
        m_ = hermitian_part(m);
    }

    static HermitianOperator diagonal(const Eigen::VectorXd& d) {
        return HermitianOperator(d.cast<cd>().asDiagonal().toDenseMatrix());
    }

    static HermitianOperator identity(Eigen::Index dim) {
        return HermitianOperator(Matrix::Identity(dim, dim));
    }

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }

private:
    Matrix m_;
};

/// Hermitian, unit-trace, positive semidefinite state.
class DensityMatrix {
public:
    DensityMatrix() = default;

    explicit DensityMatrix(const Matrix& m, StateTolerance tol = {}) {
        if (m.rows() != m.cols() || m.rows() == 0)
            throw std::invalid_argument("DensityMatrix: matrix must be square and non-empty");
        m_ = hermitian_part(m);
        if (auto why = violation(m_, tol))
            throw InvariantViolation("DensityMatrix: " + *why);
    }

    static DensityMatrix pure(const Vector& psi) {
        const Vector v = psi / psi.norm();
        return DensityMatrix(v * v.adjoint());
    }

    static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index k) {
        Matrix m = Matrix::Zero(dim, dim);
        m(k, k) = 1.0;
        return DensityMatrix(m);
    }

    static DensityMatrix maximally_mixed(Eigen::Index dim) {
        return DensityMatrix(Matrix::Identity(dim, dim) / double(dim));
    }

    /// Returns a description of the first violated invariant, if any.
    static std::optional<std::string> violation(const Matrix& m, StateTolerance tol = {}) {
        const cd tr = m.trace();
        if (std::abs(tr - 1.0) > tol.trace)
            return "trace " + std::to_string(tr.real()) + " differs from 1";
        const Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(m), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol.eigen)
            return "negative eigenvalue " + std::to_string(es.eigenvalues().minCoeff());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = i + 1; j < m.cols(); ++j)
                if (std::norm(m(i, j)) > m(i, i).real() * m(j, j).real() + tol.cauchy_schwarz)
                    return "Cauchy-Schwarz bound violated at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")";
        return std::nullopt;
    }

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    cd operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    double population(Eigen::Index i) const { return m_(i, i).real(); }

private:
    Matrix m_;
};

// Column-major vectorization: vec(rho)[i + n*j] = rho(i, j).
inline Vector vectorize(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvectorize(const Vector& v, Eigen::Index dim) {
    return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

/// Linear map on dim x dim matrices stored as a dense matrix on vec(rho).
class Superoperator {
public:
    Superoperator() = default;

    Superoperator(Eigen::Index dim, Matrix m) : dim_(dim), m_(std::move(m)) {
        if (m_.rows() != dim * dim || m_.cols() != dim * dim)
            throw DimensionMismatch("Superoperator: matrix size does not match dim^2");
    }

    static Superoperator zero(Eigen::Index dim) {
        return {dim, Matrix::Zero(dim * dim, dim * dim)};
    }

    /// Tabulates an arbitrary linear action by applying it to the matrix units.
    static Superoperator from_action(Eigen::Index dim, const std::function<Matrix(const Matrix&)>& action) {
        Matrix m(dim * dim, dim * dim);
        for (Eigen::Index j = 0; j < dim; ++j)
            for (Eigen::Index i = 0; i < dim; ++i) {
                Matrix unit = Matrix::Zero(dim, dim);
                unit(i, j) = 1.0;
                m.col(i + dim * j) = vectorize(action(unit));
            }
        return {dim, std::move(m)};
    }

    /// rho -> -i[H, rho]
    static Superoperator commutator(const HermitianOperator& h) {
        const Eigen::Index n = h.dim();
        const Matrix id = Matrix::Identity(n, n);
        return {n, -I * (kron(id, h.matrix()) - kron(h.matrix().transpose(), id))};
    }

    /// rho -> L rho L^dag - {L^dag L, rho}/2
    static Superoperator lindblad(const Matrix& jump) {
        const Eigen::Index n = jump.rows();
        const Matrix id = Matrix::Identity(n, n);
        const Matrix ll = jump.adjoint() * jump;
        return {n, kron(jump.conjugate(), jump) - 0.5 * kron(id, ll) - 0.5 * kron(ll.transpose(), id)};
    }

    Eigen::Index dim() const { return dim_; }
    const Matrix& matrix() const { return m_; }

    Matrix apply(const Matrix& rho) const {
        if (rho.rows() != dim_ || rho.cols() != dim_)
            throw DimensionMismatch("Superoperator::apply: dimension mismatch");
        return unvectorize(m_ * vectorize(rho), dim_);
    }

    Superoperator& operator+=(const Superoperator& o) {
        if (o.dim_ != dim_) throw DimensionMismatch("Superoperator: dimension mismatch");
        m_ += o.m_;
        return *this;
    }
    friend Superoperator operator+(Superoperator a, const Superoperator& b) { return a += b; }
    friend Superoperator operator*(double s, Superoperator a) {
        a.m_ *= s;
        return a;
    }

    static Matrix kron(const Matrix& a, const Matrix& b) {
        Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        return out;
    }

private:
    Eigen::Index dim_ = 0;
    Matrix m_;
};

/// Intensity turn-on profile f(t): sudden => 1 for t >= 0; exponential => 1 - exp(-t/tau_r).
struct TurnOnEnvelope {
    enum class Kind { sudden, exponential };
    Kind kind = Kind::sudden;
    double tau_r = 0.0;

    static TurnOnEnvelope sudden() { return {}; }
    static TurnOnEnvelope exponential(double tau_r) {
        if (!(tau_r >= 0.0)) throw std::invalid_argument("TurnOnEnvelope: tau_r must be >= 0");
        return {tau_r > 0.0 ? Kind::exponential : Kind::sudden, tau_r};
    }

    double operator()(double t) const {
        if (t < 0.0) return 0.0;
        if (kind == Kind::sudden || tau_r == 0.0) return 1.0;
        return -std::expm1(-t / tau_r);
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Matrix> states;
    std::map<std::string, std::vector<double>> observables;
};

/// Tr(A rho). The imaginary residue is checked and dropped.
inline double expectation(const HermitianOperator& a, const DensityMatrix& rho) {
    if (a.dim() != rho.dim()) throw DimensionMismatch("expectation: dimension mismatch");
    const cd v = (a.matrix() * rho.matrix()).trace();
    const double scale = std::max(1.0, a.matrix().cwiseAbs().maxCoeff());
    if (std::abs(v.imag()) > 1e-12 * scale)
        throw InvariantViolation("expectation: imaginary residue above tolerance");
    return v.real();
}

/// exp(-H/T)/Z, built in the eigenbasis of H (k_B = 1).
inline DensityMatrix gibbs_state(const HermitianOperator& h, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("gibbs_state: temperature must be > 0");
    const Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    const Eigen::VectorXd e = es.eigenvalues();
    Eigen::VectorXd w = (-(e.array() - e.minCoeff()) / temperature).exp();
    w /= w.sum();
    const Matrix& v = es.eigenvectors();
    return DensityMatrix(v * w.cast<cd>().asDiagonal() * v.adjoint());
}

// ---------------------------------------------------------------------------
// Propagation

/// Time-dependent generator: returns d(rho)/dt.
using MatrixRhs = std::function<Matrix(double, const Matrix&)>;

struct PropagationOptions {
    Tolerance tol{};
    bool check_invariants = true;
};

/// Integrates a density-matrix ODE and emits the state at each requested time.
/// Every accepted step is re-Hermitized; states drifting from the invariants by
/// more than 10x the tolerance abort the run with the offending time.
inline Trajectory propagate(const MatrixRhs& rhs, const DensityMatrix& rho0, const std::vector<double>& times,
                            PropagationOptions opt = {}) {
    const Eigen::Index n = rho0.dim();
    auto f = [&](double t, const Vector& y) -> Vector { return vectorize(rhs(t, unvectorize(y, n))); };
    StateTolerance check{10 * std::max(opt.tol.rel, opt.tol.abs) + 1e-10,
                         10 * std::max(opt.tol.rel, opt.tol.abs) + 1e-9,
                         10 * std::max(opt.tol.rel, opt.tol.abs) + 1e-9};
    auto post = [&](double t, Vector& y) {
        Matrix m = hermitian_part(unvectorize(y, n));
        if (opt.check_invariants) {
            if (std::abs(m.trace() - 1.0) > check.trace)
                throw IntegrationFailure("trace drift beyond tolerance", t);
            for (Eigen::Index i = 0; i < n; ++i)
                if (m(i, i).real() < -check.eigen)
                    throw IntegrationFailure("negative population beyond tolerance", t);
        }
        y = vectorize(m);
    };
    Trajectory traj;
    traj.times = times;
    traj.states.reserve(times.size());
    integrate<Vector>(f, vectorize(rho0.matrix()), times, opt.tol,
                      [&](double, const Vector& y) { traj.states.push_back(unvectorize(y, n)); }, post);
    if (opt.check_invariants)
        for (std::size_t k = 0; k < traj.states.size(); ++k)
            if (auto why = DensityMatrix::violation(traj.states[k], check))
                throw IntegrationFailure("state invariant violated: " + *why, traj.times[k]);
    return traj;
}

inline Trajectory propagate(const Superoperator& l, const DensityMatrix& rho0, const std::vector<double>& times,
                            PropagationOptions opt = {}) {
    if (l.dim() != rho0.dim()) throw DimensionMismatch("propagate: dimension mismatch");
    const Matrix& m = l.matrix();
    const Eigen::Index n = l.dim();
    return propagate([&](double, const Matrix& r) -> Matrix { return unvectorize(m * vectorize(r), n); }, rho0,
                     times, opt);
}

namespace detail {

/// Eliminates rho_00 = 1 - sum_{i>0} rho_ii from a generator on vec(rho) and
/// returns the augmented affine matrix [[M, b], [0, 0]] acting on (y, 1), where
/// y is vec(rho) without its first entry. Trace is then exact by construction.
inline Matrix trace_reduced(const Matrix& l, Eigen::Index n) {
    const Eigen::Index m = n * n - 1;
    Matrix a = Matrix::Zero(m + 1, m + 1);
    a.topLeftCorner(m, m) = l.bottomRightCorner(m, m);
    for (Eigen::Index i = 1; i < n; ++i) a.col(i + n * i - 1).head(m) -= l.col(0).tail(m);
    a.col(m).head(m) = l.col(0).tail(m);
    return a;
}

}  // namespace detail

/// Propagates under L(t) = l0 + f(t) l1 with the exponential midpoint rule,
/// steps of at most max_step. Second order; steps are exact exponentials, so
/// their length is set by how fast f varies rather than by the fastest rate in
/// l0 (slow turn-on runs).
inline Trajectory propagate_midpoint_exponential(const Superoperator& l0, const Superoperator& l1,
                                   const std::function<double(double)>& f, const DensityMatrix& rho0,
                                   const std::vector<double>& times, double max_step) {
    if (l0.dim() != rho0.dim() || l1.dim() != rho0.dim())
        throw DimensionMismatch("propagate_midpoint_exponential: dimension mismatch");
    if (!(max_step > 0.0)) throw std::invalid_argument("propagate_midpoint_exponential: max_step must be > 0");
    if (times.empty()) throw std::invalid_argument("propagate_midpoint_exponential: empty time grid");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw std::invalid_argument("propagate_midpoint_exponential: times must increase");
    const Eigen::Index n = rho0.dim(), m = n * n - 1;
    const Matrix a0 = detail::trace_reduced(l0.matrix(), n);
    const Matrix a1 = detail::trace_reduced(l1.matrix(), n);

    auto full = [&](const Vector& z) {
        Vector v(n * n);
        v.tail(m) = z.head(m);
        cd pop = 1.0;
        for (Eigen::Index i = 1; i < n; ++i) pop -= z(i + n * i - 1);
        v(0) = pop;
        return hermitian_part(unvectorize(v, n));
    };
    Trajectory traj;
    traj.times = times;
    Vector z(m + 1);
    z.head(m) = vectorize(rho0.matrix()).tail(m);
    z(m) = 1.0;
    traj.states.push_back(rho0.matrix());
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double span = times[k] - times[k - 1];
        const auto steps = std::max<long>(1, long(std::ceil(span / max_step)));
        const double h = span / double(steps);
        for (long s = 0; s < steps; ++s) {
            const double t = times[k - 1] + double(s) * h;
            z = (h * (a0 + f(t + 0.5 * h) * a1)).exp() * z;
            z(m) = 1.0;
        }
        Matrix r = full(z);
        z.head(m) = vectorize(r).tail(m);
        if (auto why = DensityMatrix::violation(r, {1e-9, 1e-9, 1e-9}))
            throw IntegrationFailure("state invariant violated: " + *why, times[k]);
        traj.states.push_back(std::move(r));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Steady state

struct SteadyStateResult {
    DensityMatrix rho;
    Eigen::Index nullity = 1;
    bool degenerate = false;
    double residual = 0.0;
};

namespace detail {

inline Eigen::Index nullity(const Matrix& m, double tol) {
    const Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double scale = std::max(1.0, s(0));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) <= tol * scale) ++k;
    return k;
}

inline double min_singular_value(const Matrix& m) {
    const Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

}  // namespace detail

/// Trace-normalized element of the generator's kernel. A degenerate kernel is
/// resolved by the long-time limit reached from the maximally mixed state.
inline SteadyStateResult steady_state(const Superoperator& l, double null_tol = 1e-11) {
    const Eigen::Index n = l.dim();
    const Matrix& m = l.matrix();
    const Eigen::Index k = detail::nullity(m, null_tol);
    if (k == 0)
        throw NoSteadyState("steady_state: generator has no stationary state (min singular value " +
                            std::to_string(detail::min_singular_value(m)) + ")");
    Matrix rho;
    if (k == 1) {
        // The trace functional replaces the rho_00 row, which is redundant for a
        // trace-annihilating generator.
        Matrix a = m;
        a.row(0).setZero();
        for (Eigen::Index i = 0; i < n; ++i) a(0, i + n * i) = 1.0;
        Vector b = Vector::Zero(n * n);
        b(0) = 1.0;
        rho = unvectorize(a.fullPivLu().solve(b), n);
    } else {
        // Long-time propagation by repeated squaring of the one-step propagator.
        const double rate = std::max(1.0, m.cwiseAbs().rowwise().sum().maxCoeff());
        Matrix p = (m * (1.0 / rate)).exp();
        Vector v = vectorize(Matrix::Identity(n, n) / double(n));
        for (int it = 0; it < 200; ++it) {
            Vector next = p * v;
            p = p * p;
            const double change = (next - v).norm();
            v = next;
            if (change < 1e-14 && (m * v).norm() < 1e-12) break;
        }
        rho = unvectorize(v, n);
    }
    rho = hermitian_part(rho);
    rho /= rho.trace();
    const double residual = unvectorize(m * vectorize(rho), n).norm();
    if (residual > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw NoSteadyState("steady_state: residual " + std::to_string(residual) + " above tolerance");
    return {DensityMatrix(rho), k, k > 1, residual};
}

}  // namespace nicoh
