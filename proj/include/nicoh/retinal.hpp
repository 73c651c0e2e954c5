// retinal.hpp: two-state two-mode retinal model under incoherent light and a phonon bath

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "nicoh/core.hpp"
#include "nicoh/integrator.hpp"
#include "nicoh/units.hpp"

namespace nicoh::retinal {

using SparseReal = Eigen::SparseMatrix<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct ConvergenceFailure : std::runtime_error {
    double residual;
    ConvergenceFailure(const std::string& what, double r) : std::runtime_error(what), residual(r) {}
};

struct RefinementFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Energies in eV. inv_inertia is the torsional kinetic constant 1/(2 m_phi).
struct Params {
    double E0 = 0.0, E1 = 0.0;
    double V0 = 0.0, V1 = 0.0;
    double omega = 0.0;
    double kappa = 0.0;
    double lambda = 0.0;
    double inv_inertia = 0.0;

    void validate() const {
        if (!(omega > 0.0)) throw std::invalid_argument("retinal: omega must be > 0");
        if (!(inv_inertia > 0.0)) throw std::invalid_argument("retinal: inv_inertia must be > 0");
        for (double v : {E0, E1, V0, V1, kappa, lambda})
            if (!std::isfinite(v)) throw std::invalid_argument("retinal: parameters must be finite");
    }
};

/// Product basis |n> (x) |k> (x) |v>: electronic n in {0, 1}, plane wave
/// exp(i k phi)/sqrt(2 pi) with k = -n_fourier/2 .. n_fourier/2 - 1 on the
/// periodic domain [-pi/2, 3pi/2), and oscillator level v < n_ho.
struct BasisSizes {
    int n_fourier = 64;
    int n_ho = 24;

    void validate() const {
        if (n_fourier < 4 || n_ho < 4) throw std::invalid_argument("retinal: basis sizes must be >= 4");
        if (n_fourier % 2 != 0) throw std::invalid_argument("retinal: n_fourier must be even");
    }
    int dim() const { return 2 * n_fourier * n_ho; }
    int index(int n, int j, int v) const { return (n * n_fourier + j) * n_ho + v; }
    int wavenumber(int j) const { return j - n_fourier / 2; }
};

struct SparseHamiltonian {
    SparseReal h;
    BasisSizes sizes;
    Params params;
};

/// Diabatic 2x2 potential matrix at (phi, x).
inline Eigen::Matrix2d diabatic_potential(const Params& p, double phi, double x) {
    Eigen::Matrix2d v;
    v(0, 0) = p.E0 + 0.5 * p.V0 * (1.0 - std::cos(phi)) + 0.5 * p.omega * x * x;
    v(1, 1) = p.E1 - 0.5 * p.V1 * (1.0 - std::cos(phi)) + 0.5 * p.omega * x * x + p.kappa * x;
    v(0, 1) = v(1, 0) = p.lambda * x;
    return v;
}

/// Lower and upper adiabatic surfaces at (phi, x).
inline std::pair<double, double> adiabatic_potentials(const Params& p, double phi, double x) {
    const Eigen::Matrix2d v = diabatic_potential(p, phi, x);
    const double m = 0.5 * (v(0, 0) + v(1, 1)), d = std::hypot(0.5 * (v(0, 0) - v(1, 1)), v(0, 1));
    return {m - d, m + d};
}

/// H = sum_n |n><n| [T + E_n + (-1)^n V_n (1 - cos phi)/2 + omega (p_x^2 + x^2)/2 + kappa x delta_{n1}]
///     + lambda x (|0><1| + |1><0|),  T = inv_inertia * k^2.
inline SparseHamiltonian build_2s2m_hamiltonian(const Params& p, BasisSizes sz) {
    p.validate();
    sz.validate();
    const int nf = sz.n_fourier, nv = sz.n_ho;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(sz.dim()) * 7);
    auto xel = [](int v) { return std::sqrt(0.5 * double(v + 1)); };  // <v|x|v+1>
    for (int n = 0; n < 2; ++n) {
        const double sgn = n == 0 ? 1.0 : -1.0;
        const double en = n == 0 ? p.E0 : p.E1, vn = n == 0 ? p.V0 : p.V1;
        for (int j = 0; j < nf; ++j) {
            const double k = sz.wavenumber(j);
            for (int v = 0; v < nv; ++v) {
                const int i = sz.index(n, j, v);
                trip.emplace_back(i, i, p.inv_inertia * k * k + en + 0.5 * sgn * vn + p.omega * (v + 0.5));
                // -(-1)^n V_n cos(phi)/2; cos couples k and k +- 1 with weight 1/2.
                if (j + 1 < nf) {
                    const int i2 = sz.index(n, j + 1, v);
                    trip.emplace_back(i, i2, -0.25 * sgn * vn);
                    trip.emplace_back(i2, i, -0.25 * sgn * vn);
                }
                if (v + 1 < nv) {
                    if (n == 1 && p.kappa != 0.0) {
                        const int i2 = sz.index(1, j, v + 1);
                        trip.emplace_back(i, i2, p.kappa * xel(v));
                        trip.emplace_back(i2, i, p.kappa * xel(v));
                    }
                    if (n == 0 && p.lambda != 0.0) {
                        // lambda x couples (0, j, v) with (1, j, v +- 1).
                        const int a = sz.index(0, j, v), b = sz.index(1, j, v + 1);
                        const int c = sz.index(0, j, v + 1), d = sz.index(1, j, v);
                        trip.emplace_back(a, b, p.lambda * xel(v));
                        trip.emplace_back(b, a, p.lambda * xel(v));
                        trip.emplace_back(c, d, p.lambda * xel(v));
                        trip.emplace_back(d, c, p.lambda * xel(v));
                    }
                }
            }
        }
    }
    SparseHamiltonian out{SparseReal(sz.dim(), sz.dim()), sz, p};
    out.h.setFromTriplets(trip.begin(), trip.end());
    out.h.makeCompressed();
    const SparseReal asym = out.h - SparseReal(out.h.transpose());
    if (asym.norm() != 0.0) throw InvariantViolation("build_2s2m_hamiltonian: assembled matrix is not symmetric");
    return out;
}

/// Torsional step function Theta(pi/2 - |phi|) in the plane-wave basis:
/// (1/2pi) int_{-pi/2}^{pi/2} exp(i (k' - k) phi) dphi, by uniform-grid trapezoid
/// with Richardson extrapolation on at least 8 * n_fourier points. The grid is
/// doubled until successive estimates agree to 1e-12.
inline RealMatrix cis_step_matrix(int n_fourier) {
    const int nf = n_fourier;
    auto integral = [](int m, int points) {
        // (1/2pi) int cos(m phi) over [-pi/2, pi/2] (the sine part integrates to zero).
        auto trap = [&](int pts) {
            const double a = -0.5 * std::numbers::pi, h = std::numbers::pi / pts;
            double s = 0.5 * (std::cos(m * a) + std::cos(-m * a));
            for (int i = 1; i < pts; ++i) s += std::cos(m * (a + i * h));
            return s * h / (2.0 * std::numbers::pi);
        };
        const double t1 = trap(points), t2 = trap(2 * points), t4 = trap(4 * points);
        const double r1 = t2 + (t2 - t1) / 3.0, r2 = t4 + (t4 - t2) / 3.0;
        return std::pair{r2 + (r2 - r1) / 15.0, std::abs(r2 - r1) / 15.0};
    };
    RealMatrix theta(nf, nf);
    std::vector<double> by_diff(static_cast<std::size_t>(nf));
    for (int m = 0; m < nf; ++m) {
        int pts = 8 * nf;
        auto [val, err] = integral(m, pts);
        while (err > 1e-12) {
            pts *= 2;
            if (pts > (1 << 22)) throw RefinementFailure("cis_step_matrix: quadrature did not converge");
            std::tie(val, err) = integral(m, pts);
        }
        by_diff[std::size_t(m)] = val;
    }
    for (int a = 0; a < nf; ++a)
        for (int b = 0; b < nf; ++b) theta(a, b) = by_diff[std::size_t(std::abs(a - b))];
    return theta;
}

struct StateLabels {
    double bright = 0.0;     // |<a| sigma_x |ground>|^2
    double cis = 0.0;        // <a| Theta(pi/2 - |phi|) |a>
    double trans = 0.0;      // 1 - cis
    double diabatic0 = 0.0;  // weight on |0>
    double diabatic1 = 0.0;  // weight on |1>
    double parity = 0.0;     // <a| (phi -> -phi) |a>; dynamics from the ground state stay in the even sector
};

struct VibronicBasis {
    BasisSizes sizes;
    RealVector energies;  // ascending
    RealMatrix vectors;   // product-basis coefficients, one column per state
    std::vector<StateLabels> labels;
    double max_residual = 0.0;
    bool dense = false;  // true when the dense solver was used

    int size() const { return int(energies.size()); }
};

namespace detail {

// Shift-invert Lanczos with full reorthogonalization for the lowest k
// eigenpairs of a symmetric sparse matrix. Returns nullopt when the Krylov
// space reaches `max_steps` without meeting the residual gate.
struct LanczosResult {
    RealVector values;
    RealMatrix vectors;
    double residual;
};

inline double gershgorin_lower(const SparseReal& h) {
    double lo = INFINITY;
    for (int c = 0; c < h.outerSize(); ++c) {
        double diag = 0.0, off = 0.0;
        for (SparseReal::InnerIterator it(h, c); it; ++it)
            if (it.row() == c) diag = it.value();
            else off += std::abs(it.value());
        lo = std::min(lo, diag - off);
    }
    return lo;
}

inline double gershgorin_upper(const SparseReal& h) {
    double hi = -INFINITY;
    for (int c = 0; c < h.outerSize(); ++c) {
        double diag = 0.0, off = 0.0;
        for (SparseReal::InnerIterator it(h, c); it; ++it)
            if (it.row() == c) diag = it.value();
            else off += std::abs(it.value());
        hi = std::max(hi, diag + off);
    }
    return hi;
}

inline std::optional<LanczosResult> shift_invert_lanczos(const SparseReal& h, int k, double sigma, int steps,
                                                         double gate, std::uint64_t seed) {
    const int n = int(h.rows());
    SparseReal shifted = h;
    for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    Eigen::SimplicialLDLT<SparseReal> solver(shifted);
    if (solver.info() != Eigen::Success) return std::nullopt;

    RealMatrix q(n, steps + 1);
    RealVector alpha = RealVector::Zero(steps), beta = RealVector::Zero(steps + 1);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    RealVector v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng);
    q.col(0) = v.normalized();
    int m = steps;
    for (int j = 0; j < steps; ++j) {
        RealVector w = solver.solve(q.col(j));
        alpha(j) = q.col(j).dot(w);
        for (int pass = 0; pass < 2; ++pass) {
            const RealVector c = q.leftCols(j + 1).transpose() * w;
            w -= q.leftCols(j + 1) * c;
        }
        double b = w.norm();
        if (b < 1e-10 * std::abs(alpha(j))) {
            // Invariant subspace: continue from a fresh orthogonal direction.
            for (int i = 0; i < n; ++i) w(i) = g(rng);
            for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
            if (w.norm() < 1e-12) {
                m = j + 1;
                break;
            }
            beta(j + 1) = 0.0;
            q.col(j + 1) = w.normalized();
            continue;
        }
        beta(j + 1) = b;
        q.col(j + 1) = w / b;
    }
    RealMatrix t = RealMatrix::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        t(j, j) = alpha(j);
        if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = beta(j + 1);
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(t);
    if (es.info() != Eigen::Success || m < k) return std::nullopt;
    // Largest theta = lowest energy.
    LanczosResult r;
    r.values.resize(k);
    r.vectors.resize(n, k);
    for (int i = 0; i < k; ++i) {
        const int col = m - 1 - i;
        const double theta = es.eigenvalues()(col);
        if (!(theta > 0.0)) return std::nullopt;
        r.values(i) = sigma + 1.0 / theta;
        r.vectors.col(i) = (q.leftCols(m) * es.eigenvectors().col(col)).normalized();
    }
    // Rayleigh-Ritz on the Ritz vectors with H itself tightens degenerate pairs.
    const RealMatrix hv = h * r.vectors;
    Eigen::SelfAdjointEigenSolver<RealMatrix> rr(r.vectors.transpose() * hv);
    r.vectors = r.vectors * rr.eigenvectors();
    r.values = rr.eigenvalues();
    const RealMatrix res = h * r.vectors - r.vectors * r.values.asDiagonal();
    r.residual = res.colwise().norm().maxCoeff();
    if (r.residual > gate) return std::nullopt;
    return r;
}

}  // namespace detail

/// Lowest n_keep eigenpairs. Shift-invert Lanczos with a growing Krylov space;
/// dense diagonalization when n_keep is a large fraction of the dimension or
/// the iteration fails to meet ||Hv - Ev|| < 1e-8 ||H||.
inline VibronicBasis vibronic_eigenbasis(const SparseHamiltonian& ham, int n_keep) {
    const int n = int(ham.h.rows());
    if (n_keep < 1 || n_keep > n) throw std::invalid_argument("vibronic_eigenbasis: n_keep must be in [1, dim]");
    const double lo = detail::gershgorin_lower(ham.h), hi = detail::gershgorin_upper(ham.h);
    const double norm = std::max(std::abs(lo), std::abs(hi));
    const double gate = 1e-8 * norm;
    VibronicBasis b;
    b.sizes = ham.sizes;
    bool done = false;
    if (4 * n_keep < n) {
        // Shift below the spectrum by roughly the width of the wanted window.
        const double sigma = lo - 1e-3 * (hi - lo) - 1e-6;
        for (int steps = std::min(n - 1, 2 * n_keep + 60); !done; steps = std::min(n - 1, 2 * steps)) {
            if (auto r = detail::shift_invert_lanczos(ham.h, n_keep, sigma, steps, gate, 20240601)) {
                b.energies = r->values;
                b.vectors = r->vectors;
                b.max_residual = r->residual;
                done = true;
            }
            if (steps >= n - 1) break;
        }
    }
    if (!done) {
        Eigen::SelfAdjointEigenSolver<RealMatrix> es{RealMatrix(ham.h)};
        if (es.info() != Eigen::Success) throw ConvergenceFailure("vibronic_eigenbasis: dense solver failed", NAN);
        b.energies = es.eigenvalues().head(n_keep);
        b.vectors = es.eigenvectors().leftCols(n_keep);
        const RealMatrix res = ham.h * b.vectors - b.vectors * b.energies.asDiagonal();
        b.max_residual = res.colwise().norm().maxCoeff();
        b.dense = true;
        if (b.max_residual > gate)
            throw ConvergenceFailure("vibronic_eigenbasis: residual " + std::to_string(b.max_residual), b.max_residual);
    }
    // Fix the sign convention: largest-magnitude coefficient positive.
    for (int a = 0; a < n_keep; ++a) {
        Eigen::Index i;
        b.vectors.col(a).cwiseAbs().maxCoeff(&i);
        if (b.vectors(i, a) < 0.0) b.vectors.col(a) *= -1.0;
    }

    const BasisSizes& sz = ham.sizes;
    const int nf = sz.n_fourier, nv = sz.n_ho, half = nf * nv;
    const RealMatrix theta = cis_step_matrix(nf);
    // sigma_x |ground>: swap the two electronic halves.
    RealVector sx_ground(n);
    sx_ground.head(half) = b.vectors.col(0).tail(half);
    sx_ground.tail(half) = b.vectors.col(0).head(half);
    const RealVector bright = b.vectors.transpose() * sx_ground;
    b.labels.resize(std::size_t(n_keep));
    for (int a = 0; a < n_keep; ++a) {
        StateLabels& l = b.labels[std::size_t(a)];
        l.diabatic0 = b.vectors.col(a).head(half).squaredNorm();
        l.diabatic1 = b.vectors.col(a).tail(half).squaredNorm();
        l.bright = bright(a) * bright(a);
        double cis = 0.0, par = 0.0;
        for (int el = 0; el < 2; ++el)
            for (int v = 0; v < nv; ++v) {
                RealVector c(nf);
                for (int j = 0; j < nf; ++j) c(j) = b.vectors(sz.index(el, j, v), a);
                cis += c.dot(theta * c);
                // k -> -k; k = -nf/2 has no partner in the truncated set.
                for (int j = 1; j < nf; ++j) par += c(j) * c(nf - j);
            }
        l.parity = par;
        l.cis = std::clamp(cis, 0.0, 1.0);
        l.trans = 1.0 - l.cis;
    }
    return b;
}

/// Product-basis operator Theta(phi region) (x) |n><n|, restricted to the kept
/// eigenstates: V^T O V.
inline RealMatrix project_region(const VibronicBasis& b, int surface, bool cis_region) {
    const BasisSizes& sz = b.sizes;
    const int nf = sz.n_fourier, nv = sz.n_ho, k = b.size();
    RealMatrix theta = cis_step_matrix(nf);
    if (!cis_region) theta = RealMatrix::Identity(nf, nf) - theta;
    RealMatrix out = RealMatrix::Zero(k, k);
    for (int v = 0; v < nv; ++v) {
        RealMatrix block(nf, k);
        for (int j = 0; j < nf; ++j) block.row(j) = b.vectors.row(sz.index(surface, j, v));
        out.noalias() += block.transpose() * (theta * block);
    }
    return 0.5 * (out + out.transpose());
}

struct Projectors {
    RealMatrix cis0, trans1;
    double idempotency_defect = 0.0;  // max |P^2 - P| over both, kept-state space
};

/// P_cis^(0) = Theta(pi/2 - |phi|) |0><0| and P_trans^(1) = Theta(|phi| - pi/2) |1><1|
/// in the kept eigenbasis.
inline Projectors diabatic_projectors(const VibronicBasis& b) {
    Projectors p;
    p.cis0 = project_region(b, 0, true);
    p.trans1 = project_region(b, 1, false);
    p.idempotency_defect = std::max((p.cis0 * p.cis0 - p.cis0).cwiseAbs().maxCoeff(),
                                    (p.trans1 * p.trans1 - p.trans1).cwiseAbs().maxCoeff());
    return p;
}

/// Y1 = <P_trans1> / (<P_cis0> + <P_trans1>); 0 when the denominator < 1e-14.
inline double quantum_yield(const Projectors& p, const Matrix& rho) {
    const double t = (p.trans1.cast<cd>().cwiseProduct(rho.transpose())).sum().real();
    const double c = (p.cis0.cast<cd>().cwiseProduct(rho.transpose())).sum().real();
    const double den = c + t;
    if (den < 1e-14) return 0.0;
    return std::clamp(t / den, 0.0, 1.0);
}

/// C_ij = |rho_ij|^2 / (rho_ii rho_jj); 0 when rho_ii rho_jj < 1e-14.
inline double coherence_ratio(const Matrix& rho, Eigen::Index i, Eigen::Index j) {
    if (i == j) throw std::invalid_argument("coherence_ratio: i and j must differ");
    const double den = rho(i, i).real() * rho(j, j).real();
    if (den < 1e-14) return 0.0;
    return std::norm(rho(i, j)) / den;
}

/// Contiguous clusters of an ascending spectrum: single linkage on level gaps
/// strictly below `tol`. tol = 0 gives singletons.
struct Partition {
    std::vector<int> start, size, of;
    std::vector<double> mean;

    int count() const { return int(start.size()); }
    int states() const { return int(of.size()); }
};

inline Partition cluster_levels(const RealVector& energies, double tol) {
    if (!(tol >= 0.0)) throw std::invalid_argument("cluster_levels: tolerance must be >= 0");
    const int n = int(energies.size());
    for (int a = 1; a < n; ++a)
        if (energies(a) < energies(a - 1)) throw std::invalid_argument("cluster_levels: energies must be ascending");
    Partition p;
    p.of.resize(std::size_t(n));
    for (int a = 0; a < n; ++a) {
        if (a == 0 || !(energies(a) - energies(a - 1) < tol)) {
            p.start.push_back(a);
            p.size.push_back(0);
        }
        p.of[std::size_t(a)] = p.count() - 1;
        ++p.size.back();
    }
    for (int c = 0; c < p.count(); ++c)
        p.mean.push_back(energies.segment(p.start[std::size_t(c)], p.size[std::size_t(c)]).mean());
    return p;
}

/// Per channel: one jump operator sqrt(rate(C -> C')) P_C' Q P_C for every
/// ordered pair of distinct clusters, plus a single zero-frequency operator
/// sum_C sqrt(rate(C -> C)) P_C Q P_C. D[A] rho = A rho A^dag - {A^dag A, rho}/2.
/// On block-diagonal states the gain only reads and writes diagonal blocks.
class ClusteredDissipator {
public:
    struct Channel {
        RealMatrix q;     // coupling operator in the eigenbasis (symmetric)
        RealMatrix rate;  // rate(C, C') for transfer C -> C'
    };

    ClusteredDissipator() = default;
    ClusteredDissipator(Partition p, std::vector<Channel> ch) : part_(std::move(p)), channels_(std::move(ch)) {
        const int n = part_.states(), nc = part_.count();
        loss_ = RealMatrix::Zero(n, n);
        for (const Channel& c : channels_) {
            if (c.q.rows() != n || c.q.cols() != n) throw DimensionMismatch("ClusteredDissipator: coupling size");
            if (c.rate.rows() != nc || c.rate.cols() != nc) throw DimensionMismatch("ClusteredDissipator: rate size");
            if ((c.rate.array() < 0.0).any() || !c.rate.allFinite())
                throw std::invalid_argument("ClusteredDissipator: rates must be finite and >= 0");
            for (int a = 0; a < nc; ++a) {
                const int s = start(a), m = size(a);
                RealVector w(n);
                for (int b = 0; b < n; ++b) w(b) = c.rate(a, part_.of[std::size_t(b)]);
                loss_.block(s, s, m, m) += c.q.middleRows(s, m) * w.asDiagonal() * c.q.middleCols(s, m);
            }
        }
        loss_ = 0.5 * (loss_ + loss_.transpose());
    }

    const Partition& partition() const { return part_; }
    const std::vector<Channel>& channels() const { return channels_; }
    /// sum_{C'} rate(C -> C') P_C Q P_C' Q P_C, block diagonal.
    const RealMatrix& loss() const { return loss_; }

    /// out += scale * sum rate(C -> C') P_C' Q P_C rho P_C Q P_C'.
    void accumulate_gain(const Matrix& rho, Matrix& out, double scale) const {
        const int nc = part_.count();
        for (int a = 0; a < nc; ++a) {
            const int sa = start(a), na = size(a);
            const auto src = rho.block(sa, sa, na, na);
            if (src.cwiseAbs().maxCoeff() == 0.0) continue;
            for (const Channel& c : channels_)
                for (int b = 0; b < nc; ++b) {
                    const double r = c.rate(a, b);
                    if (r == 0.0) continue;
                    const int sb = start(b), nb = size(b);
                    if (na == 1 && nb == 1) {
                        const double q = c.q(sb, sa);
                        out(sb, sb) += scale * r * q * q * src(0, 0);
                    } else {
                        const auto qba = c.q.block(sb, sa, nb, na);
                        out.block(sb, sb, nb, nb).noalias() +=
                            (scale * r) * (qba.cast<cd>() * src * qba.transpose().cast<cd>());
                    }
                }
        }
    }

    /// Full action on an arbitrary rho.
    Matrix apply(const Matrix& rho) const {
        Matrix out = -0.5 * (loss_.cast<cd>() * rho + rho * loss_.cast<cd>());
        accumulate_gain(rho, out, 1.0);
        // Zero-frequency cross terms between different clusters.
        const int nc = part_.count();
        for (const Channel& c : channels_)
            for (int a = 0; a < nc; ++a)
                for (int b = 0; b < nc; ++b) {
                    const double r = std::sqrt(c.rate(a, a) * c.rate(b, b));
                    if (a == b || r == 0.0) continue;
                    const int sa = start(a), na = size(a), sb = start(b), nb = size(b);
                    out.block(sa, sb, na, nb) += r * (c.q.block(sa, sa, na, na).cast<cd>() * rho.block(sa, sb, na, nb) *
                                                      c.q.block(sb, sb, nb, nb).cast<cd>());
                }
        return out;
    }

    Superoperator superoperator() const {
        if (part_.states() > 40) throw std::invalid_argument("superoperator: dimension too large for a dense form");
        return Superoperator::from_action(part_.states(), [this](const Matrix& r) { return apply(r); });
    }

    /// Population transfer rate a -> b.
    double transition_rate(int a, int b) const {
        double r = 0.0;
        for (const Channel& c : channels_)
            r += c.rate(part_.of[std::size_t(a)], part_.of[std::size_t(b)]) * c.q(b, a) * c.q(b, a);
        return r;
    }

private:
    int start(int c) const { return part_.start[std::size_t(c)]; }
    int size(int c) const { return part_.size[std::size_t(c)]; }

    Partition part_;
    std::vector<Channel> channels_;
    RealMatrix loss_;
};

/// Bath and field settings. Energies and temperatures in eV.
struct DissipationConfig {
    double mu = 0.0;       // dipole scale: gamma_ab = mu^2 |<a|sigma_x|b>|^2 omega_ab^3
    double T_rad = 0.0;
    bool secular = false;  // radiative rate law without excitation coherences
    double T_phon = 0.0;
    double eta = 0.0;      // Ohmic J(w) = eta w exp(-|w|/omega_c)
    double omega_c = 1.0;
    std::optional<double> cluster_tol;  // default: 10x the largest radiative rate

    void validate() const {
        if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("retinal: mu must be >= 0");
        if (!(T_rad >= 0.0) || !(T_phon >= 0.0)) throw std::invalid_argument("retinal: temperatures must be >= 0");
        if (!(eta >= 0.0)) throw std::invalid_argument("retinal: eta must be >= 0");
        if (!(omega_c > 0.0)) throw std::invalid_argument("retinal: omega_c must be > 0");
        if (cluster_tol && !(*cluster_tol >= 0.0)) throw std::invalid_argument("retinal: cluster_tol must be >= 0");
    }
};

/// Phonon rate for a transition releasing energy w (w < 0 absorbs):
/// J(|w|)(n(|w|) + 1) downhill, J(|w|) n(|w|) uphill, eta T at w = 0.
inline double phonon_rate(double w, double eta, double omega_c, double temperature) {
    if (w == 0.0) return eta * temperature;
    const double a = std::abs(w), j = eta * a * std::exp(-a / omega_c);
    const double n = occupation(a, temperature);
    return w > 0.0 ? j * (n + 1.0) : j * n;
}

/// Radiative rate factors for a transition releasing energy w, in units of mu^2 |D|^2:
/// spontaneous w^3 (w > 0); field-driven n(|w|) |w|^3 in both directions.
inline double radiative_spontaneous(double w) { return w > 0.0 ? w * w * w : 0.0; }
inline double radiative_field(double w, double temperature) {
    if (w == 0.0) return 0.0;
    const double a = std::abs(w);
    return occupation(a, temperature) * a * a * a;
}

/// sigma_x = |1><0| + |0><1| in the kept eigenbasis.
inline RealMatrix electronic_sigma_x(const VibronicBasis& b) {
    const int half = b.sizes.n_fourier * b.sizes.n_ho;
    return b.vectors.topRows(half).transpose() * b.vectors.bottomRows(half) +
           b.vectors.bottomRows(half).transpose() * b.vectors.topRows(half);
}

/// Coupling operators x and cos(phi) on each diabatic surface, in the kept eigenbasis.
inline std::vector<RealMatrix> phonon_couplings(const VibronicBasis& b) {
    const BasisSizes& sz = b.sizes;
    const int nf = sz.n_fourier, nv = sz.n_ho, half = nf * nv;
    std::vector<RealMatrix> out;
    for (int el = 0; el < 2; ++el) {
        const auto v = b.vectors.middleRows(el * half, half);
        // x acts on the oscillator index, cos(phi) on the plane-wave index.
        RealMatrix xv = RealMatrix::Zero(half, v.cols()), cv = RealMatrix::Zero(half, v.cols());
        for (int j = 0; j < nf; ++j)
            for (int k = 0; k < nv; ++k) {
                const int i = j * nv + k;
                if (k + 1 < nv) xv.row(i) += std::sqrt(0.5 * (k + 1)) * v.row(i + 1);
                if (k > 0) xv.row(i) += std::sqrt(0.5 * k) * v.row(i - 1);
                if (j + 1 < nf) cv.row(i) += 0.5 * v.row(i + nv);
                if (j > 0) cv.row(i) += 0.5 * v.row(i - nv);
            }
        RealMatrix qx = v.transpose() * xv, qc = v.transpose() * cv;
        out.push_back(0.5 * (qx + qx.transpose()));
        out.push_back(0.5 * (qc + qc.transpose()));
    }
    return out;
}

/// Radiative Liouvillian split into the field-independent part (spontaneous
/// emission) and the part proportional to the field intensity (absorption and
/// stimulated emission). The turn-on envelope multiplies `field`.
struct RadiativeLiouvillian {
    ClusteredDissipator spontaneous, field;

    Matrix apply(const Matrix& rho, double envelope = 1.0) const {
        return spontaneous.apply(rho) + envelope * field.apply(rho);
    }
    Superoperator superoperator(double envelope = 1.0) const {
        return spontaneous.superoperator() + envelope * field.superoperator();
    }
};

/// `dipole` is sigma_x in the eigenbasis of `energies` (ascending). `gap` is the
/// radiative gap; cluster_tol >= gap is rejected. Secular: one jump per
/// transition at its own Bohr frequency.
inline RadiativeLiouvillian build_radiative_liouvillian(const RealVector& energies, const RealMatrix& dipole,
                                                        const DissipationConfig& cfg, double tol, double gap) {
    cfg.validate();
    if (gap > 0.0 && tol >= gap)
        throw std::invalid_argument("build_radiative_liouvillian: cluster_tol " + std::to_string(tol) +
                                    " is not below the radiative gap " + std::to_string(gap));
    const Partition part = cluster_levels(energies, cfg.secular ? 0.0 : tol);
    const int nc = part.count();
    RealMatrix spont(nc, nc), fld(nc, nc);
    for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) {
            const double w = a == b ? 0.0 : part.mean[std::size_t(a)] - part.mean[std::size_t(b)];
            spont(a, b) = radiative_spontaneous(w);
            fld(a, b) = radiative_field(w, cfg.T_rad);
        }
    const RealMatrix q = cfg.mu * dipole;
    return {ClusteredDissipator(part, {{q, spont}}), ClusteredDissipator(part, {{q, fld}})};
}

inline ClusteredDissipator build_phonon_liouvillian(const RealVector& energies,
                                                    const std::vector<RealMatrix>& couplings,
                                                    const DissipationConfig& cfg, double tol) {
    cfg.validate();
    const Partition part = cluster_levels(energies, tol);
    const int nc = part.count();
    RealMatrix rate(nc, nc);
    for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) {
            const double w = a == b ? 0.0 : part.mean[std::size_t(a)] - part.mean[std::size_t(b)];
            rate(a, b) = phonon_rate(w, cfg.eta, cfg.omega_c, cfg.T_phon);
        }
    std::vector<ClusteredDissipator::Channel> ch;
    for (const RealMatrix& q : couplings) ch.push_back({q, rate});
    return ClusteredDissipator(part, std::move(ch));
}

/// Default cluster tolerance: 10x the largest single-transition radiative rate.
inline double default_cluster_tol(const RealVector& energies, const RealMatrix& dipole, const DissipationConfig& cfg) {
    double r = 0.0;
    const int n = int(energies.size());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < a; ++b) {
            const double w = energies(a) - energies(b), d = cfg.mu * dipole(a, b);
            r = std::max(r, d * d * (radiative_spontaneous(w) + radiative_field(w, cfg.T_rad)));
        }
    return 10.0 * r;
}

/// Full generator L0 + L_rad(envelope) + L_phon on the kept eigenbasis.
/// Coherences between different clusters are never generated from a
/// block-diagonal state, so only diagonal cluster blocks are evolved.
class RetinalGenerator {
public:
    RetinalGenerator(RealVector energies, Partition blocks, RadiativeLiouvillian rad, ClusteredDissipator phon)
        : e_(std::move(energies)), blocks_(std::move(blocks)), rad_(std::move(rad)), phon_(std::move(phon)) {
        fixed_loss_ = rad_.spontaneous.loss() + phon_.loss();
    }

    const Partition& blocks() const { return blocks_; }
    const RadiativeLiouvillian& radiative() const { return rad_; }
    const ClusteredDissipator& phonon() const { return phon_; }
    const RealVector& energies() const { return e_; }
    int dim() const { return int(e_.size()); }

    /// d rho/dt for a block-diagonal rho.
    Matrix rhs(const Matrix& rho, double envelope) const {
        const int n = dim();
        Matrix out = Matrix::Zero(n, n);
        for (int c = 0; c < blocks_.count(); ++c) {
            const int s = blocks_.start[std::size_t(c)], m = blocks_.size[std::size_t(c)];
            const auto r = rho.block(s, s, m, m);
            const RealMatrix k = fixed_loss_.block(s, s, m, m) + envelope * rad_.field.loss().block(s, s, m, m);
            auto o = out.block(s, s, m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) o(i, j) = -I * (e_(s + i) - e_(s + j)) * r(i, j);
            o.noalias() -= 0.5 * (k.cast<cd>() * r + r * k.cast<cd>());
        }
        rad_.spontaneous.accumulate_gain(rho, out, 1.0);
        rad_.field.accumulate_gain(rho, out, envelope);
        phon_.accumulate_gain(rho, out, 1.0);
        return out;
    }

    /// Full generator action on an arbitrary rho (dense; for checks).
    Matrix apply(const Matrix& rho, double envelope = 1.0) const {
        Matrix out = -I * (e_.cast<cd>().asDiagonal() * rho - rho * e_.cast<cd>().asDiagonal());
        return out + rad_.apply(rho, envelope) + phon_.apply(rho);
    }

    /// Number of block-diagonal degrees of freedom.
    int block_dim() const {
        int d = 0;
        for (int m : blocks_.size) d += m * m;
        return d;
    }

    Vector pack(const Matrix& rho) const {
        Vector v(block_dim());
        int k = 0;
        for (int c = 0; c < blocks_.count(); ++c) {
            const int s = blocks_.start[std::size_t(c)], m = blocks_.size[std::size_t(c)];
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) v(k++) = rho(s + i, s + j);
        }
        return v;
    }

    Matrix unpack(const Vector& v) const {
        Matrix rho = Matrix::Zero(dim(), dim());
        int k = 0;
        for (int c = 0; c < blocks_.count(); ++c) {
            const int s = blocks_.start[std::size_t(c)], m = blocks_.size[std::size_t(c)];
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) rho(s + i, s + j) = v(k++);
        }
        return rho;
    }

    /// Block-diagonal steady state at a fixed envelope reached from `rho0`.
    /// The solve is restricted to the degrees of freedom coupled to rho0 (entries
    /// below 1e-12 of the largest generator element are ignored for this), which
    /// removes symmetry sectors the dynamics never enter.
    Matrix steady_state(const Matrix& rho0, double envelope = 1.0) const {
        const int d = block_dim();
        Matrix m(d, d);
        for (int k = 0; k < d; ++k) {
            Vector u = Vector::Zero(d);
            u(k) = 1.0;
            m.col(k) = pack(rhs(unpack(u), envelope));
        }
        const double cut = 1e-12 * m.cwiseAbs().maxCoeff();
        const Vector v0 = pack(rho0);
        std::vector<int> seen(std::size_t(d), 0), stack;
        for (int k = 0; k < d; ++k)
            if (v0(k) != 0.0) {
                seen[std::size_t(k)] = 1;
                stack.push_back(k);
            }
        while (!stack.empty()) {
            const int k = stack.back();
            stack.pop_back();
            for (int r = 0; r < d; ++r)
                if (!seen[std::size_t(r)] && std::abs(m(r, k)) > cut) {
                    seen[std::size_t(r)] = 1;
                    stack.push_back(r);
                }
        }
        std::vector<int> idx;
        for (int k = 0; k < d; ++k)
            if (seen[std::size_t(k)]) idx.push_back(k);
        const int r = int(idx.size());
        const Vector trace_full = pack(Matrix::Identity(dim(), dim()));
        Matrix a(r, r), sub(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) sub(i, j) = m(idx[std::size_t(i)], idx[std::size_t(j)]);
        a = sub;
        for (int j = 0; j < r; ++j) a(0, j) = trace_full(idx[std::size_t(j)]);
        Vector b = Vector::Zero(r);
        b(0) = 1.0;
        const Vector x = Eigen::FullPivLU<Matrix>(a).solve(b);
        const double res = (sub * x).cwiseAbs().maxCoeff();
        if (!(res <= 1e-10) || !x.allFinite())
            throw NoSteadyState("retinal steady_state: residual " + std::to_string(res));
        Vector full = Vector::Zero(d);
        for (int i = 0; i < r; ++i) full(idx[std::size_t(i)]) = x(i);
        Matrix rho = unpack(full);
        return 0.5 * (rho + rho.adjoint());
    }

private:
    RealVector e_;
    Partition blocks_;
    RadiativeLiouvillian rad_;
    ClusteredDissipator phon_;
    RealMatrix fixed_loss_;
};

/// Everything built once per parameter set.
struct Model {
    Params params;
    BasisSizes sizes;
    DissipationConfig dissipation;
    VibronicBasis basis;
    Projectors projectors;
    RealMatrix dipole;  // sigma_x in the eigenbasis
    double cluster_tol = 0.0;
    std::shared_ptr<RetinalGenerator> generator;
};

inline Model build_model(const Params& p, BasisSizes sz, int n_keep, const DissipationConfig& cfg) {
    cfg.validate();
    Model m;
    m.params = p;
    m.sizes = sz;
    m.dissipation = cfg;
    m.basis = vibronic_eigenbasis(build_2s2m_hamiltonian(p, sz), n_keep);
    m.projectors = diabatic_projectors(m.basis);
    m.dipole = electronic_sigma_x(m.basis);
    const RealVector& e = m.basis.energies;
    m.cluster_tol = cfg.cluster_tol ? *cfg.cluster_tol : default_cluster_tol(e, m.dipole, cfg);
    auto rad = build_radiative_liouvillian(e, m.dipole, cfg, m.cluster_tol, p.E1 - p.E0);
    auto phon = build_phonon_liouvillian(e, phonon_couplings(m.basis), cfg, m.cluster_tol);
    m.generator =
        std::make_shared<RetinalGenerator>(e, cluster_levels(e, m.cluster_tol), std::move(rad), std::move(phon));
    return m;
}

struct TrackedPair {
    std::string label;
    int i = 0, j = 0;
};

/// Pairs of even-parity states in a common cluster chosen by role:
///   bright       - largest |<i|mu|g><j|mu|g>|;
///   product      - largest min(trans, diabatic1) weight among pairs below the bright pair;
///   intermediate - largest min(diabatic1) weight among dark pairs (bright weight
///                  < 1e-3 of the maximum) between the product and bright pairs.
inline TrackedPair select_pair(const Model& m, const std::string& role) {
    const auto& part = m.generator->blocks();
    const auto& lab = m.basis.labels;
    const int n = m.basis.size();
    auto same = [&](int i, int j) {
        return part.of[std::size_t(i)] == part.of[std::size_t(j)] && lab[std::size_t(i)].parity > 0.5 &&
               lab[std::size_t(j)].parity > 0.5;
    };
    auto best = [&](auto score, auto allowed) {
        double s = 0.0;
        TrackedPair p{role, -1, -1};
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (same(i, j) && allowed(i, j)) {
                    const double v = score(i, j);
                    if (v > s) {
                        s = v;
                        p.i = i;
                        p.j = j;
                    }
                }
        return p;
    };
    auto bright_score = [&](int i, int j) { return std::sqrt(lab[std::size_t(i)].bright * lab[std::size_t(j)].bright); };
    const TrackedPair bright = best(bright_score, [](int, int) { return true; });
    if (role == "bright") {
        if (bright.i < 0) throw std::invalid_argument("select_pair: no cluster holds two bright states");
        return bright;
    }
    const int top = bright.i < 0 ? n : bright.i;
    auto prod_score = [&](int i, int j) {
        auto w = [&](int a) { return std::min(lab[std::size_t(a)].trans, lab[std::size_t(a)].diabatic1); };
        return std::min(w(i), w(j));
    };
    const TrackedPair product = best(prod_score, [&](int, int j) { return j < top; });
    if (role == "product") {
        if (product.i < 0) throw std::invalid_argument("select_pair: no product pair found");
        return product;
    }
    if (role == "intermediate") {
        double bmax = 0.0;
        for (const auto& l : lab) bmax = std::max(bmax, l.bright);
        const int bottom = product.j < 0 ? 0 : product.j;
        auto score = [&](int i, int j) { return std::min(lab[std::size_t(i)].diabatic1, lab[std::size_t(j)].diabatic1); };
        const TrackedPair p = best(score, [&](int i, int j) {
            return i > bottom && j < top && lab[std::size_t(i)].bright < 1e-3 * bmax &&
                   lab[std::size_t(j)].bright < 1e-3 * bmax;
        });
        if (p.i < 0) throw std::invalid_argument("select_pair: no intermediate pair found");
        return p;
    }
    throw std::invalid_argument("select_pair: unknown role '" + role + "' (bright, intermediate, product)");
}

/// Ground eigenstate.
inline Matrix initial_state(const Model& m) {
    Matrix rho = Matrix::Zero(m.basis.size(), m.basis.size());
    rho(0, 0) = 1.0;
    return rho;
}

/// C_ij of the leading-order excitation from the initial state, i.e. the
/// t -> 0+ limit of the coherence ratio for any envelope.
inline double initial_coherence_ratio(const Model& m, int i, int j) {
    Matrix d = Matrix::Zero(m.basis.size(), m.basis.size());
    m.generator->radiative().field.accumulate_gain(initial_state(m), d, 1.0);
    const double den = d(i, i).real() * d(j, j).real();
    if (!(den > 0.0)) return 0.0;
    return std::norm(d(i, j)) / den;
}

inline double block_expectation(const RealMatrix& op, const Matrix& rho, const Partition& blocks) {
    double v = 0.0;
    for (int c = 0; c < blocks.count(); ++c) {
        const int s = blocks.start[std::size_t(c)], m = blocks.size[std::size_t(c)];
        v += (op.block(s, s, m, m).cast<cd>().cwiseProduct(rho.block(s, s, m, m).transpose())).sum().real();
    }
    return v;
}

struct RunOptions {
    double t_final = 1519.0;  // hbar/eV
    int n_points = 201;
    Tolerance tol{1e-8, 1e-16};
};

struct RetinalRun {
    Trajectory trajectory;  // observables only; states are not stored
    std::vector<TrackedPair> pairs;
    std::vector<double> initial_coherence;  // per pair, t -> 0+ limit
    double max_trace_drift = 0.0;
    double min_eigenvalue = 0.0;
    Matrix final_state;
};

inline std::string pair_key(const TrackedPair& p, const std::string& what) {
    return "pair_" + std::to_string(p.i) + "_" + std::to_string(p.j) + "_" + what;
}

/// Propagates from the ground eigenstate with the envelope scaling the field
/// part of the radiative Liouvillian, recording Y1 and per-pair observables.
inline RetinalRun run_retinal_scenario(const Model& m, const TurnOnEnvelope& env,
                                       const std::vector<TrackedPair>& pairs, RunOptions opt = {}) {
    if (!(opt.t_final > 0.0) || opt.n_points < 2) throw std::invalid_argument("run_retinal_scenario: invalid grid");
    const RetinalGenerator& g = *m.generator;
    const int n = g.dim();
    for (const auto& p : pairs)
        if (p.i < 0 || p.j < 0 || p.i >= n || p.j >= n || p.i == p.j)
            throw std::invalid_argument("run_retinal_scenario: invalid tracked pair");
    RetinalRun run;
    run.pairs = pairs;
    for (const auto& p : pairs) run.initial_coherence.push_back(initial_coherence_ratio(m, p.i, p.j));
    auto& tr = run.trajectory;
    tr.times = uniform_grid(0.0, opt.t_final, std::size_t(opt.n_points));
    auto& y1 = tr.observables["Y1"];
    std::vector<std::vector<double>*> cols;
    for (const auto& p : pairs)
        for (const char* w : {"rho_ii", "rho_jj", "abs_rho_ij", "C"}) cols.push_back(&tr.observables[pair_key(p, w)]);

    auto f = [&](double t, const Vector& v) -> Vector { return g.pack(g.rhs(g.unpack(v), env(t))); };
    auto observe = [&](double, const Vector& v) {
        const Matrix rho = g.unpack(v);
        run.max_trace_drift = std::max(run.max_trace_drift, std::abs(rho.trace().real() - 1.0));
        for (int c = 0; c < g.blocks().count(); ++c) {
            const int s = g.blocks().start[std::size_t(c)], k = g.blocks().size[std::size_t(c)];
            const Eigen::SelfAdjointEigenSolver<Matrix> es(rho.block(s, s, k, k), Eigen::EigenvaluesOnly);
            run.min_eigenvalue = std::min(run.min_eigenvalue, es.eigenvalues().minCoeff());
        }
        const double t1 = block_expectation(m.projectors.trans1, rho, g.blocks());
        const double c0 = block_expectation(m.projectors.cis0, rho, g.blocks());
        y1.push_back(c0 + t1 < 1e-14 ? 0.0 : std::clamp(t1 / (c0 + t1), 0.0, 1.0));
        std::size_t k = 0;
        for (const auto& p : pairs) {
            cols[k++]->push_back(rho(p.i, p.i).real());
            cols[k++]->push_back(rho(p.j, p.j).real());
            cols[k++]->push_back(std::abs(rho(p.i, p.j)));
            cols[k++]->push_back(coherence_ratio(rho, p.i, p.j));
        }
        run.final_state = rho;
    };
    auto post = [&](double, Vector& v) {
        Matrix rho = g.unpack(v);
        v = g.pack(0.5 * (rho + rho.adjoint()));
    };
    integrate<Vector>(f, g.pack(initial_state(m)), tr.times, opt.tol, observe, post);
    if (run.max_trace_drift > 1e-8)
        throw InvariantViolation("run_retinal_scenario: trace drift " + std::to_string(run.max_trace_drift));
    return run;
}

}  // namespace nicoh::retinal
