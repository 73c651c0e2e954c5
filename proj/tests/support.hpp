#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <nicoh/core.hpp>

namespace testsupport {

using nicoh::cd;
using nicoh::Matrix;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cd(g(rng), g(rng));
    return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
    const Matrix m = random_matrix(rng, n);
    return 0.5 * (m + m.adjoint());
}

/// Random full-rank density matrix (Ginibre ensemble).
inline Matrix random_state(std::mt19937_64& rng, Eigen::Index n) {
    const Matrix g = random_matrix(rng, n);
    Matrix r = g * g.adjoint();
    r /= r.trace();
    return 0.5 * (r + r.adjoint());
}

/// Random Hermitian matrix with unit trace (not necessarily positive).
inline Matrix random_unit_trace_hermitian(std::mt19937_64& rng, Eigen::Index n) {
    Matrix h = random_hermitian(rng, n);
    h += Matrix::Identity(n, n) * ((1.0 - h.trace().real()) / double(n));
    return h;
}

/// Largest |Tr L(rho)| and Hermiticity defect over `samples` random inputs.
inline std::pair<double, double> generator_defects(const nicoh::Superoperator& l, std::mt19937_64& rng,
                                                   int samples = 100) {
    double tr = 0.0, herm = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Matrix out = l.apply(random_unit_trace_hermitian(rng, l.dim()));
        tr = std::max(tr, std::abs(out.trace()));
        herm = std::max(herm, nicoh::hermiticity_defect(out));
    }
    return {tr, herm};
}

/// exp(L t) rho0 by dense matrix exponential.
inline Matrix expm_propagate(const nicoh::Superoperator& l, const Matrix& rho0, double t) {
    const Matrix p = (l.matrix() * t).exp();
    return nicoh::unvectorize(p * nicoh::vectorize(rho0), l.dim());
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < n; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
    template <class F>
    double integrate(F&& f, double a, double b) const {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(0.5 * (b - a) * x[i] + 0.5 * (a + b));
        return 0.5 * (b - a) * s;
    }
};

}  // namespace testsupport
