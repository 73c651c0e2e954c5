#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nicoh/core.hpp>

#include "support.hpp"

using namespace nicoh;
using testsupport::random_state;

namespace {

Superoperator random_lindblad(std::mt19937_64& rng, Eigen::Index n, int jumps) {
    Superoperator l = Superoperator::commutator(HermitianOperator(testsupport::random_hermitian(rng, n)));
    for (int k = 0; k < jumps; ++k) l += Superoperator::lindblad(0.5 * testsupport::random_matrix(rng, n));
    return l;
}

}  // namespace

TEST(DensityMatrix, RejectsInvalidStates) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 0.5;
    EXPECT_THROW(DensityMatrix{m}, InvariantViolation);
    m(0, 0) = 1.2;
    m(1, 1) = -0.2;
    EXPECT_THROW(DensityMatrix{m}, InvariantViolation);
    EXPECT_THROW(DensityMatrix(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(DensityMatrix, HermitizesOnConstruction) {
    Matrix m(2, 2);
    m << 0.5, cd(0.1, 0.2), cd(0.1, -0.2 + 1e-15), 0.5;
    const DensityMatrix rho(m);
    EXPECT_EQ(rho(0, 1), std::conj(rho(1, 0)));
}

TEST(HermitianOperator, RejectsNonHermitian) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    EXPECT_THROW(HermitianOperator{m}, std::invalid_argument);
}

TEST(Expectation, Identity) {
    std::mt19937_64 rng(1);
    const DensityMatrix rho(random_state(rng, 4));
    EXPECT_NEAR(expectation(HermitianOperator::identity(4), rho), 1.0, 1e-14);
}

TEST(Expectation, DiagonalCase) {
    const auto a = HermitianOperator::diagonal(Eigen::Vector2d(0.0, 1.0));
    Matrix r = Matrix::Zero(2, 2);
    r(0, 0) = 0.3;
    r(1, 1) = 0.7;
    EXPECT_NEAR(expectation(a, DensityMatrix(r)), 0.7, 1e-15);
}

TEST(Expectation, MatchesEigenbasisSum) {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
        const HermitianOperator a(testsupport::random_hermitian(rng, 4));
        const DensityMatrix rho(random_state(rng, 4));
        const Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
        const Matrix rho_eig = es.eigenvectors().adjoint() * rho.matrix() * es.eigenvectors();
        double oracle = 0.0;
        for (int n = 0; n < 4; ++n) oracle += es.eigenvalues()(n) * rho_eig(n, n).real();
        EXPECT_NEAR(expectation(a, rho), oracle, 1e-12);
    }
}

TEST(Expectation, DimensionMismatch) {
    EXPECT_THROW(expectation(HermitianOperator::identity(3), DensityMatrix::maximally_mixed(2)), DimensionMismatch);
}

TEST(Gibbs, Limits) {
    const auto h = HermitianOperator::diagonal(Eigen::Vector2d(0.0, 1.0));
    const auto hot = gibbs_state(h, 1e12);
    EXPECT_NEAR(hot.population(0), 0.5, 1e-10);
    EXPECT_NEAR(hot.population(1), 0.5, 1e-10);
    const auto cold = gibbs_state(h, 1e-3);
    EXPECT_NEAR(cold.population(0), 1.0, 1e-15);
    EXPECT_NEAR(cold.population(1), 0.0, 1e-15);
}

TEST(Gibbs, UnitTemperature) {
    const auto rho = gibbs_state(HermitianOperator::diagonal(Eigen::Vector2d(0.0, 1.0)), 1.0);
    const double e = std::exp(-1.0);
    EXPECT_NEAR(rho.population(0), 1.0 / (1.0 + e), 1e-14);
    EXPECT_NEAR(rho.population(1), e / (1.0 + e), 1e-14);
    EXPECT_NEAR(rho.population(0), 0.7311, 1e-4);
}

TEST(Gibbs, RejectsNonPositiveTemperature) {
    EXPECT_THROW(gibbs_state(HermitianOperator::identity(2), 0.0), std::invalid_argument);
    EXPECT_THROW(gibbs_state(HermitianOperator::identity(2), -1.0), std::invalid_argument);
}

TEST(Gibbs, StationaryUnderCommutator) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10; ++k) {
        const HermitianOperator h(testsupport::random_hermitian(rng, 4));
        const auto rho = gibbs_state(h, 0.7);
        EXPECT_LT(Superoperator::commutator(h).apply(rho.matrix()).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Superoperator, GeneratorsAreTraceAnnihilatingAndHermiticityPreserving) {
    std::mt19937_64 rng(4);
    for (Eigen::Index n = 2; n <= 4; ++n) {
        const auto l = random_lindblad(rng, n, 3);
        const auto [tr, herm] = testsupport::generator_defects(l, rng);
        EXPECT_LT(tr, 1e-12);
        EXPECT_LT(herm, 1e-12);
    }
}

TEST(Superoperator, FromActionMatchesCommutator) {
    std::mt19937_64 rng(5);
    const HermitianOperator h(testsupport::random_hermitian(rng, 3));
    const auto tab = Superoperator::from_action(3, [&](const Matrix& r) -> Matrix {
        return -I * (h.matrix() * r - r * h.matrix());
    });
    EXPECT_LT((tab.matrix() - Superoperator::commutator(h).matrix()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Envelope, SuddenAndExponential) {
    const auto s = TurnOnEnvelope::sudden();
    EXPECT_EQ(s(0.0), 1.0);
    EXPECT_EQ(s(5.0), 1.0);
    const auto e = TurnOnEnvelope::exponential(2.0);
    EXPECT_EQ(e(0.0), 0.0);
    EXPECT_NEAR(e(2.0), 1.0 - std::exp(-1.0), 1e-15);
    double prev = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double v = e(0.3 * k);
        EXPECT_GE(v, prev);
        EXPECT_LE(v, 1.0);
        prev = v;
    }
    EXPECT_THROW(TurnOnEnvelope::exponential(-1.0), std::invalid_argument);
}

TEST(Propagate, ZeroGenerator) {
    std::mt19937_64 rng(6);
    const DensityMatrix rho0(random_state(rng, 3));
    const auto traj = propagate(Superoperator::zero(3), rho0, uniform_grid(0.0, 5.0, 11));
    ASSERT_EQ(traj.states.size(), 11u);
    for (const auto& s : traj.states) EXPECT_LT((s - rho0.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Propagate, UnitaryRotation) {
    const double w = 1.7;
    const auto h = HermitianOperator::diagonal(Eigen::Vector2d(0.0, w));
    Vector psi(2);
    psi << 1.0, 1.0;
    const auto rho0 = DensityMatrix::pure(psi);
    const auto times = uniform_grid(0.0, 5.0, 51);
    const auto traj = propagate(Superoperator::commutator(h), rho0, times, {{1e-10, 1e-12}});
    for (std::size_t k = 0; k < times.size(); ++k) {
        const cd expected = 0.5 * std::exp(I * w * times[k]);
        EXPECT_LT(std::abs(traj.states[k](0, 1) - expected), 1e-8);
        EXPECT_NEAR(traj.states[k](0, 0).real(), 0.5, 1e-12);
    }
}

TEST(Propagate, MatchesMatrixExponential) {
    std::mt19937_64 rng(7);
    for (Eigen::Index n = 2; n <= 4; ++n)
        for (int trial = 0; trial < 3; ++trial) {
            const auto l = random_lindblad(rng, n, 2);
            const DensityMatrix rho0(random_state(rng, n));
            const auto times = uniform_grid(0.0, 5.0, 6);
            const auto traj = propagate(l, rho0, times, {{1e-11, 1e-13}});
            for (std::size_t k = 0; k < times.size(); ++k)
                EXPECT_LT((traj.states[k] - testsupport::expm_propagate(l, rho0.matrix(), times[k]))
                              .cwiseAbs()
                              .maxCoeff(),
                          1e-8);
        }
}

TEST(PropagateMidpointExponential, ConstantGeneratorMatchesMatrixExponential) {
    std::mt19937_64 rng(8);
    for (Eigen::Index n = 2; n <= 4; ++n) {
        const auto l = random_lindblad(rng, n, 2);
        const DensityMatrix rho0(random_state(rng, n));
        const auto times = uniform_grid(0.0, 5.0, 6);
        const auto traj = propagate_midpoint_exponential(l, Superoperator::zero(n), [](double) { return 1.0; }, rho0, times, 0.7);
        for (std::size_t k = 0; k < times.size(); ++k)
            EXPECT_LT((traj.states[k] - testsupport::expm_propagate(l, rho0.matrix(), times[k])).cwiseAbs().maxCoeff(),
                      1e-12);
    }
}

TEST(PropagateMidpointExponential, AgreesWithAdaptiveIntegratorUnderEnvelope) {
    std::mt19937_64 rng(9);
    const auto l0 = random_lindblad(rng, 3, 1);
    const auto l1 = random_lindblad(rng, 3, 2);
    const auto env = TurnOnEnvelope::exponential(2.0);
    const DensityMatrix rho0(random_state(rng, 3));
    const auto times = uniform_grid(0.0, 6.0, 13);
    const auto ref = propagate(
        [&](double t, const Matrix& r) -> Matrix { return (l0 + env(t) * l1).apply(r); }, rho0, times,
        {{1e-12, 1e-14}});
    const auto mag = propagate_midpoint_exponential(l0, l1, env, rho0, times, 0.001);
    for (std::size_t k = 0; k < times.size(); ++k)
        EXPECT_LT((mag.states[k] - ref.states[k]).cwiseAbs().maxCoeff(), 1e-7) << times[k];
    // second order: halving the step cuts the error by about 4
    const auto coarse = propagate_midpoint_exponential(l0, l1, env, rho0, times, 0.5);
    const auto fine = propagate_midpoint_exponential(l0, l1, env, rho0, times, 0.25);
    const double e1 = (coarse.states.back() - ref.states.back()).cwiseAbs().maxCoeff();
    const double e2 = (fine.states.back() - ref.states.back()).cwiseAbs().maxCoeff();
    EXPECT_GT(e1 / e2, 3.5);
    EXPECT_LT(e1 / e2, 4.5);
    EXPECT_THROW(propagate_midpoint_exponential(l0, l1, env, rho0, {1.0, 1.0}, 0.1), std::invalid_argument);
    EXPECT_THROW(propagate_midpoint_exponential(l0, l1, env, rho0, times, 0.0), std::invalid_argument);
}

TEST(Propagate, ReportsFailureTime) {
    // Anti-damping of a population breaks trace preservation.
    const auto bad = [](double, const Matrix& r) -> Matrix { return r; };
    try {
        propagate(bad, DensityMatrix::basis_state(2, 0), uniform_grid(0.0, 1.0, 3));
        FAIL() << "expected IntegrationFailure";
    } catch (const IntegrationFailure& e) {
        EXPECT_GT(e.time, 0.0);
        EXPECT_LT(e.time, 1.0);
    }
}

TEST(SteadyState, TwoLevelDecay) {
    Matrix sm = Matrix::Zero(2, 2);
    sm(0, 1) = 1.0;
    const auto ss = steady_state(Superoperator::lindblad(sm));
    EXPECT_NEAR(ss.rho.population(0), 1.0, 1e-12);
    EXPECT_FALSE(ss.degenerate);
}

TEST(SteadyState, NoStationaryState) {
    // Pure loss: no trace-preserving kernel.
    Matrix m = -Matrix::Identity(4, 4);
    EXPECT_THROW(steady_state(Superoperator(2, m)), NoSteadyState);
}

TEST(SteadyState, DegenerateKernelFromMaximallyMixed) {
    // Pure dephasing leaves every diagonal state stationary.
    Matrix z = Matrix::Zero(2, 2);
    z(0, 0) = 1.0;
    z(1, 1) = -1.0;
    const auto ss = steady_state(Superoperator::lindblad(z));
    EXPECT_TRUE(ss.degenerate);
    EXPECT_EQ(ss.nullity, 2);
    EXPECT_NEAR(ss.rho.population(0), 0.5, 1e-12);
}

TEST(SteadyState, AgreesWithLongTimePropagation) {
    std::mt19937_64 rng(8);
    for (Eigen::Index n = 2; n <= 4; ++n) {
        const auto l = random_lindblad(rng, n, 3);
        const auto ss = steady_state(l);
        ASSERT_FALSE(ss.degenerate);
        EXPECT_LT(ss.residual, 1e-10);
        // Slowest nonzero decay rate sets the horizon.
        const Eigen::ComplexEigenSolver<Matrix> es(l.matrix());
        double slowest = 1e300;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            const double re = -es.eigenvalues()(k).real();
            if (re > 1e-9) slowest = std::min(slowest, re);
        }
        const double t_end = 50.0 / slowest;
        for (int s = 0; s < 5; ++s) {
            const DensityMatrix rho0(random_state(rng, n));
            const auto traj = propagate(l, rho0, {0.0, t_end}, {{1e-10, 1e-12}});
            EXPECT_LT((traj.states.back() - ss.rho.matrix()).cwiseAbs().maxCoeff(), 1e-6);
        }
    }
}
