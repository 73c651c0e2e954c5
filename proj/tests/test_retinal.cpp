#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <nicoh/retinal.hpp>
#include <nicoh/vsystem.hpp>

#include "support.hpp"

using namespace nicoh;
using namespace nicoh::retinal;

namespace {
constexpr double pi = std::numbers::pi;

Params reference_params() {
    Params p;
    p.E0 = 0.0;
    p.E1 = 2.345;
    p.V0 = 3.6;
    p.V1 = 1.09;
    p.omega = 0.19;
    p.kappa = 0.1;
    p.lambda = 0.19;
    p.inv_inertia = 0.02;
    return p;
}

DissipationConfig reference_dissipation() {
    DissipationConfig d;
    d.mu = 0.012;
    d.T_rad = 5800.0 * kKelvinToEv;
    d.T_phon = 278.0 * kKelvinToEv;
    d.eta = 0.1;
    d.omega_c = 0.15;
    d.cluster_tol = 0.01;
    return d;
}

RealMatrix dense_hamiltonian(const SparseHamiltonian& h) { return RealMatrix(h.h); }

// Small model for dynamics; the spectrum is not converged but every structural
// property still applies.
const Model& small_model(bool secular) {
    static const auto make = [](bool s) {
        DissipationConfig d = reference_dissipation();
        d.secular = s;
        d.cluster_tol = 0.05;
        return build_model(reference_params(), BasisSizes{16, 8}, 40, d);
    };
    static const Model ns = make(false), sec = make(true);
    return secular ? sec : ns;
}

const Model& reference_model(bool secular = false) {
    static const auto make = [](bool s) {
        DissipationConfig d = reference_dissipation();
        d.secular = s;
        return build_model(reference_params(), BasisSizes{}, 150, d);
    };
    static const Model ns = make(false);
    if (!secular) return ns;
    static const Model sec = make(true);
    return sec;
}

RealMatrix random_symmetric(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    RealMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = g(rng);
    return 0.5 * (m + m.transpose());
}
}  // namespace

TEST(RetinalParams, Validation) {
    Params p = reference_params();
    p.omega = 0.0;
    EXPECT_THROW(build_2s2m_hamiltonian(p, BasisSizes{8, 4}), std::invalid_argument);
    p = reference_params();
    p.inv_inertia = -1.0;
    EXPECT_THROW(build_2s2m_hamiltonian(p, BasisSizes{8, 4}), std::invalid_argument);
    EXPECT_THROW(build_2s2m_hamiltonian(reference_params(), BasisSizes{7, 4}), std::invalid_argument);
    EXPECT_THROW(build_2s2m_hamiltonian(reference_params(), BasisSizes{8, 3}), std::invalid_argument);
}

TEST(Hamiltonian, NoInterSurfaceCouplingIsBlockDiagonal) {
    Params p = reference_params();
    p.lambda = 0.0;
    const auto h = build_2s2m_hamiltonian(p, BasisSizes{8, 4});
    const RealMatrix d = dense_hamiltonian(h);
    const int half = 32;
    EXPECT_EQ(d.block(0, half, half, half).cwiseAbs().maxCoeff(), 0.0);
    const auto b = vibronic_eigenbasis(h, 64);
    for (const auto& l : b.labels) {
        EXPECT_TRUE(l.diabatic0 < 1e-12 || l.diabatic0 > 1.0 - 1e-12);
        EXPECT_NEAR(l.diabatic0 + l.diabatic1, 1.0, 1e-12);
    }
}

TEST(Hamiltonian, SeparableSpectrum) {
    Params p;
    p.E0 = 0.3;
    p.E1 = 1.7;
    p.V0 = p.V1 = p.kappa = p.lambda = 0.0;
    p.omega = 0.23;
    p.inv_inertia = 0.05;
    const BasisSizes sz{8, 5};
    std::vector<double> expected;
    for (double e : {p.E0, p.E1})
        for (int j = 0; j < sz.n_fourier; ++j)
            for (int v = 0; v < sz.n_ho; ++v) {
                const double k = sz.wavenumber(j);
                expected.push_back(e + p.omega * (v + 0.5) + p.inv_inertia * k * k);
            }
    std::sort(expected.begin(), expected.end());
    const auto b = vibronic_eigenbasis(build_2s2m_hamiltonian(p, sz), sz.dim());
    for (int a = 0; a < sz.dim(); ++a) EXPECT_NEAR(b.energies(a), expected[std::size_t(a)], 1e-12);
}

TEST(Hamiltonian, ReferenceConicalIntersection) {
    const Params p = reference_params();
    const auto [lo, hi] = adiabatic_potentials(p, 0.5 * pi, 0.0);
    EXPECT_NEAR(hi - lo, 0.0, 1e-12);
    const auto [lo0, hi0] = adiabatic_potentials(p, 0.0, 0.0);
    EXPECT_GT(hi0 - lo0, 1.0);
    const auto [lo1, hi1] = adiabatic_potentials(p, 0.5 * pi, 0.1);
    EXPECT_GT(hi1 - lo1, 0.01);
}

TEST(Eigenbasis, LanczosMatchesDense) {
    const auto h = build_2s2m_hamiltonian(reference_params(), BasisSizes{8, 4});
    const auto full = vibronic_eigenbasis(h, 64);
    EXPECT_TRUE(full.dense);
    const auto part = vibronic_eigenbasis(h, 12);
    EXPECT_FALSE(part.dense);
    for (int a = 0; a < 12; ++a) {
        EXPECT_NEAR(part.energies(a), full.energies(a), 1e-8);
        EXPECT_NEAR(std::abs(part.vectors.col(a).dot(full.vectors.col(a))), 1.0, 1e-8);
    }
    const double norm = dense_hamiltonian(h).cwiseAbs().rowwise().sum().maxCoeff();
    EXPECT_LT(part.max_residual, 1e-8 * norm);
}

TEST(Eigenbasis, RejectsOversizedRequest) {
    const auto h = build_2s2m_hamiltonian(reference_params(), BasisSizes{8, 4});
    EXPECT_THROW(vibronic_eigenbasis(h, 65), std::invalid_argument);
    EXPECT_THROW(vibronic_eigenbasis(h, 0), std::invalid_argument);
}

TEST(ReferenceConfig, EigenbasisIsOrthonormalWithCisGround) {
    const auto& b = reference_model().basis;
    ASSERT_EQ(b.size(), 150);
    const RealMatrix gram = b.vectors.transpose() * b.vectors;
    EXPECT_LT((gram - RealMatrix::Identity(150, 150)).cwiseAbs().maxCoeff(), 1e-10);
    for (int a = 1; a < b.size(); ++a) EXPECT_GE(b.energies(a), b.energies(a - 1));
    EXPECT_GT(b.labels[0].cis, 0.9);
    for (const auto& l : b.labels)
        for (double w : {l.bright, l.cis, l.trans, l.diabatic0, l.diabatic1}) {
            EXPECT_GE(w, 0.0);
            EXPECT_LE(w, 1.0 + 1e-12);
        }
}

TEST(ReferenceConfig, BrightPairSharesClusterAndExcitesCoherently) {
    const Model& m = reference_model();
    const auto p = select_pair(m, "bright");
    EXPECT_EQ(m.generator->blocks().of[std::size_t(p.i)], m.generator->blocks().of[std::size_t(p.j)]);
    EXPECT_GT(m.basis.labels[std::size_t(p.i)].bright, 1e-3);
    EXPECT_GT(m.basis.labels[std::size_t(p.j)].bright, 1e-3);
    EXPECT_NEAR(initial_coherence_ratio(m, p.i, p.j), 1.0, 1e-12);
}

TEST(CisStep, MatchesAnalyticFourierCoefficients) {
    const int nf = 16;
    const RealMatrix t = cis_step_matrix(nf);
    for (int a = 0; a < nf; ++a)
        for (int b = 0; b < nf; ++b) {
            const int m = b - a;
            const double expected = m == 0 ? 0.5 : std::sin(m * pi / 2) / (pi * m);
            EXPECT_NEAR(t(a, b), expected, 1e-12);
        }
}

TEST(Projectors, PartitionAndDisjointness) {
    const auto b = vibronic_eigenbasis(build_2s2m_hamiltonian(reference_params(), BasisSizes{8, 4}), 64);
    const auto pr = diabatic_projectors(b);
    const RealMatrix trans0 = project_region(b, 0, false);
    RealVector surf(64);
    surf.head(32).setOnes();
    surf.tail(32).setZero();
    const RealMatrix p0 = b.vectors.transpose() * surf.asDiagonal() * b.vectors;
    EXPECT_LT((pr.cis0 + trans0 - p0).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((pr.cis0 * pr.trans1).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((pr.cis0 - pr.cis0.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Projectors, IdempotencyDefectIsReported) {
    const auto pr = diabatic_projectors(reference_model().basis);
    // A step function compressed onto a finite basis is not a projector; the
    // defect is finite and bounded by 1/4 (eigenvalues stay in [0, 1]).
    EXPECT_GT(pr.idempotency_defect, 0.0);
    EXPECT_LE(pr.idempotency_defect, 0.25 + 1e-12);
    const Eigen::SelfAdjointEigenSolver<RealMatrix> es(pr.cis0);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
    EXPECT_LT(es.eigenvalues().maxCoeff(), 1.0 + 1e-10);
}

TEST(QuantumYield, Examples) {
    Projectors p;
    p.cis0 = RealMatrix::Zero(3, 3);
    p.trans1 = RealMatrix::Zero(3, 3);
    p.cis0(0, 0) = 1.0;
    p.trans1(2, 2) = 1.0;
    Matrix rho = Matrix::Zero(3, 3);
    rho(0, 0) = 1.0;
    EXPECT_EQ(quantum_yield(p, rho), 0.0);
    rho(0, 0) = rho(2, 2) = 0.3;
    rho(1, 1) = 0.4;
    EXPECT_DOUBLE_EQ(quantum_yield(p, rho), 0.5);
    rho(0, 0) = 0.0;
    rho(1, 1) = 0.7;
    EXPECT_EQ(quantum_yield(p, rho), 1.0);
    rho.setZero();
    rho(1, 1) = 1.0;
    EXPECT_EQ(quantum_yield(p, rho), 0.0);
}

TEST(CoherenceRatio, Examples) {
    Matrix rho = Matrix::Constant(2, 2, 0.5);
    EXPECT_NEAR(coherence_ratio(rho, 0, 1), 1.0, 1e-15);
    rho(0, 1) = rho(1, 0) = 0.0;
    EXPECT_EQ(coherence_ratio(rho, 0, 1), 0.0);
    rho(0, 0) = 0.0;
    rho(1, 1) = 1.0;
    rho(0, 1) = rho(1, 0) = 0.1;
    EXPECT_EQ(coherence_ratio(rho, 0, 1), 0.0);
    EXPECT_THROW(coherence_ratio(rho, 1, 1), std::invalid_argument);
    std::mt19937_64 rng(50);
    for (int k = 0; k < 50; ++k) {
        const Matrix r = testsupport::random_state(rng, 4);
        const double c = coherence_ratio(r, 1, 3);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0 + 1e-12);
    }
}

TEST(Clustering, SingleLinkageOnGaps) {
    RealVector e(6);
    e << 0.0, 1.0, 1.004, 1.008, 1.02, 2.0;
    const auto p = cluster_levels(e, 0.005);
    ASSERT_EQ(p.count(), 4);
    EXPECT_EQ(p.size[1], 3);
    EXPECT_NEAR(p.mean[1], 1.004, 1e-15);
    EXPECT_EQ(p.of[4], 2);
    EXPECT_EQ(cluster_levels(e, 0.0).count(), 6);
    RealVector bad(2);
    bad << 1.0, 0.0;
    EXPECT_THROW(cluster_levels(bad, 0.1), std::invalid_argument);
    EXPECT_THROW(cluster_levels(e, -1.0), std::invalid_argument);
}

TEST(Dissipation, ConfigValidation) {
    const RealVector e = RealVector::LinSpaced(4, 0.0, 3.0);
    const RealMatrix q = RealMatrix::Ones(4, 4);
    DissipationConfig c;
    c.eta = -0.1;
    EXPECT_THROW(build_phonon_liouvillian(e, {q}, c, 0.0), std::invalid_argument);
    c = DissipationConfig{};
    c.omega_c = 0.0;
    EXPECT_THROW(build_phonon_liouvillian(e, {q}, c, 0.0), std::invalid_argument);
    c = DissipationConfig{};
    c.mu = 1.0;
    EXPECT_THROW(build_radiative_liouvillian(e, q, c, 2.5, 2.0), std::invalid_argument);
    EXPECT_NO_THROW(build_radiative_liouvillian(e, q, c, 0.5, 2.0));
    DissipationConfig d = reference_dissipation();
    d.cluster_tol = 3.0;
    EXPECT_THROW(build_model(reference_params(), BasisSizes{8, 4}, 10, d), std::invalid_argument);
}

TEST(Dissipation, GeneratorsPreserveTraceAndHermiticity) {
    std::mt19937_64 rng(51);
    const Model& m = small_model(false);
    const int n = 20;
    const RealVector e = m.basis.energies.head(n);
    const RealMatrix sx = m.dipole.topLeftCorner(n, n);
    std::vector<RealMatrix> qs;
    for (const auto& q : phonon_couplings(m.basis)) qs.push_back(q.topLeftCorner(n, n));
    DissipationConfig c = reference_dissipation();
    c.cluster_tol = 0.05;
    const auto rad = build_radiative_liouvillian(e, sx, c, 0.05, 2.345);
    const auto ph = build_phonon_liouvillian(e, qs, c, 0.05);
    for (const Superoperator& l : {rad.superoperator(), rad.superoperator(0.3), ph.superoperator()}) {
        const auto [tr, herm] = testsupport::generator_defects(l, rng, 20);
        EXPECT_LT(tr, 1e-13);
        EXPECT_LT(herm, 1e-13);
    }
}

TEST(Dissipation, ZeroDipoleGivesZeroGenerator) {
    std::mt19937_64 rng(52);
    const RealVector e = RealVector::LinSpaced(5, 0.0, 2.5);
    DissipationConfig c;
    c.mu = 0.0;
    c.T_rad = 0.5;
    const auto rad = build_radiative_liouvillian(e, random_symmetric(rng, 5), c, 0.1, 2.0);
    EXPECT_EQ(rad.superoperator().matrix().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dissipation, IdentityCouplingGivesZeroGenerator) {
    RealVector e(5);
    e << 0.0, 0.5, 0.502, 1.3, 1.301;
    DissipationConfig c;
    c.eta = 0.2;
    c.omega_c = 1.0;
    c.T_phon = 0.3;
    const auto ph = build_phonon_liouvillian(e, {RealMatrix::Identity(5, 5)}, c, 0.01);
    EXPECT_LT(ph.superoperator().matrix().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Dissipation, PhononDetailedBalance) {
    std::mt19937_64 rng(53);
    const Model& m = small_model(false);
    const auto& ph = m.generator->phonon();
    const auto& part = ph.partition();
    const double t = m.dissipation.T_phon;
    std::uniform_int_distribution<int> pick(0, m.basis.size() - 1);
    int checked = 0;
    while (checked < 20) {
        const int a = pick(rng), b = pick(rng);
        const int ca = part.of[std::size_t(a)], cb = part.of[std::size_t(b)];
        if (ca == cb) continue;
        const double w = part.mean[std::size_t(ca)] - part.mean[std::size_t(cb)];
        if (std::abs(w) / t > 30.0) continue;
        for (const auto& ch : ph.channels())
            EXPECT_NEAR(ch.rate(ca, cb) / ch.rate(cb, ca), std::exp(w / t), 1e-10 * std::exp(w / t));
        const double fwd = ph.transition_rate(a, b), back = ph.transition_rate(b, a);
        if (fwd > 0.0) EXPECT_NEAR(fwd / back, std::exp(w / t), 1e-10 * std::exp(w / t));
        ++checked;
    }
}

TEST(Dissipation, RadiativeDetailedBalance) {
    RealVector e(3);
    e << 0.0, 2.0, 2.3;
    RealMatrix sx = RealMatrix::Zero(3, 3);
    sx(0, 1) = sx(1, 0) = 0.7;
    sx(0, 2) = sx(2, 0) = -0.4;
    DissipationConfig c;
    c.mu = 0.1;
    c.T_rad = 0.5;
    c.secular = true;
    const auto rad = build_radiative_liouvillian(e, sx, c, 0.0, 2.0);
    for (int x : {1, 2}) {
        const double down = rad.spontaneous.transition_rate(x, 0) + rad.field.transition_rate(x, 0);
        const double up = rad.field.transition_rate(0, x);
        EXPECT_NEAR(down / up, std::exp(e(x) / c.T_rad), 1e-10 * std::exp(e(x) / c.T_rad));
        EXPECT_NEAR(down, c.mu * c.mu * sx(x, 0) * sx(x, 0) * std::pow(e(x), 3) * (occupation(e(x), 0.5) + 1.0),
                    1e-15);
    }
}

TEST(Dissipation, ColdBathHasNoUpwardRates) {
    for (double w : {0.01, 0.1, 0.5}) {
        const double down = phonon_rate(w, 0.1, 0.2, 1e-4), up = phonon_rate(-w, 0.1, 0.2, 1e-4);
        EXPECT_GT(down, 0.0);
        EXPECT_LT(up, 1e-15 * down);
        EXPECT_EQ(phonon_rate(-w, 0.1, 0.2, 0.0), 0.0);
    }
}

TEST(Dissipation, SecularRadiativeIsPauliRateLaw) {
    std::mt19937_64 rng(54);
    RealVector e(4);
    e << 0.0, 0.3, 2.0, 2.004;
    RealMatrix sx = random_symmetric(rng, 4);
    DissipationConfig c;
    c.mu = 0.2;
    c.T_rad = 0.6;
    c.secular = true;
    const auto rad = build_radiative_liouvillian(e, sx, c, 0.01, 2.0);
    Eigen::VectorXd p(4);
    p << 0.4, 0.3, 0.2, 0.1;
    const Matrix out = rad.apply(Matrix(p.cast<cd>().asDiagonal()));
    for (int a = 0; a < 4; ++a) {
        double expected = 0.0;
        for (int b = 0; b < 4; ++b) {
            if (b == a) continue;
            const double in = rad.spontaneous.transition_rate(b, a) + rad.field.transition_rate(b, a);
            const double outr = rad.spontaneous.transition_rate(a, b) + rad.field.transition_rate(a, b);
            expected += in * p(b) - outr * p(a);
        }
        EXPECT_NEAR(out(a, a).real(), expected, 1e-14);
        for (int b = 0; b < 4; ++b)
            if (b != a) EXPECT_LT(std::abs(out(a, b)), 1e-16);
    }
    // A coherence only decays into itself.
    Matrix r = Matrix::Zero(4, 4);
    r(2, 3) = 1.0;
    const Matrix o = rad.apply(r);
    EXPECT_LT((o - o(2, 3) * r).cwiseAbs().maxCoeff(), 1e-16);
    EXPECT_LT(o(2, 3).real(), 0.0);
}

// Degenerate excited pair with parallel dipoles: the ground/excited-manifold
// block of the generator is the V-system master equation with p = 1.
TEST(Dissipation, DegenerateParallelDipolesReduceToVSystem) {
    std::mt19937_64 rng(55);
    const double w0 = 1.8, mu = 0.3, t = 0.4;
    for (double sign : {1.0, -1.0}) {
        RealVector e(3);
        e << 0.0, w0, w0;
        RealMatrix sx = RealMatrix::Zero(3, 3);
        sx(0, 1) = sx(1, 0) = 0.8;
        sx(0, 2) = sx(2, 0) = sign * 0.5;
        DissipationConfig c;
        c.mu = mu;
        c.T_rad = t;
        const auto rad = build_radiative_liouvillian(e, sx, c, 1e-3, w0);
        const double nbar = occupation(w0, t), w3 = w0 * w0 * w0;
        const double g1 = mu * mu * 0.64 * w3, g2 = mu * mu * 0.25 * w3;
        vsystem::Params v;
        v.delta = 0.0;
        v.g1 = g1;
        v.g2 = g2;
        v.r1 = nbar * g1;
        v.r2 = nbar * g2;
        v.p = sign;
        v.stimulated_decay = true;
        const Superoperator ref = vsystem::generator(v);
        for (int k = 0; k < 10; ++k) {
            Matrix r = testsupport::random_state(rng, 3);
            r(0, 1) = r(0, 2) = r(1, 0) = r(2, 0) = 0.0;
            const Matrix a = rad.apply(r), b = ref.apply(r);
            EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(Dissipation, EqualTemperaturesGiveClusterGibbsState) {
    std::mt19937_64 rng(56);
    RealVector e(7);
    e << 0.0, 0.21, 0.215, 1.6, 1.62, 1.625, 1.9;
    RealMatrix sx = random_symmetric(rng, 7);
    std::vector<RealMatrix> qs{random_symmetric(rng, 7), random_symmetric(rng, 7)};
    DissipationConfig c;
    c.mu = 0.2;
    c.T_rad = c.T_phon = 0.3;
    c.eta = 0.1;
    c.omega_c = 0.5;
    const double tol = 0.03;
    const RetinalGenerator g(e, cluster_levels(e, tol), build_radiative_liouvillian(e, sx, c, tol, 1.0),
                             build_phonon_liouvillian(e, qs, c, tol));
    Matrix rho0 = Matrix::Zero(7, 7);
    rho0(0, 0) = 1.0;
    const Matrix ss = g.steady_state(rho0);
    const auto& part = g.blocks();
    double z = 0.0;
    for (int a = 0; a < 7; ++a) z += std::exp(-part.mean[std::size_t(part.of[std::size_t(a)])] / c.T_phon);
    for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) {
            const double expected =
                a == b ? std::exp(-part.mean[std::size_t(part.of[std::size_t(a)])] / c.T_phon) / z : 0.0;
            EXPECT_NEAR(std::abs(ss(a, b)), expected, 1e-12);
        }
    EXPECT_LT(g.apply(ss).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Generator, BlockRhsMatchesFullActionOnBlockStates) {
    std::mt19937_64 rng(57);
    const RetinalGenerator& g = *small_model(false).generator;
    const int n = g.dim();
    Matrix full = testsupport::random_state(rng, n);
    const Matrix rho = g.unpack(g.pack(full));
    EXPECT_LT((g.rhs(rho, 0.6) - g.apply(rho, 0.6)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT(std::abs(g.rhs(rho, 0.6).trace()), 1e-14);
}

TEST(PairSelection, RolesAndErrors) {
    const Model& m = small_model(false);
    const auto b = select_pair(m, "bright");
    EXPECT_LT(b.i, b.j);
    EXPECT_GT(m.basis.labels[std::size_t(b.i)].parity, 0.5);
    EXPECT_THROW(select_pair(m, "brightest"), std::invalid_argument);
}

TEST(Scenario, NoFieldNoPhononsStaysInGround) {
    DissipationConfig d = reference_dissipation();
    d.mu = 0.0;
    d.T_phon = 0.0;
    d.cluster_tol = 0.05;
    const Model m = build_model(reference_params(), BasisSizes{16, 8}, 40, d);
    RunOptions o;
    o.t_final = 500.0;
    o.n_points = 11;
    const auto run = run_retinal_scenario(m, TurnOnEnvelope::sudden(), {{"a", 1, 2}}, o);
    const double y0 = quantum_yield(m.projectors, initial_state(m));
    for (double y : run.trajectory.observables.at("Y1")) EXPECT_EQ(y, y0);
    // The ground state's trans-surface-1 admixture under the compressed projector.
    EXPECT_LT(y0, 1e-8);
    EXPECT_NEAR(std::abs(run.final_state(0, 0)), 1.0, 1e-15);
    EXPECT_EQ(run.trajectory.observables.at("pair_1_2_rho_ii").back(), 0.0);
}

TEST(Scenario, PropertiesAlongRun) {
    for (bool secular : {false, true}) {
        const Model& m = small_model(secular);
        const auto bp = select_pair(small_model(false), "bright");
        RunOptions o;
        o.t_final = 1519.0;
        o.n_points = 51;
        const auto run = run_retinal_scenario(m, TurnOnEnvelope::exponential(50.0), {bp}, o);
        EXPECT_LT(run.max_trace_drift, 1e-8);
        EXPECT_GT(run.min_eigenvalue, -1e-12);
        for (double y : run.trajectory.observables.at("Y1")) {
            EXPECT_GE(y, 0.0);
            EXPECT_LE(y, 1.0);
        }
        for (double c : run.trajectory.observables.at(pair_key(bp, "C"))) {
            EXPECT_GE(c, 0.0);
            EXPECT_LE(c, 1.0 + 1e-9);
        }
        if (secular)
            EXPECT_EQ(run.initial_coherence[0], 0.0);
        else
            EXPECT_NEAR(run.initial_coherence[0], 1.0, 1e-12);
    }
}

TEST(ReferenceConfig, SuddenNonSecularStartsCoherent) {
    const Model& m = reference_model();
    const auto bp = select_pair(m, "bright");
    RunOptions o;
    o.t_final = 2.0;
    o.n_points = 3;
    const auto run = run_retinal_scenario(m, TurnOnEnvelope::sudden(), {bp}, o);
    EXPECT_GT(run.trajectory.observables.at(pair_key(bp, "C"))[1], 0.99);
    const auto sec = run_retinal_scenario(reference_model(true), TurnOnEnvelope::sudden(), {bp}, o);
    EXPECT_LT(sec.trajectory.observables.at(pair_key(bp, "C"))[1], 1e-3);
    EXPECT_EQ(sec.initial_coherence[0], 0.0);
}

TEST(Scenario, RejectsBadInput) {
    const Model& m = small_model(false);
    EXPECT_THROW(run_retinal_scenario(m, TurnOnEnvelope::sudden(), {{"x", 3, 3}}), std::invalid_argument);
    EXPECT_THROW(run_retinal_scenario(m, TurnOnEnvelope::sudden(), {{"x", 0, 40}}), std::invalid_argument);
    RunOptions o;
    o.t_final = -1.0;
    EXPECT_THROW(run_retinal_scenario(m, TurnOnEnvelope::sudden(), {}, o), std::invalid_argument);
}
