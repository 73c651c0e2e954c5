// pathways.hpp: first-order excitation amplitudes and field-averaged excited-state blocks

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <future>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "nicoh/core.hpp"

namespace nicoh::pathways {

using Vec3 = Eigen::Vector3cd;

struct RefinementFailure : std::runtime_error {
    double estimate;
    RefinementFailure(const std::string& what, double est) : std::runtime_error(what), estimate(est) {}
};

/// First-order field statistics. `amplitude` is the intensity scale A = |E|^2.
struct FieldCorrelation {
    enum class Kind { delta, exponential, monochromatic };
    Kind kind = Kind::delta;
    double amplitude = 1.0;
    double tau_c = 0.0;  // exponential only
    double omega = 0.0;  // monochromatic carrier

    static FieldCorrelation delta(double a) { return checked({Kind::delta, a, 0.0, 0.0}); }
    static FieldCorrelation exponential(double a, double tau_c) {
        return checked({Kind::exponential, a, tau_c, 0.0});
    }
    static FieldCorrelation monochromatic(double a, double omega) {
        return checked({Kind::monochromatic, a, 0.0, omega});
    }

    /// True for the distributional (white-noise) kind.
    bool distributional() const { return kind == Kind::delta; }

private:
    static FieldCorrelation checked(FieldCorrelation c) {
        if (!(c.amplitude >= 0.0)) throw std::invalid_argument("FieldCorrelation: amplitude must be >= 0");
        if (c.kind == Kind::exponential && !(c.tau_c > 0.0))
            throw std::invalid_argument("FieldCorrelation: tau_c must be > 0");
        if (!std::isfinite(c.omega)) throw std::invalid_argument("FieldCorrelation: omega must be finite");
        return c;
    }
};

/// Normalized first-order coherence g1(tau).
inline cd g1(const FieldCorrelation& c, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("g1: tau must be >= 0");
    switch (c.kind) {
        case FieldCorrelation::Kind::delta: return tau == 0.0 ? 1.0 : 0.0;
        case FieldCorrelation::Kind::exponential: return std::exp(-tau / c.tau_c);
        case FieldCorrelation::Kind::monochromatic: return 1.0;
    }
    return 0.0;
}

/// Excited states at energies omegas[n] (ground at 0) with dipoles <e_n|mu|g>.
struct ExcitationManifold {
    std::vector<double> omegas;
    std::vector<Vec3> dipoles;

    ExcitationManifold(std::vector<double> w, std::vector<Vec3> d) : omegas(std::move(w)), dipoles(std::move(d)) {
        if (omegas.empty()) throw std::invalid_argument("ExcitationManifold: need at least one excited state");
        if (omegas.size() != dipoles.size())
            throw std::invalid_argument("ExcitationManifold: one dipole per excited state required");
        for (std::size_t n = 0; n < omegas.size(); ++n)
            if (!std::isfinite(omegas[n]) || !dipoles[n].allFinite())
                throw std::invalid_argument("ExcitationManifold: non-finite energy or dipole");
    }

    std::size_t size() const { return omegas.size(); }
};

/// Geometric prefactor (eps.mu_a)(eps.mu_b)^* for a polarized field, or
/// mu_a . mu_b^* for isotropic excitation.
inline cd geometric_factor(const ExcitationManifold& m, std::size_t a, std::size_t b,
                           const std::optional<Vec3>& polarization) {
    if (polarization) {
        const cd pa = (polarization->array() * m.dipoles[a].array()).sum();
        const cd pb = (polarization->array() * m.dipoles[b].array()).sum();
        return pa * std::conj(pb);
    }
    return (m.dipoles[a].array() * m.dipoles[b].conjugate().array()).sum();
}

/// Sampled field E(t) on a uniform grid.
struct FieldRealization {
    std::vector<double> times;
    std::vector<Vec3> field;
    std::uint64_t seed = 0;
};

/// E(t) = sqrt(A) exp(i(omega t + phi(t))) eps with phi a Wiener process of
/// diffusion constant 2/tau_c and a uniformly random initial phase, so that
/// <E*(t) E(t + tau)> = A exp(i omega tau) exp(-|tau|/tau_c).
inline FieldRealization phase_diffusion(double amplitude, double tau_c, double omega, const Vec3& polarization,
                                        double t0, double t1, std::size_t intervals, std::uint64_t seed) {
    if (!(tau_c > 0.0)) throw std::invalid_argument("phase_diffusion: tau_c must be > 0");
    if (!(t1 > t0) || intervals < 2) throw std::invalid_argument("phase_diffusion: invalid grid");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    FieldRealization r;
    r.seed = seed;
    r.times.resize(intervals + 1);
    r.field.resize(intervals + 1);
    const double h = (t1 - t0) / double(intervals), sd = std::sqrt(2.0 / tau_c * h), s = std::sqrt(amplitude);
    double phi = uni(rng);
    for (std::size_t k = 0; k <= intervals; ++k) {
        const double t = k == intervals ? t1 : t0 + h * double(k);
        r.times[k] = t;
        r.field[k] = s * std::exp(I * (omega * t + phi)) * polarization;
        phi += sd * gauss(rng);
    }
    return r;
}

/// Deterministic monochromatic realization sqrt(A) exp(i omega t) eps.
inline FieldRealization monochromatic_field(double amplitude, double omega, const Vec3& polarization, double t0,
                                            double t1, std::size_t intervals) {
    if (!(t1 > t0) || intervals < 2) throw std::invalid_argument("monochromatic_field: invalid grid");
    FieldRealization r;
    r.times.resize(intervals + 1);
    r.field.resize(intervals + 1);
    const double h = (t1 - t0) / double(intervals), s = std::sqrt(amplitude);
    for (std::size_t k = 0; k <= intervals; ++k) {
        const double t = k == intervals ? t1 : t0 + h * double(k);
        r.times[k] = t;
        r.field[k] = s * std::exp(I * omega * t) * polarization;
    }
    return r;
}

namespace detail {

inline std::size_t node_index(const std::vector<double>& ts, double t) {
    const double h = (ts.back() - ts.front()) / double(ts.size() - 1);
    const double x = (t - ts.front()) / h;
    const double k = std::round(x);
    if (k < 0 || k > double(ts.size() - 1) || std::abs(x - k) > 1e-9)
        throw std::invalid_argument("first_order_amplitudes: integration limits must lie on realization nodes");
    return std::size_t(k);
}

// Romberg integration of a complex function on [a, b].
inline cd romberg(const std::function<cd(double)>& f, double a, double b, double rel_tol, double abs_tol,
                  int max_level = 22) {
    std::vector<cd> prev, cur;
    double h = b - a;
    cd trap = 0.5 * h * (f(a) + f(b));
    prev.push_back(trap);
    for (int level = 1; level <= max_level; ++level) {
        const std::size_t n_new = std::size_t(1) << (level - 1);
        cd sum = 0.0;
        for (std::size_t k = 0; k < n_new; ++k) sum += f(a + (double(k) + 0.5) * h);
        trap = 0.5 * trap + 0.5 * h * sum;
        h *= 0.5;
        cur.assign(1, trap);
        double pow4 = 1.0;
        for (std::size_t j = 1; j <= prev.size(); ++j) {
            pow4 *= 4.0;
            cur.push_back(cur[j - 1] + (cur[j - 1] - prev[j - 1]) / (pow4 - 1.0));
        }
        const double err = std::abs(cur.back() - prev.back());
        if (level >= 5 && err <= std::max(abs_tol, rel_tol * std::abs(cur.back()))) return cur.back();
        prev.swap(cur);
    }
    throw RefinementFailure("romberg: quadrature did not converge", std::abs(prev.back()));
}

// h(d) = int_0^L exp(i d u) du.
inline cd phase_integral(double d, double len) {
    const double x = d * len;
    if (std::abs(x) < 1e-4) return len * (1.0 + I * x / 2.0 - x * x / 6.0 - I * x * x * x / 24.0);
    return (std::exp(I * x) - 1.0) / (I * d);
}

// int_0^L exp(i w s) exp(-|u - s|/tau) ds, split at s = u.
inline cd exponential_inner(double w, double tau, double u, double len) {
    const cd a = I * w + 1.0 / tau, b = I * w - 1.0 / tau;
    const cd first = (std::exp(I * w * u) - std::exp(-u / tau)) / a;
    const cd second = (std::exp(I * w * len) * std::exp(-(len - u) / tau) - std::exp(I * w * u)) / b;
    return first + second;
}

}  // namespace detail

struct AmplitudeOptions {
    double rel_tol = 1e-6;
    double abs_tol = 1e-14;
};

/// <e_n|psi1(t)> = int_{t0}^{t} exp(-i e_n (t' - t0)) E(t').mu_n dt' by composite
/// trapezoid with one Richardson step. The error of the extrapolated value is
/// estimated from the 2h and 4h grids (from the 2h grid alone when the step
/// count is not a multiple of 4). t0 and t must be realization nodes an even
/// number of steps apart.
inline Vector first_order_amplitudes(const FieldRealization& r, const ExcitationManifold& m, double t0, double t,
                                     AmplitudeOptions opt = {}) {
    if (r.times.size() < 3 || r.times.size() != r.field.size())
        throw std::invalid_argument("first_order_amplitudes: malformed realization");
    if (!(t >= t0)) throw std::invalid_argument("first_order_amplitudes: t must be >= t0");
    const std::size_t i0 = detail::node_index(r.times, t0), i1 = detail::node_index(r.times, t);
    Vector out = Vector::Zero(Eigen::Index(m.size()));
    if (i1 == i0) return out;
    if ((i1 - i0) % 2 != 0)
        throw std::invalid_argument("first_order_amplitudes: need an even number of grid steps");
    const double h = (r.times.back() - r.times.front()) / double(r.times.size() - 1);
    for (std::size_t n = 0; n < m.size(); ++n) {
        const double e = m.omegas[n];
        auto f = [&](std::size_t k) {
            return std::exp(-I * e * (r.times[k] - t0)) * (r.field[k].array() * m.dipoles[n].array()).sum();
        };
        // Trapezoid sums at steps h, 2h and (when possible) 4h.
        const std::size_t steps = i1 - i0;
        const bool three_levels = steps % 4 == 0;
        cd t1 = 0.5 * (f(i0) + f(i1)), t2 = t1, t4 = t1;
        for (std::size_t k = i0 + 1; k < i1; ++k) {
            const cd v = f(k);
            t1 += v;
            if ((k - i0) % 2 == 0) t2 += v;
            if ((k - i0) % 4 == 0) t4 += v;
        }
        t1 *= h;
        t2 *= 2.0 * h;
        t4 *= 4.0 * h;
        const cd s1 = t1 + (t1 - t2) / 3.0;
        const cd value = s1;
        double err = std::abs(t1 - t2) / 3.0;
        if (three_levels) {
            const cd s2 = t2 + (t2 - t4) / 3.0;
            err = std::abs(s1 - s2) / 15.0;
        }
        if (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(value)))
            throw RefinementFailure("first_order_amplitudes: grid too coarse for state " + std::to_string(n) +
                                        " (error estimate " + std::to_string(err) + ")",
                                    err);
        out(Eigen::Index(n)) = value;
    }
    return out;
}

struct QuadratureOptions {
    double rel_tol = 1e-11;
    double abs_tol = 1e-14;
};

/// Field-averaged excited-state block
///   rho_ab(t) = G_ab exp(-i w_ab t) int int dt2 dt1 exp(i w_a t2) exp(-i w_b t1) <E*(t1) E(t2)>
/// over [t0, t]^2, G_ab the geometric factor. The monochromatic kind uses the
/// positive-frequency correlation A exp(-i omega (t2 - t1)), resonant at omega = w_a.
/// Unnormalized: the ground amplitude is not depleted.
inline Matrix averaged_first_order_rho(const FieldCorrelation& c, const ExcitationManifold& m, double t0, double t,
                                       const std::optional<Vec3>& polarization = std::nullopt,
                                       QuadratureOptions opt = {}) {
    if (!(t >= t0)) throw std::invalid_argument("averaged_first_order_rho: t must be >= t0");
    const Eigen::Index n = Eigen::Index(m.size());
    const double len = t - t0;
    Matrix rho = Matrix::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b) {
            const double wa = m.omegas[a], wb = m.omegas[b], wab = wa - wb;
            cd integral = 0.0;
            switch (c.kind) {
                case FieldCorrelation::Kind::delta:
                    integral = std::exp(-I * wab * len) * detail::phase_integral(wab, len);
                    break;
                case FieldCorrelation::Kind::monochromatic:
                    integral = std::exp(-I * wab * len) * detail::phase_integral(wa - c.omega, len) *
                               std::conj(detail::phase_integral(wb - c.omega, len));
                    break;
                case FieldCorrelation::Kind::exponential: {
                    if (len > 0.0) {
                        const auto outer = [&](double u) {
                            return std::exp(I * wa * u) * detail::exponential_inner(-wb, c.tau_c, u, len);
                        };
                        integral = std::exp(-I * wab * len) *
                                   detail::romberg(outer, 0.0, len, opt.rel_tol, opt.abs_tol * len * len);
                    }
                    break;
                }
            }
            const cd v = c.amplitude * geometric_factor(m, std::size_t(a), std::size_t(b), polarization) * integral;
            rho(a, b) = v;
            rho(b, a) = std::conj(v);
        }
    for (Eigen::Index a = 0; a < n; ++a) rho(a, a) = rho(a, a).real();
    return rho;
}

/// White-noise limit with intensity |E(t')|^2 = A * envelope(t'):
///   rho_ab(t) = G_ab exp(-i w_ab t) int_{t0}^{t} exp(i w_ab t') |E(t')|^2 dt'.
/// Without an envelope the closed forms are used.
inline Matrix white_noise_rho(const ExcitationManifold& m, double amplitude, double t0, double t,
                              const std::optional<Vec3>& polarization = std::nullopt,
                              const std::function<double(double)>& envelope = {}, QuadratureOptions opt = {}) {
    if (!(t >= t0)) throw std::invalid_argument("white_noise_rho: t must be >= t0");
    if (!(amplitude >= 0.0)) throw std::invalid_argument("white_noise_rho: amplitude must be >= 0");
    const Eigen::Index n = Eigen::Index(m.size());
    const double len = t - t0;
    Matrix rho = Matrix::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b) {
            const double wab = m.omegas[a] - m.omegas[b];
            cd integral;
            if (!envelope) {
                // exp(-i w t) (exp(i w t) - exp(i w t0)) / (i w), or t - t0 for w = 0.
                integral = wab == 0.0 ? cd(len) : (1.0 - std::exp(-I * wab * len)) / (I * wab);
            } else if (len > 0.0) {
                integral = detail::romberg([&](double u) { return std::exp(-I * wab * (len - u)) * envelope(t0 + u); },
                                           0.0, len, opt.rel_tol, opt.abs_tol * len);
            } else {
                integral = 0.0;
            }
            const cd v = amplitude * geometric_factor(m, std::size_t(a), std::size_t(b), polarization) * integral;
            rho(a, b) = v;
            rho(b, a) = std::conj(v);
        }
    for (Eigen::Index a = 0; a < n; ++a) rho(a, a) = rho(a, a).real();
    return rho;
}

/// Ensemble mean of a a^dagger over phase-diffusion realizations with
/// per-element standard errors (real and imaginary parts separately).
struct EnsembleEstimate {
    Matrix mean;
    Eigen::MatrixXd stderr_re, stderr_im;
    std::size_t samples = 0;
};

struct EnsembleOptions {
    std::size_t realizations = 10000;
    std::size_t intervals = 4096;  // grid steps over [t0, t]
    std::uint64_t base_seed = 1;
    Vec3 polarization = Vec3(1.0, 0.0, 0.0);
    // Phase-diffusion paths are rough, so the default refinement test is loose and
    // scaled to sqrt(A) max|mu| (t - t0).
    std::optional<AmplitudeOptions> quadrature;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Realization k uses seed base_seed + k, so the estimate does not depend on
/// the thread count.
inline EnsembleEstimate phase_diffusion_ensemble(const FieldCorrelation& c, const ExcitationManifold& m, double t0,
                                                 double t, const EnsembleOptions& opt = {}) {
    if (c.kind != FieldCorrelation::Kind::exponential)
        throw std::invalid_argument("phase_diffusion_ensemble: needs the exponential kind");
    if (opt.realizations < 2) throw std::invalid_argument("phase_diffusion_ensemble: need >= 2 realizations");
    const Eigen::Index n = Eigen::Index(m.size());
    const std::size_t steps = opt.intervals + opt.intervals % 2;
    AmplitudeOptions quad;
    if (opt.quadrature) {
        quad = *opt.quadrature;
    } else {
        double mu = 0.0;
        for (const auto& d : m.dipoles) mu = std::max(mu, d.norm());
        quad = {1e-2, 1e-2 * std::sqrt(c.amplitude) * mu * (t - t0)};
    }
    struct Partial {
        Matrix sum;
        Eigen::MatrixXd sq_re, sq_im;
    };
    auto work = [&](std::size_t begin, std::size_t end) {
        Partial p{Matrix::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
        for (std::size_t k = begin; k < end; ++k) {
            const auto r = phase_diffusion(c.amplitude, c.tau_c, 0.0, opt.polarization, t0, t, steps,
                                           opt.base_seed + k);
            const Vector a = first_order_amplitudes(r, m, t0, t, quad);
            const Matrix o = a * a.adjoint();
            p.sum += o;
            p.sq_re += o.real().cwiseAbs2();
            p.sq_im += o.imag().cwiseAbs2();
        }
        return p;
    };
    unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = unsigned(std::min<std::size_t>(threads, opt.realizations));
    std::vector<std::future<Partial>> jobs;
    const std::size_t chunk = (opt.realizations + threads - 1) / threads;
    for (std::size_t b = 0; b < opt.realizations; b += chunk)
        jobs.push_back(std::async(std::launch::async, work, b, std::min(opt.realizations, b + chunk)));
    Partial total{Matrix::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (auto& j : jobs) {
        const Partial p = j.get();
        total.sum += p.sum;
        total.sq_re += p.sq_re;
        total.sq_im += p.sq_im;
    }
    const double s = double(opt.realizations);
    EnsembleEstimate e;
    e.samples = opt.realizations;
    e.mean = total.sum / s;
    const Eigen::MatrixXd var_re = (total.sq_re / s - e.mean.real().cwiseAbs2()) * (s / (s - 1.0));
    const Eigen::MatrixXd var_im = (total.sq_im / s - e.mean.imag().cwiseAbs2()) * (s / (s - 1.0));
    e.stderr_re = (var_re.cwiseMax(0.0) / s).cwiseSqrt();
    e.stderr_im = (var_im.cwiseMax(0.0) / s).cwiseSqrt();
    return e;
}

}  // namespace nicoh::pathways
