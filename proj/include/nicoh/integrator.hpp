// integrator.hpp: adaptive Dormand-Prince 5(4) with cubic Hermite dense output

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nicoh {

struct Tolerance {
    double rel = 1e-8;
    double abs = 1e-10;
};

/// Raised when the step size collapses or a post-step check rejects the state.
struct IntegrationFailure : std::runtime_error {
    double time;
    IntegrationFailure(const std::string& what, double t)
        : std::runtime_error(what + " at t = " + std::to_string(t)), time(t) {}
};

struct IntegratorStats {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t evaluations = 0;
};

/// Integrates y' = f(t, y) from times.front() through every entry of `times`
/// (ascending), calling `observe(t, y)` at each of them. `post(t, y)` runs after
/// every accepted step and may project the state back onto its manifold.
///
/// State is any Eigen vector type (fixed or dynamic, real or complex).
template <class State, class Rhs, class Observe, class Post>
IntegratorStats integrate(Rhs&& f, State y, const std::vector<double>& times, Tolerance tol, Observe&& observe,
                          Post&& post, double h_init = 0.0) {
    IntegratorStats stats;
    if (times.empty()) return stats;
    if (!(tol.rel > 0.0) || !(tol.abs > 0.0)) throw std::invalid_argument("integrate: tolerances must be > 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("integrate: times must be strictly increasing");

    // Dormand-Prince coefficients.
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = times.front();
    const double t_end = times.back();
    std::size_t next = 0;
    while (next < times.size() && times[next] <= t) observe(times[next++], y);
    if (next == times.size()) return stats;

    auto err_norm = [&](const State& err, const State& y0, const State& y1) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < err.size(); ++i) {
            const double sc = tol.abs + tol.rel * std::max(std::abs(y0(i)), std::abs(y1(i)));
            const double r = std::abs(err(i)) / sc;
            acc += r * r;
        }
        return std::sqrt(acc / double(std::max<Eigen::Index>(1, err.size())));
    };

    State k1 = f(t, y);
    ++stats.evaluations;
    double h = h_init;
    if (!(h > 0.0)) {
        double d0 = 0.0, d1 = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc = tol.abs + tol.rel * std::abs(y(i));
            d0 = std::max(d0, std::abs(y(i)) / sc);
            d1 = std::max(d1, std::abs(k1(i)) / sc);
        }
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, t_end - t);
    }

    while (t < t_end) {
        const double h_min = 1e-13 * std::max(1.0, std::abs(t));
        if (h < h_min) throw IntegrationFailure("step size underflow", t);
        if (t + h > t_end) h = t_end - t;

        const State k2 = f(t + c2 * h, State(y + h * (a21 * k1)));
        const State k3 = f(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
        const State k4 = f(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
        const State k5 = f(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
        const State k6 = f(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
        State y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const State k7 = f(t + h, y1);
        stats.evaluations += 6;
        const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = err_norm(err, y, y1);
        if (!std::isfinite(en)) {
            ++stats.rejected;
            h *= 0.1;
            continue;
        }
        if (en > 1.0) {
            ++stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            continue;
        }
        ++stats.accepted;
        const double t1 = t + h;
        post(t1, y1);
        // Cubic Hermite dense output between (t, y, k1) and (t1, y1, k7).
        while (next < times.size() && times[next] <= t1) {
            const double s = (times[next] - t) / h;
            const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
            const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
            if (s >= 1.0) {
                observe(times[next], y1);
            } else {
                const State ys = h00 * y + (h10 * h) * k1 + h01 * y1 + (h11 * h) * k7;
                observe(times[next], ys);
            }
            ++next;
        }
        y = std::move(y1);
        k1 = k7;
        t = t1;
        const double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
        h *= fac;
    }
    return stats;
}

template <class State, class Rhs, class Observe>
IntegratorStats integrate(Rhs&& f, State y, const std::vector<double>& times, Tolerance tol, Observe&& observe) {
    return integrate<State>(std::forward<Rhs>(f), std::move(y), times, tol, std::forward<Observe>(observe),
                            [](double, State&) {});
}

/// Uniform grid of n points on [t0, t1].
inline std::vector<double> uniform_grid(double t0, double t1, std::size_t n) {
    if (n < 2) throw std::invalid_argument("uniform_grid: need at least 2 points");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = t0 + (t1 - t0) * double(i) / double(n - 1);
    g.back() = t1;
    return g;
}

}  // namespace nicoh
