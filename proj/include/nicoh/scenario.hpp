// scenario.hpp: config-driven runs of every module, producing CSV tables

#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "nicoh/calcium.hpp"
#include "nicoh/config.hpp"
#include "nicoh/core.hpp"
#include "nicoh/dimer.hpp"
#include "nicoh/pathways.hpp"
#include "nicoh/retinal.hpp"
#include "nicoh/units.hpp"
#include "nicoh/vsystem.hpp"

namespace nicoh::scenario {

using config::ConfigError;
using config::ScenarioConfig;

struct Check {
    std::string name;
    bool ok = true;
    std::string detail;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct Output {
    Table table;
    std::map<std::string, double> summary;  // steady-state or end-of-run observables
    std::vector<Check> checks;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.ok) return false;
        return true;
    }
};

/// Fixed-format CSV so repeated runs are byte-identical.
inline std::string to_csv(const Table& t) {
    std::string s;
    for (std::size_t i = 0; i < t.header.size(); ++i) s += (i ? "," : "") + t.header[i];
    s += '\n';
    char buf[32];
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.12e", r[i]);
            s += (i ? "," : "");
            s += buf;
        }
        s += '\n';
    }
    return s;
}

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::vector<double> grid(const ScenarioConfig& c, double scale = 1.0) {
    return uniform_grid(0.0, c.real("t_final") * scale, std::size_t(c.integer("n_points")));
}

inline Tolerance tolerance(const ScenarioConfig& c) { return {c.real("rtol"), c.real("atol")}; }

inline TurnOnEnvelope envelope(const ScenarioConfig& c, double scale = 1.0) {
    return TurnOnEnvelope::exponential(c.real("tau_r") * scale);
}

/// Trace, population and Cauchy-Schwarz checks on V-system style states.
inline void check_states(const std::vector<vsystem::State>& st, Output& out) {
    double tr = 0.0, neg = 0.0, cs = 0.0;
    for (const auto& s : st) {
        tr = std::max(tr, std::abs(s.gg + s.e11 + s.e22 - 1.0));
        neg = std::max(neg, -std::min({s.gg, s.e11, s.e22, 0.0}));
        cs = std::max(cs, s.re * s.re + s.im * s.im - s.e11 * s.e22);
    }
    out.checks.push_back({"trace", tr < 1e-8, "max |Tr rho - 1| = " + sci(tr)});
    out.checks.push_back({"populations", neg < 1e-10, "most negative population = " + sci(-neg)});
    out.checks.push_back({"cauchy_schwarz", cs < 1e-10, "max |rho12|^2 - rho11 rho22 = " + sci(cs)});
}

inline void vstate_table(const std::vector<double>& t, const std::vector<vsystem::State>& st, Table& tab) {
    tab.header = {"t", "rho_gg", "rho_11", "rho_22", "rho_R", "rho_I"};
    for (std::size_t k = 0; k < t.size(); ++k) {
        const auto& s = st[k];
        tab.rows.push_back({t[k], s.gg, s.e11, s.e22, s.re, s.im});
    }
}

inline vsystem::Params vsystem_params(const ScenarioConfig& c) {
    vsystem::Params p;
    p.delta = c.real("delta");
    p.g1 = c.real("g1");
    p.g2 = c.real("g2");
    const bool has_r = c.has("r1") || c.has("r2");
    if (has_r) {
        std::vector<std::string> e;
        if (!(c.has("r1") && c.has("r2"))) e.push_back("r1 and r2 must be given together");
        if (!c.values.at("nbar").defaulted) e.push_back("give either nbar or r1/r2, not both");
        if (!e.empty()) throw ConfigError(e);
        p.r1 = c.real("r1");
        p.r2 = c.real("r2");
    } else {
        p.r1 = c.real("nbar") * p.g1;
        p.r2 = c.real("nbar") * p.g2;
    }
    p.p = c.real("p");
    p.stimulated_decay = c.flag("stimulated_decay");
    p.validate();
    return p;
}

inline Output run_vsystem(const ScenarioConfig& c) {
    const auto p = vsystem_params(c);
    const auto t = grid(c);
    const bool secular = c.flag("secular");
    const auto run = vsystem::simulate(p, envelope(c), t, secular, {}, tolerance(c));
    Output out;
    vstate_table(t, run.states, out.table);
    check_states(run.states, out);
    const auto ss = vsystem::steady_state(p, secular);
    double peak = 0.0;
    for (const auto& s : run.states) peak = std::max(peak, std::hypot(s.re, s.im));
    out.summary = {{"rho_R_ss", ss.re},
                   {"rho_I_ss", ss.im},
                   {"abs_rho12_ss", std::hypot(ss.re, ss.im)},
                   {"max_abs_rho12", peak},
                   {"rho_11_final", run.states.back().e11},
                   {"rho_22_final", run.states.back().e22}};
    return out;
}

inline calcium::Params calcium_params(const ScenarioConfig& c) {
    calcium::Params p;
    p.delta_Z = c.real("delta_Z");
    p.gamma = c.real("gamma");
    p.nbar = c.real("nbar");
    if (c.has("r_iso")) p.r_iso = c.real("r_iso");
    p.validate();
    return p;
}

inline Output run_calcium(const ScenarioConfig& c) {
    const auto p = calcium_params(c);
    const auto t = grid(c);
    const auto run = calcium::simulate(p, envelope(c), t, c.flag("secular"), tolerance(c));
    Output out;
    out.table.header = {"t", "rho_gg", "rho_11", "rho_22", "rho_R", "rho_I", "Iz", "DA", "DB"};
    for (std::size_t k = 0; k < t.size(); ++k) {
        const auto& s = run.states[k];
        const auto d = calcium::detection_signals(s);
        out.table.rows.push_back({t[k], s.gg, s.e11, s.e22, s.re, s.im, d.Iz, d.DA, d.DB});
    }
    check_states(run.states, out);
    double peak = 0.0;
    for (const auto& s : run.states) peak = std::max(peak, std::hypot(s.re, s.im));
    const auto& f = run.states.back();
    out.summary = {{"rho_11_final", f.e11}, {"rho_R_final", f.re}, {"rho_I_final", f.im}, {"max_abs_rho12", peak}};
    return out;
}

inline dimer::Params dimer_params(const ScenarioConfig& c) {
    dimer::Params p;
    p.omega_L = c.real("omega_L");
    p.omega_R = c.real("omega_R");
    p.J = c.real("J");
    p.T_L = c.real("T_L");
    p.T_R = c.real("T_R");
    p.gamma_L = c.real("gamma_L");
    p.gamma_R = c.real("gamma_R");
    p.validate();
    return p;
}

inline Output run_dimer(const ScenarioConfig& c) {
    const auto p = dimer_params(c);
    const auto t = grid(c);
    const auto gen = dimer::generator(p);
    PropagationOptions opt;
    opt.tol = tolerance(c);
    const auto traj = propagate(gen, DensityMatrix::basis_state(3, 0), t, opt);
    Output out;
    out.table.header = {"t", "rho_gg", "rho_11", "rho_22", "rho_R", "rho_I", "current"};
    double tr = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Matrix& r = traj.states[k];
        tr = std::max(tr, std::abs(r.trace() - 1.0));
        out.table.rows.push_back({t[k], r(0, 0).real(), r(1, 1).real(), r(2, 2).real(), r(1, 2).real(),
                                  r(1, 2).imag(), dimer::energy_current(p, r)});
    }
    out.checks.push_back({"trace", tr < 1e-8, "max |Tr rho - 1| = " + sci(tr)});
    const Matrix ss = dimer::steady_state(p).matrix();
    out.summary = {{"current_ss", dimer::energy_current(p, ss)},
                   {"abs_rho12_ss", std::abs(ss(1, 2))},
                   {"current_final", out.table.rows.back().back()}};
    return out;
}

inline retinal::DissipationConfig retinal_dissipation(const ScenarioConfig& c) {
    retinal::DissipationConfig d;
    d.mu = c.real("mu");
    d.T_rad = c.real("T_rad") * kKelvinToEv;
    d.T_phon = c.real("T_phon") * kKelvinToEv;
    d.eta = c.real("eta");
    d.omega_c = c.real("omega_c");
    d.secular = c.flag("secular");
    if (c.has("cluster_tol")) d.cluster_tol = c.real("cluster_tol");
    d.validate();
    return d;
}

inline retinal::Params retinal_params(const ScenarioConfig& c) {
    retinal::Params p;
    p.E0 = c.real("E0");
    p.E1 = c.real("E1");
    p.V0 = c.real("V0");
    p.V1 = c.real("V1");
    p.omega = c.real("omega");
    p.kappa = c.real("kappa");
    p.lambda = c.real("lambda");
    p.inv_inertia = c.real("inv_inertia");
    p.validate();
    return p;
}

/// `pairs` lists roles (bright, intermediate, product) or explicit `i:j`.
inline std::vector<retinal::TrackedPair> retinal_pairs(const ScenarioConfig& c, const retinal::Model& m) {
    std::vector<retinal::TrackedPair> out;
    for (const auto& item : config::split(c.text("pairs"), ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            out.push_back(retinal::select_pair(m, item));
            continue;
        }
        const auto i = config::detail::to_integer(item.substr(0, colon));
        const auto j = config::detail::to_integer(item.substr(colon + 1));
        if (!i || !j || *i < 0 || *j < 0 || *i >= m.basis.size() || *j >= m.basis.size() || *i == *j)
            throw ConfigError({"pairs: invalid explicit pair '" + item + "'"});
        out.push_back({item, int(*i), int(*j)});
    }
    return out;
}

/// Times in the config are fs, temperatures K, energies eV.
inline Output run_retinal(const ScenarioConfig& c) {
    const auto p = retinal_params(c);
    const auto d = retinal_dissipation(c);
    retinal::BasisSizes sz{int(c.integer("n_fourier")), int(c.integer("n_ho"))};
    sz.validate();
    if (c.integer("n_keep") > sz.dim()) throw ConfigError({"n_keep exceeds the product-basis dimension"});
    const auto m = retinal::build_model(p, sz, int(c.integer("n_keep")), d);
    std::vector<retinal::TrackedPair> pairs;
    try {
        pairs = retinal_pairs(c, m);
    } catch (const std::invalid_argument& e) {
        throw ConfigError({e.what()});
    }
    retinal::RunOptions opt;
    opt.t_final = c.real("t_final") * kEvToRadPerFs;
    opt.n_points = int(c.integer("n_points"));
    opt.tol = tolerance(c);
    const auto run = retinal::run_retinal_scenario(m, envelope(c, kEvToRadPerFs), pairs, opt);
    const auto& obs = run.trajectory.observables;
    Output out;
    out.table.header = {"t", "Y1"};
    std::vector<const std::vector<double>*> cols{&obs.at("Y1")};
    for (const auto& pr : pairs)
        for (const char* w : {"rho_ii", "rho_jj", "abs_rho_ij", "C"}) {
            out.table.header.push_back(retinal::pair_key(pr, w));
            cols.push_back(&obs.at(retinal::pair_key(pr, w)));
        }
    for (std::size_t k = 0; k < run.trajectory.times.size(); ++k) {
        std::vector<double> row{run.trajectory.times[k] / kEvToRadPerFs};
        for (const auto* col : cols) row.push_back((*col)[k]);
        out.table.rows.push_back(std::move(row));
    }
    bool y_ok = true, c_ok = true;
    for (double y : obs.at("Y1")) y_ok = y_ok && y >= 0.0 && y <= 1.0;
    for (const auto& pr : pairs)
        for (double x : obs.at(retinal::pair_key(pr, "C"))) c_ok = c_ok && x >= 0.0 && x <= 1.0 + 1e-9;
    out.checks.push_back({"trace", run.max_trace_drift < 1e-8, "max drift " + sci(run.max_trace_drift)});
    out.checks.push_back({"positivity", run.min_eigenvalue > -1e-10,
                          "min block eigenvalue " + sci(run.min_eigenvalue)});
    out.checks.push_back({"yield_range", y_ok, "Y1 in [0, 1]"});
    out.checks.push_back({"coherence_ratio_range", c_ok, "C in [0, 1]"});
    out.summary["Y1_final"] = obs.at("Y1").back();
    out.summary["cluster_tol"] = m.cluster_tol;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& cc = obs.at(retinal::pair_key(pairs[k], "C"));
        out.summary[retinal::pair_key(pairs[k], "C_max")] = *std::max_element(cc.begin(), cc.end());
        out.summary[retinal::pair_key(pairs[k], "C_0plus")] = run.initial_coherence[k];
    }
    return out;
}

inline pathways::ExcitationManifold pathways_manifold(const ScenarioConfig& c) {
    std::vector<std::string> err;
    std::vector<double> w;
    for (const auto& s : config::split(c.text("levels"), ',')) {
        const auto v = config::detail::to_real(s);
        if (!v) err.push_back("levels: '" + s + "' is not a number");
        else w.push_back(*v);
    }
    std::vector<pathways::Vec3> d;
    for (const auto& s : config::split(c.text("dipoles"), ';')) {
        const auto parts = config::split(s, ',');
        pathways::Vec3 v = pathways::Vec3::Zero();
        if (parts.size() != 3) err.push_back("dipoles: '" + s + "' needs three components");
        for (std::size_t i = 0; i < std::min<std::size_t>(3, parts.size()); ++i) {
            const auto x = config::detail::to_real(parts[i]);
            if (!x) err.push_back("dipoles: '" + parts[i] + "' is not a number");
            else v(Eigen::Index(i)) = *x;
        }
        d.push_back(v);
    }
    if (w.size() != d.size()) err.push_back("levels and dipoles must have the same length");
    if (!err.empty()) throw ConfigError(err);
    return pathways::ExcitationManifold(w, d);
}

inline std::optional<pathways::Vec3> pathways_polarization(const ScenarioConfig& c) {
    const std::string& s = c.text("polarization");
    if (s == "none") return std::nullopt;
    pathways::Vec3 v = pathways::Vec3::Zero();
    v(s == "x" ? 0 : s == "y" ? 1 : 2) = 1.0;
    return v;
}

inline pathways::FieldCorrelation pathways_field(const ScenarioConfig& c) {
    const std::string& k = c.text("kind");
    if (k == "delta") return pathways::FieldCorrelation::delta(c.real("amplitude"));
    if (k == "monochromatic") return pathways::FieldCorrelation::monochromatic(c.real("amplitude"), c.real("omega"));
    return pathways::FieldCorrelation::exponential(c.real("amplitude"), c.real("tau_c"));
}

inline void rho_header(std::size_t n, Table& tab, bool with_errors) {
    tab.header = {"t"};
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            const std::string k = "rho_" + std::to_string(a + 1) + "_" + std::to_string(b + 1);
            tab.header.push_back(k + "_re");
            tab.header.push_back(k + "_im");
            if (with_errors) {
                tab.header.push_back(k + "_re_stderr");
                tab.header.push_back(k + "_im_stderr");
            }
        }
}

/// Excited-state block averaged over the field; `analytic` on the output grid,
/// `ensemble` (phase diffusion, seeded) at t_final only.
inline Output run_pathways(const ScenarioConfig& c, std::uint64_t seed) {
    const auto m = pathways_manifold(c);
    const auto field = pathways_field(c);
    const auto pol = pathways_polarization(c);
    const double t0 = c.real("t0");
    const std::size_t n = m.size();
    Output out;
    double herm = 0.0, cs = 0.0;
    auto emit = [&](double t, const Matrix& r, const Eigen::MatrixXd* se_re, const Eigen::MatrixXd* se_im) {
        std::vector<double> row{t};
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b) {
                row.push_back(r(a, b).real());
                row.push_back(r(a, b).imag());
                if (se_re) {
                    row.push_back((*se_re)(a, b));
                    row.push_back((*se_im)(a, b));
                }
                if (!se_re && a != b) cs = std::max(cs, std::norm(r(a, b)) - r(a, a).real() * r(b, b).real());
            }
        herm = std::max(herm, hermiticity_defect(r));
        out.table.rows.push_back(std::move(row));
    };
    if (c.text("method") == "analytic") {
        rho_header(n, out.table, false);
        for (double t : uniform_grid(t0, t0 + c.real("t_final"), std::size_t(c.integer("n_points"))))
            emit(t, pathways::averaged_first_order_rho(field, m, t0, t, pol), nullptr, nullptr);
        const double scale = out.table.rows.back()[1] + 1.0;
        out.checks.push_back({"cauchy_schwarz", cs < 1e-9 * scale * scale, "max excess " + sci(cs)});
    } else {
        if (field.kind != pathways::FieldCorrelation::Kind::exponential)
            throw ConfigError({"method = ensemble needs kind = exponential"});
        if (!pol) throw ConfigError({"method = ensemble needs a polarization"});
        pathways::EnsembleOptions eo;
        eo.realizations = std::size_t(c.integer("realizations"));
        eo.intervals = std::size_t(c.integer("intervals"));
        eo.base_seed = seed;
        eo.polarization = *pol;
        const double t1 = t0 + c.real("t_final");
        const auto est = pathways::phase_diffusion_ensemble(field, m, t0, t1, eo);
        rho_header(n, out.table, true);
        emit(t1, est.mean, &est.stderr_re, &est.stderr_im);
    }
    out.checks.push_back({"hermiticity", herm < 1e-12, "max defect " + sci(herm)});
    const auto& last = out.table.rows.back();
    for (std::size_t k = 1; k < out.table.header.size(); ++k) out.summary[out.table.header[k] + "_final"] = last[k];
    return out;
}

}  // namespace detail

/// Builds every model object without running dynamics (retinal skips the
/// eigenbasis). Throws ConfigError for inconsistent or out-of-range input.
inline void validate(const ScenarioConfig& c) {
    try {
        if (c.scenario == "vsystem") detail::vsystem_params(c);
        else if (c.scenario == "calcium") detail::calcium_params(c);
        else if (c.scenario == "dimer") detail::dimer_params(c);
        else if (c.scenario == "retinal") {
            const auto p = detail::retinal_params(c);
            const auto d = detail::retinal_dissipation(c);
            retinal::BasisSizes sz{int(c.integer("n_fourier")), int(c.integer("n_ho"))};
            sz.validate();
            if (c.integer("n_keep") > sz.dim()) throw ConfigError({"n_keep exceeds the product-basis dimension"});
            if (d.cluster_tol && p.E1 - p.E0 > 0.0 && *d.cluster_tol >= p.E1 - p.E0)
                throw ConfigError({"cluster_tol must be below the radiative gap E1 - E0"});
        } else if (c.scenario == "pathways") {
            detail::pathways_manifold(c);
            detail::pathways_field(c);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError({e.what()});
    }
}

/// Runs the scenario. Config problems raise ConfigError; numerical failures
/// propagate as the modules' runtime errors.
inline Output run(const ScenarioConfig& c, std::uint64_t seed) {
    validate(c);
    try {
        if (c.scenario == "vsystem") return detail::run_vsystem(c);
        if (c.scenario == "calcium") return detail::run_calcium(c);
        if (c.scenario == "dimer") return detail::run_dimer(c);
        if (c.scenario == "retinal") return detail::run_retinal(c);
        return detail::run_pathways(c, seed);
    } catch (const std::invalid_argument& e) {
        throw ConfigError({e.what()});
    }
}

}  // namespace nicoh::scenario
