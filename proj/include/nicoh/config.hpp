// config.hpp: flat key = value scenario files with strict per-scenario schemas

#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nicoh::config {

/// Carries every problem found, each prefixed with its line number when known.
struct ConfigError : std::runtime_error {
    std::vector<std::string> errors;

    explicit ConfigError(std::vector<std::string> e) : std::runtime_error(join(e)), errors(std::move(e)) {}

    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (const auto& x : e) s += (s.empty() ? "" : "\n") + x;
        return s;
    }
};

enum class Type { real, integer, boolean, text };

struct KeySpec {
    std::string name;
    Type type = Type::real;
    std::optional<std::string> fallback;  // absent: required unless `optional`
    bool optional = false;
    std::function<std::string(double)> check;  // numeric range check; empty message = ok
    std::vector<std::string> choices;          // for text keys
};

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> n{"vsystem", "calcium", "dimer", "retinal", "pathways"};
    return n;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::optional<double> to_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> to_integer(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<bool> to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    return std::nullopt;
}

inline std::function<std::string(double)> at_least(double lo, bool strict = false) {
    return [=](double v) -> std::string {
        if (strict ? v > lo : v >= lo) return "";
        std::ostringstream os;
        os << "must be " << (strict ? "> " : ">= ") << lo;
        return os.str();
    };
}

inline std::function<std::string(double)> within(double lo, double hi) {
    return [=](double v) -> std::string {
        if (v >= lo && v <= hi) return "";
        std::ostringstream os;
        os << "must lie in [" << lo << ", " << hi << "]";
        return os.str();
    };
}

}  // namespace detail

/// Keys shared by every scenario. Only numerics have defaults here.
inline std::vector<KeySpec> common_keys(const std::string& t_final_default) {
    using detail::at_least;
    return {
        {"scenario", Type::text, std::nullopt, false, {}, scenario_names()},
        {"output", Type::text, "out"},
        {"seed", Type::integer, "1", false, at_least(0)},
        {"t_final", Type::real, t_final_default, false, at_least(0.0, true)},
        {"n_points", Type::integer, "201", false, at_least(2)},
        {"rtol", Type::real, "1e-9", false, at_least(0.0, true)},
        {"atol", Type::real, "1e-12", false, at_least(0.0, true)},
    };
}

/// Per-scenario schema. Physics defaults reproduce each module's documented
/// reference profile and are listed in the manifest whenever they are used.
inline std::vector<KeySpec> schema(const std::string& scenario) {
    using detail::at_least;
    using detail::within;
    auto keys = common_keys(scenario == "retinal" ? "1000" : scenario == "dimer" ? "50" : "10");
    auto add = [&](std::vector<KeySpec> more) { keys.insert(keys.end(), more.begin(), more.end()); };
    const auto rate = at_least(0.0);
    const auto positive = at_least(0.0, true);
    if (scenario == "vsystem") {
        add({
            {"delta", Type::real, "24"},
            {"g1", Type::real, "1", false, rate},
            {"g2", Type::real, "1", false, rate},
            {"nbar", Type::real, "0.0633", false, rate},  // r_i = nbar g_i unless r1, r2 are given
            {"r1", Type::real, std::nullopt, true, rate},
            {"r2", Type::real, std::nullopt, true, rate},
            {"p", Type::real, "1", false, within(-1.0, 1.0)},
            {"stimulated_decay", Type::boolean, "true"},
            {"secular", Type::boolean, "false"},
            {"tau_r", Type::real, "0", false, rate},
        });
    } else if (scenario == "calcium") {
        add({
            {"delta_Z", Type::real, "0.006"},
            {"gamma", Type::real, "1", false, positive},
            {"nbar", Type::real, "0.0633", false, rate},
            {"r_iso", Type::real, std::nullopt, true, rate},
            {"secular", Type::boolean, "false"},
            {"tau_r", Type::real, "0", false, rate},
        });
    } else if (scenario == "dimer") {
        add({
            {"omega_L", Type::real, "1", false, positive},
            {"omega_R", Type::real, "1", false, positive},
            {"J", Type::real, "0.1"},
            {"T_L", Type::real, "2", false, positive},
            {"T_R", Type::real, "0.5", false, positive},
            {"gamma_L", Type::real, "1", false, rate},
            {"gamma_R", Type::real, "1", false, rate},
        });
    } else if (scenario == "retinal") {
        add({
            {"E0", Type::real, std::nullopt},
            {"E1", Type::real, std::nullopt},
            {"V0", Type::real, std::nullopt},
            {"V1", Type::real, std::nullopt},
            {"omega", Type::real, std::nullopt, false, positive},
            {"kappa", Type::real, std::nullopt},
            {"lambda", Type::real, std::nullopt},
            {"inv_inertia", Type::real, std::nullopt, false, positive},
            {"mu", Type::real, std::nullopt, false, rate},
            {"T_rad", Type::real, std::nullopt, false, rate},
            {"T_phon", Type::real, std::nullopt, false, rate},
            {"eta", Type::real, std::nullopt, false, rate},
            {"omega_c", Type::real, std::nullopt, false, positive},
            {"n_fourier", Type::integer, "64", false, at_least(4)},
            {"n_ho", Type::integer, "24", false, at_least(4)},
            {"n_keep", Type::integer, "150", false, at_least(1)},
            {"cluster_tol", Type::real, std::nullopt, true, rate},
            {"secular", Type::boolean, "false"},
            {"tau_r", Type::real, "0", false, rate},
            {"pairs", Type::text, "bright"},
        });
    } else if (scenario == "pathways") {
        add({
            {"kind", Type::text, "exponential", false, {}, {"exponential", "delta", "monochromatic"}},
            {"amplitude", Type::real, "1", false, positive},
            {"tau_c", Type::real, "1", false, positive},
            {"omega", Type::real, "0"},
            {"levels", Type::text, std::nullopt},
            {"dipoles", Type::text, std::nullopt},
            {"polarization", Type::text, "x", false, {}, {"x", "y", "z", "none"}},
            {"t0", Type::real, "0"},
            {"method", Type::text, "analytic", false, {}, {"analytic", "ensemble"}},
            {"realizations", Type::integer, "1000", false, at_least(2)},
            {"intervals", Type::integer, "1024", false, at_least(4)},
        });
    }
    return keys;
}

struct ConfigValue {
    std::string text;
    int line = 0;  // 0 for defaults and overrides
    bool defaulted = false;
};

struct ScenarioConfig {
    std::string scenario;
    std::map<std::string, ConfigValue> values;

    bool has(const std::string& k) const { return values.count(k) != 0; }

    const std::string& text(const std::string& k) const {
        const auto it = values.find(k);
        if (it == values.end()) throw std::out_of_range("config: no value for '" + k + "'");
        return it->second.text;
    }
    double real(const std::string& k) const { return *detail::to_real(text(k)); }
    long long integer(const std::string& k) const { return *detail::to_integer(text(k)); }
    bool flag(const std::string& k) const { return *detail::to_bool(text(k)); }

    std::vector<std::string> defaulted() const {
        std::vector<std::string> d;
        for (const auto& [k, v] : values)
            if (v.defaulted) d.push_back(k);
        return d;
    }
};

namespace detail {

inline std::string where(int line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

/// Checks one value against its spec; returns an error message or "".
inline std::string check_value(const KeySpec& s, const std::string& v) {
    switch (s.type) {
        case Type::real: {
            const auto x = to_real(v);
            if (!x) return "'" + s.name + "' expects a number, got '" + v + "'";
            if (s.check) {
                const auto m = s.check(*x);
                if (!m.empty()) return "'" + s.name + "' = " + v + " rejected: " + m;
            }
            return "";
        }
        case Type::integer: {
            const auto x = to_integer(v);
            if (!x) return "'" + s.name + "' expects an integer, got '" + v + "'";
            if (s.check) {
                const auto m = s.check(double(*x));
                if (!m.empty()) return "'" + s.name + "' = " + v + " rejected: " + m;
            }
            return "";
        }
        case Type::boolean:
            return to_bool(v) ? "" : "'" + s.name + "' expects true or false, got '" + v + "'";
        case Type::text:
            if (!s.choices.empty() && std::find(s.choices.begin(), s.choices.end(), v) == s.choices.end()) {
                std::string opts;
                for (const auto& c : s.choices) opts += (opts.empty() ? "" : ", ") + c;
                return "'" + s.name + "' must be one of {" + opts + "}, got '" + v + "'";
            }
            return "";
    }
    return "";
}

/// Validates raw entries against the scenario schema and fills defaults.
inline ScenarioConfig validate(const std::string& scenario, const std::map<std::string, ConfigValue>& raw,
                               std::vector<std::string>& errors) {
    ScenarioConfig cfg;
    cfg.scenario = scenario;
    const auto keys = schema(scenario);
    for (const auto& [k, v] : raw) {
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& s) { return s.name == k; });
        if (it == keys.end()) {
            errors.push_back(where(v.line) + "unknown key '" + k + "' for scenario " + scenario);
            continue;
        }
        const auto m = check_value(*it, v.text);
        if (!m.empty()) errors.push_back(where(v.line) + m);
        cfg.values[k] = v;
    }
    for (const auto& s : keys) {
        if (cfg.has(s.name)) continue;
        if (s.fallback)
            cfg.values[s.name] = {*s.fallback, 0, true};
        else if (!s.optional)
            errors.push_back("missing required key '" + s.name + "'");
    }
    return cfg;
}

}  // namespace detail

/// Grammar: `key = value` per line, `#` starts a comment, optional `[section]`
/// headers where the section is `grid` or the scenario name. All errors are
/// collected before throwing.
inline ScenarioConfig parse_config(const std::string& text) {
    std::vector<std::string> errors;
    std::map<std::string, ConfigValue> raw;
    std::vector<std::pair<std::string, int>> sections;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                errors.push_back(detail::where(no) + "malformed section header '" + line + "'");
                continue;
            }
            sections.emplace_back(detail::trim(line.substr(1, line.size() - 2)), no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back(detail::where(no) + "expected 'key = value', got '" + line + "'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            errors.push_back(detail::where(no) + "empty key or value");
            continue;
        }
        if (raw.count(key)) {
            errors.push_back(detail::where(no) + "duplicate key '" + key + "' (first on line " +
                             std::to_string(raw[key].line) + ")");
            continue;
        }
        raw[key] = {value, no, false};
    }
    const auto sc = raw.find("scenario");
    if (sc == raw.end()) {
        errors.push_back("missing required key 'scenario'");
        throw ConfigError(errors);
    }
    const std::string scenario = sc->second.text;
    const auto& names = scenario_names();
    if (std::find(names.begin(), names.end(), scenario) == names.end()) {
        errors.push_back(detail::where(sc->second.line) + "unknown scenario '" + scenario + "'");
        throw ConfigError(errors);
    }
    for (const auto& [s, l] : sections)
        if (s != "grid" && s != scenario)
            errors.push_back(detail::where(l) + "section [" + s + "] does not match scenario " + scenario);
    ScenarioConfig cfg = detail::validate(scenario, raw, errors);
    if (!errors.empty()) throw ConfigError(errors);
    return cfg;
}

/// Same configuration with one key replaced (sweeps). The value is validated.
inline ScenarioConfig with_override(const ScenarioConfig& base, const std::string& key, const std::string& value) {
    if (key == "scenario") throw ConfigError({"cannot override 'scenario'"});
    std::map<std::string, ConfigValue> raw;
    for (const auto& [k, v] : base.values)
        if (!v.defaulted) raw[k] = v;
    raw[key] = {value, 0, false};
    std::vector<std::string> errors;
    ScenarioConfig cfg = detail::validate(base.scenario, raw, errors);
    if (!errors.empty()) throw ConfigError(errors);
    return cfg;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (detail::trim(s).empty()) return out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(detail::trim(item));
    return out;
}

}  // namespace nicoh::config
