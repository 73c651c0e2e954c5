// nicoh: run, sweep and check scenario configs

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>

#include <nicoh/config.hpp>
#include <nicoh/scenario.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using nicoh::config::ConfigError;
using nicoh::config::ScenarioConfig;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { ok = 0, config_error = 1, numeric_failure = 2 };

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << s;
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
}

json config_echo(const ScenarioConfig& c) {
    json j = json::object();
    for (const auto& [k, v] : c.values) j[k] = {{"value", v.text}, {"defaulted", v.defaulted}};
    return j;
}

struct Result {
    Exit code = Exit::ok;
    std::string error;
    nicoh::scenario::Output output;
};

/// Runs one config, never throws.
Result execute(const ScenarioConfig& c, std::uint64_t seed) {
    Result r;
    try {
        r.output = nicoh::scenario::run(c, seed);
        if (!r.output.passed()) r.code = Exit::numeric_failure;
    } catch (const ConfigError& e) {
        r.code = Exit::config_error;
        r.error = e.what();
    } catch (const std::exception& e) {
        r.code = Exit::numeric_failure;
        r.error = e.what();
    }
    return r;
}

json checks_json(const nicoh::scenario::Output& o) {
    json a = json::array();
    for (const auto& c : o.checks) a.push_back({{"name", c.name}, {"ok", c.ok}, {"detail", c.detail}});
    return a;
}

std::string status_name(Exit e) {
    return e == Exit::ok ? "ok" : e == Exit::config_error ? "config_error" : "numeric_failure";
}

void report(const std::string& what) { std::cerr << "nicoh: " << what << "\n"; }

std::optional<ScenarioConfig> load(const std::string& path, json& manifest) {
    try {
        return nicoh::config::parse_config(read_file(path));
    } catch (const ConfigError& e) {
        manifest["status"] = status_name(Exit::config_error);
        manifest["errors"] = e.errors;
        for (const auto& x : e.errors) report(path + ": " + x);
        return std::nullopt;
    }
}

fs::path output_dir(const std::optional<ScenarioConfig>& c, const std::string& flag) {
    if (!flag.empty()) return flag;
    return c ? fs::path(c->text("output")) : fs::path("out");
}

int cmd_run(const std::string& path, const std::string& out_flag, std::optional<std::uint64_t> seed_flag) {
    const auto start = std::chrono::steady_clock::now();
    json manifest{{"command", "run"}, {"config_file", path}, {"version", kVersion}};
    const auto cfg = load(path, manifest);
    const fs::path dir = output_dir(cfg, out_flag);
    Exit code = Exit::config_error;
    if (cfg) {
        const std::uint64_t seed = seed_flag ? *seed_flag : std::uint64_t(cfg->integer("seed"));
        manifest["config"] = config_echo(*cfg);
        manifest["seed"] = seed;
        manifest["defaults_applied"] = cfg->defaulted();
        const Result r = execute(*cfg, seed);
        code = r.code;
        manifest["status"] = status_name(code);
        if (!r.error.empty()) {
            manifest["errors"] = json::array({r.error});
            report(r.error);
        }
        if (code != Exit::config_error) {
            manifest["checks"] = checks_json(r.output);
            manifest["summary"] = r.output.summary;
            for (const auto& c : r.output.checks)
                if (!c.ok) report("invariant check failed: " + c.name + " (" + c.detail + ")");
        }
        if (!r.output.table.header.empty()) {
            const fs::path csv = dir / (cfg->scenario + ".csv");
            write_file(csv, nicoh::scenario::to_csv(r.output.table));
            manifest["outputs"] = json::array({csv.string()});
        }
    }
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return code;
}

int cmd_sweep(const std::string& path, const std::string& key, const std::string& values, const std::string& out_flag,
              std::optional<std::uint64_t> seed_flag) {
    const auto start = std::chrono::steady_clock::now();
    json manifest{{"command", "sweep"}, {"config_file", path}, {"version", kVersion}, {"key", key}};
    const auto cfg = load(path, manifest);
    const fs::path dir = output_dir(cfg, out_flag);
    if (!cfg) {
        write_file(dir / "manifest.json", manifest.dump(2) + "\n");
        return Exit::config_error;
    }
    // The swept key must be numeric for this scenario.
    const auto keys = nicoh::config::schema(cfg->scenario);
    const auto spec = std::find_if(keys.begin(), keys.end(), [&](const auto& s) { return s.name == key; });
    if (spec == keys.end() || (spec->type != nicoh::config::Type::real && spec->type != nicoh::config::Type::integer)) {
        report("sweep key '" + key + "' is not a numeric key of scenario " + cfg->scenario);
        manifest["status"] = status_name(Exit::config_error);
        manifest["errors"] = json::array({"sweep key '" + key + "' is not numeric"});
        write_file(dir / "manifest.json", manifest.dump(2) + "\n");
        return Exit::config_error;
    }
    const auto list = nicoh::config::split(values, ',');
    const std::uint64_t seed = seed_flag ? *seed_flag : std::uint64_t(cfg->integer("seed"));
    manifest["config"] = config_echo(*cfg);
    manifest["seed"] = seed;
    manifest["defaults_applied"] = cfg->defaulted();
    manifest["values"] = list;

    std::vector<std::future<Result>> jobs;
    for (const auto& v : list)
        jobs.push_back(std::async(std::launch::async, [&cfg, &key, v, seed] {
            try {
                return execute(nicoh::config::with_override(*cfg, key, v), seed);
            } catch (const ConfigError& e) {
                return Result{Exit::config_error, e.what(), {}};
            }
        }));
    std::vector<Result> results;
    for (auto& j : jobs) results.push_back(j.get());

    std::vector<std::string> columns;
    for (const auto& r : results)
        for (const auto& [k, _] : r.output.summary)
            if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
    std::string summary = key + ",status";
    for (const auto& c : columns) summary += "," + c;
    summary += "\n";
    json runs = json::array();
    int worst = Exit::ok;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const Result& r = results[i];
        worst = std::max(worst, int(r.code));
        summary += list[i] + "," + status_name(r.code);
        for (const auto& c : columns) {
            summary += ",";
            const auto it = r.output.summary.find(c);
            if (r.code != Exit::ok || it == r.output.summary.end()) {
                summary += "FAILED";
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.12e", it->second);
                summary += buf;
            }
        }
        summary += "\n";
        json run{{"value", list[i]}, {"status", status_name(r.code)}};
        if (!r.error.empty()) {
            run["error"] = r.error;
            report(key + " = " + list[i] + ": " + r.error);
        }
        if (!r.output.table.header.empty()) {
            const fs::path csv = dir / (cfg->scenario + "_" + key + "_" + std::to_string(i) + ".csv");
            write_file(csv, nicoh::scenario::to_csv(r.output.table));
            run["output"] = csv.string();
            run["checks"] = checks_json(r.output);
        }
        runs.push_back(run);
    }
    write_file(dir / "summary.csv", summary);
    manifest["runs"] = runs;
    manifest["status"] = status_name(Exit(worst));
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return worst;
}

int cmd_check(const std::string& path) {
    try {
        const auto cfg = nicoh::config::parse_config(read_file(path));
        nicoh::scenario::validate(cfg);
        std::cout << path << ": ok (scenario " << cfg.scenario << ")\n";
        for (const auto& k : cfg.defaulted()) std::cout << "  default " << k << " = " << cfg.text(k) << "\n";
        return Exit::ok;
    } catch (const ConfigError& e) {
        for (const auto& x : e.errors) report(path + ": " + x);
        return Exit::config_error;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incoherently driven quantum systems: V-system, calcium, dimer, retinal and pathway models"};
    app.require_subcommand(1);
    std::string path, out, key, values;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Run a scenario and write CSV plus manifest");
    run->add_option("config", path, "Scenario config file")->required();
    run->add_option("--out", out, "Output directory (overrides the config's output key)");
    run->add_option("--seed", seed, "Random seed (overrides the config's seed key)");

    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of one numeric key");
    sweep->add_option("config", path, "Scenario config file")->required();
    sweep->add_option("--key", key, "Numeric config key to vary")->required();
    sweep->add_option("--values", values, "Comma-separated values (may be empty)")->required();
    sweep->add_option("--out", out, "Output directory");
    sweep->add_option("--seed", seed, "Random seed");

    auto* check = app.add_subcommand("check", "Validate a config without running it");
    check->add_option("config", path, "Scenario config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : Exit::config_error;
    }
    try {
        if (*run) return cmd_run(path, out, seed);
        if (*sweep) return cmd_sweep(path, key, values, out, seed);
        return cmd_check(path);
    } catch (const std::exception& e) {
        report(e.what());
        return Exit::numeric_failure;
    }
}
