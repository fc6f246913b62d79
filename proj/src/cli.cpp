// cli.cpp: Configuration parsing and the spectrum / collapse / fluorescence commands

#include "twophoton/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#ifndef TWOPHOTON_VERSION
#define TWOPHOTON_VERSION "0.0.0"
#endif

namespace twophoton::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out))
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    const long long v = parse_integer(key, value);
    if (v < 0)
        throw ConfigError(key + ": must be >= 0");
    return static_cast<std::size_t>(v);
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"model.omega_c", [](RunConfig& c, auto& k, auto& v) { c.model.omega_c = parse_double(k, v); }},
        {"model.omega_q", [](RunConfig& c, auto& k, auto& v) { c.model.omega_q = parse_double(k, v); }},
        {"model.g2", [](RunConfig& c, auto& k, auto& v) { c.model.g2 = parse_double(k, v); }},
        {"model.n_qubits", [](RunConfig& c, auto& k, auto& v) { c.model.n_qubits = int(parse_integer(k, v)); }},
        {"model.coupling_form",
         [](RunConfig& c, auto& k, auto& v) {
             try {
                 c.model.coupling_form = coupling_form_from_string(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(k + ": " + e.what());
             }
         }},
        {"model.j_interspin", [](RunConfig& c, auto& k, auto& v) { c.model.j_interspin = parse_double(k, v); }},
        {"dissipation.kappa_cavity",
         [](RunConfig& c, auto& k, auto& v) { c.dissipation.kappa_cavity = parse_double(k, v); }},
        {"dissipation.kappa_qubit",
         [](RunConfig& c, auto& k, auto& v) { c.dissipation.kappa_qubit = parse_double(k, v); }},
        {"dissipation.spectral_exponent",
         [](RunConfig& c, auto& k, auto& v) { c.dissipation.spectral_exponent = int(parse_integer(k, v)); }},
        {"dissipation.n_dressed", [](RunConfig& c, auto& k, auto& v) { c.dissipation.n_dressed = parse_count(k, v); }},
        {"drive.amplitude", [](RunConfig& c, auto& k, auto& v) { c.drive.amplitude = parse_double(k, v); }},
        {"drive.frequency",
         [](RunConfig& c, auto& k, auto& v) {
             c.drive_frequency_auto = v == "auto";
             if (c.drive_frequency_auto)
                 c.drive.frequency.reset();
             else
                 c.drive.frequency = parse_double(k, v);
         }},
        {"drive.target",
         [](RunConfig& c, auto& k, auto& v) {
             try {
                 c.drive.target = DriveTarget::parse(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(k + ": " + e.what());
             }
         }},
        {"sweep.start", [](RunConfig& c, auto& k, auto& v) { c.sweep->start = parse_double(k, v); }},
        {"sweep.stop", [](RunConfig& c, auto& k, auto& v) { c.sweep->stop = parse_double(k, v); }},
        {"sweep.step", [](RunConfig& c, auto& k, auto& v) { c.sweep->step = parse_double(k, v); }},
        {"output.directory", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
        {"output.format",
         [](RunConfig& c, auto& k, auto& v) {
             if (v == "csv")
                 c.format = OutputFormat::Csv;
             else if (v == "json")
                 c.format = OutputFormat::Json;
             else
                 throw ConfigError(k + ": expected csv or json, got '" + v + "'");
         }},
        {"spectrum.levels", [](RunConfig& c, auto& k, auto& v) { c.spectrum_levels = parse_count(k, v); }},
        {"spectrum.n_max_start",
         [](RunConfig& c, auto& k, auto& v) { c.convergence.n_max_start = int(parse_integer(k, v)); }},
        {"spectrum.n_max_cap",
         [](RunConfig& c, auto& k, auto& v) { c.convergence.n_max_cap = int(parse_integer(k, v)); }},
        {"spectrum.rel_tol", [](RunConfig& c, auto& k, auto& v) { c.convergence.rel_tol = parse_double(k, v); }},
        {"collapse.levels", [](RunConfig& c, auto& k, auto& v) { c.collapse.k_levels = parse_count(k, v); }},
        {"collapse.band_first", [](RunConfig& c, auto& k, auto& v) { c.collapse.band_first = parse_count(k, v); }},
        {"collapse.fit_from_fraction",
         [](RunConfig& c, auto& k, auto& v) { c.collapse.fit_from_fraction = parse_double(k, v); }},
        {"collapse.bisection_resolution",
         [](RunConfig& c, auto& k, auto& v) { c.collapse.bisection_resolution = parse_double(k, v); }},
        {"fluorescence.omega_start", [](RunConfig& c, auto& k, auto& v) { c.omega.start = parse_double(k, v); }},
        {"fluorescence.omega_stop", [](RunConfig& c, auto& k, auto& v) { c.omega.stop = parse_double(k, v); }},
        {"fluorescence.omega_step", [](RunConfig& c, auto& k, auto& v) { c.omega.step = parse_double(k, v); }},
        {"fluorescence.tau_max", [](RunConfig& c, auto& k, auto& v) { c.tau_max = parse_double(k, v); }},
        {"fluorescence.output",
         [](RunConfig& c, auto& k, auto& v) {
             try {
                 c.output_port = DriveTarget::parse(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(k + ": " + e.what());
             }
         }},
        {"fluorescence.peak_threshold",
         [](RunConfig& c, auto& k, auto& v) { c.peak_threshold = parse_double(k, v); }},
        {"floquet.steps_per_period",
         [](RunConfig& c, auto& k, auto& v) { c.floquet.steps_per_period = int(parse_integer(k, v)); }},
        {"floquet.phase_samples",
         [](RunConfig& c, auto& k, auto& v) { c.floquet.phase_samples = int(parse_integer(k, v)); }},
        {"floquet.stroboscopic_tol",
         [](RunConfig& c, auto& k, auto& v) { c.floquet.stroboscopic_tol = parse_double(k, v); }},
        {"floquet.truncation_guard",
         [](RunConfig& c, auto& k, auto& v) { c.floquet.truncation_guard = parse_double(k, v); }},
    };
    return table;
}

void require(bool ok, const std::string& message) {
    if (!ok)
        throw ConfigError(message);
}

void validate_grid(const GridSpec& g, const std::string& name) {
    require(g.step > 0.0, name + ".step must be > 0");
    require(g.stop >= g.start, name + ": stop must not be below start");
    require((g.stop - g.start) / g.step < 1e7, name + ": more than 1e7 grid points");
}

void validate(const RunConfig& c) {
    try {
        c.model.validate();
        c.dissipation.validate();
        c.drive.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.drive.target.kind == DriveTarget::Kind::Qubit)
        require(c.drive.target.qubit >= 1 && c.drive.target.qubit <= c.model.n_qubits,
                "drive.target: qubit index out of range");
    if (c.output_port.kind == DriveTarget::Kind::Qubit)
        require(c.output_port.qubit >= 1 && c.output_port.qubit <= c.model.n_qubits,
                "fluorescence.output: qubit index out of range");
    if (c.sweep) {
        validate_grid(*c.sweep, "sweep");
        require(c.sweep->start >= 0.0, "sweep.start must be >= 0");
    }
    validate_grid(c.omega, "fluorescence.omega");
    require(c.omega.start > 0.0, "fluorescence.omega_start must be > 0");
    require(c.spectrum_levels >= 1, "spectrum.levels must be >= 1");
    require(c.convergence.n_max_start >= 2 && c.convergence.n_max_cap >= c.convergence.n_max_start,
            "spectrum: need 2 <= n_max_start <= n_max_cap");
    require(c.convergence.rel_tol > 0.0, "spectrum.rel_tol must be > 0");
    require(c.collapse.k_levels > c.collapse.band_first + 1, "collapse.levels must exceed collapse.band_first + 1");
    require(c.collapse.fit_from_fraction > 0.0 && c.collapse.fit_from_fraction < 1.0,
            "collapse.fit_from_fraction must lie in (0, 1)");
    require(c.collapse.bisection_resolution > 0.0 && c.collapse.bisection_resolution < 0.1,
            "collapse.bisection_resolution must lie in (0, 0.1)");
    require(!c.tau_max || *c.tau_max > 0.0, "fluorescence.tau_max must be > 0");
    require(c.peak_threshold > 0.0 && c.peak_threshold < 1.0, "fluorescence.peak_threshold must lie in (0, 1)");
    require(c.floquet.phase_samples >= 1 && c.floquet.steps_per_period >= c.floquet.phase_samples &&
                c.floquet.steps_per_period % c.floquet.phase_samples == 0,
            "floquet.steps_per_period must be a positive multiple of floquet.phase_samples");
    require(c.floquet.stroboscopic_tol > 0.0, "floquet.stroboscopic_tol must be > 0");
    require(c.floquet.truncation_guard > 0.0, "floquet.truncation_guard must be > 0");
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path.string());
    f << body;
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string g_directory(double g) { return "g_" + format_number(g); }

Json model_json(const ModelParams& m) {
    return Json{{"omega_c", m.omega_c},
                {"omega_q", m.omega_q},
                {"g2", m.g2},
                {"n_qubits", m.n_qubits},
                {"coupling_form", to_string(m.coupling_form)},
                {"j_interspin", m.j_interspin}};
}

Json config_json(const RunConfig& c) {
    Json j;
    j["model"] = model_json(c.model);
    j["dissipation"] = {{"kappa_cavity", c.dissipation.kappa_cavity},
                        {"kappa_qubit", c.dissipation.kappa_qubit},
                        {"spectral_exponent", c.dissipation.spectral_exponent},
                        {"n_dressed", c.dissipation.n_dressed}};
    j["drive"] = {{"amplitude", c.drive.amplitude},
                  {"frequency", c.drive_frequency_auto ? Json("auto") : Json(*c.drive.frequency)},
                  {"target", c.drive.target.to_string()}};
    if (c.sweep)
        j["sweep"] = {{"start", c.sweep->start}, {"stop", c.sweep->stop}, {"step", c.sweep->step}};
    else
        j["sweep"] = nullptr;
    j["output"] = {{"directory", c.output_dir.string()}, {"format", c.format == OutputFormat::Csv ? "csv" : "json"}};
    j["spectrum"] = {{"levels", c.spectrum_levels},
                     {"n_max_start", c.convergence.n_max_start},
                     {"n_max_cap", c.convergence.n_max_cap},
                     {"rel_tol", c.convergence.rel_tol}};
    j["collapse"] = {{"levels", c.collapse.k_levels},
                     {"band_first", c.collapse.band_first},
                     {"fit_from_fraction", c.collapse.fit_from_fraction},
                     {"bisection_resolution", c.collapse.bisection_resolution}};
    j["fluorescence"] = {{"omega_start", c.omega.start},
                         {"omega_stop", c.omega.stop},
                         {"omega_step", c.omega.step},
                         {"tau_max", c.tau_max ? Json(*c.tau_max) : Json("auto")},
                         {"output", c.output_port.to_string()},
                         {"peak_threshold", c.peak_threshold}};
    j["floquet"] = {{"steps_per_period", c.floquet.steps_per_period},
                    {"phase_samples", c.floquet.phase_samples},
                    {"stroboscopic_tol", c.floquet.stroboscopic_tol},
                    {"truncation_guard", c.floquet.truncation_guard}};
    return j;
}

Json meta_json(const RunConfig& c, const std::string& command) {
    Json j;
    j["tool"] = "twophoton";
    j["version"] = version();
    j["command"] = command;
    j["units"] = "energies and frequencies in units of omega_c, times in units of 1/omega_c";
    j["parameters"] = config_json(c);
    j["defaults_applied"] = c.defaulted;
    return j;
}

std::string elapsed_since(std::chrono::steady_clock::time_point t0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return buf;
}

void prepare_output(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

} // namespace

std::string version() { return TWOPHOTON_VERSION; }

std::vector<double> GridSpec::values() const {
    const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (long long i = 0; i < n; ++i)
        out.push_back(start + double(i) * step);
    return out;
}

bool RunConfig::has_section(const std::string& name) const {
    return std::find(sections.begin(), sections.end(), name) != sections.end();
}

std::vector<double> RunConfig::coupling_values() const {
    return sweep ? sweep->values() : std::vector<double>{model.g2};
}

double RunConfig::resolved_tau_max() const {
    if (tau_max)
        return *tau_max;
    double kappa_min = std::numeric_limits<double>::infinity();
    for (double k : {dissipation.kappa_cavity, dissipation.kappa_qubit})
        if (k > 0.0)
            kappa_min = std::min(kappa_min, k);
    if (!std::isfinite(kappa_min))
        throw ConfigError("fluorescence needs a nonzero dissipation rate or an explicit fluorescence.tau_max");
    return 15.0 / kappa_min;
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (value.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        const std::string section = key.substr(0, key.find('.'));
        if (section == "sweep" && !c.sweep)
            c.sweep = GridSpec{};
        if (!c.has_section(section))
            c.sections.push_back(section);
        it->second(c, key, value);
    }
    if (c.sweep)
        for (const char* k : {"sweep.start", "sweep.stop", "sweep.step"})
            if (!seen.count(k))
                throw ConfigError(std::string("sweep section is missing ") + k);
    for (const auto& [key, setter] : setters())
        if (!seen.count(key) && key.rfind("sweep.", 0) != 0)
            c.defaulted.push_back(key);
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

int cmd_spectrum(const RunConfig& config, bool /*strict*/, std::ostream& err) {
    if (!config.sweep) {
        err << "error: the spectrum command needs a sweep section\n";
        return exit_config;
    }
    const auto grid = config.sweep->values();
    const auto col = collapse_coupling(config.model);
    if (grid.back() >= col.value) {
        err << "error: sweep.stop = " << format_number(grid.back()) << " is not below the collapse coupling "
            << format_number(col.value) << "\n";
        return exit_config;
    }
    const auto t0 = std::chrono::steady_clock::now();
    SweepResult sweep;
    try {
        sweep = sweep_coupling(config.model, grid, config.spectrum_levels, config.convergence);
    } catch (const NonConvergent& e) {
        err << "error: no cutoff convergence at g2 = " << format_number(e.g()) << " up to n_max = "
            << config.convergence.n_max_cap << "\n";
        return exit_numerical;
    }

    prepare_output(config.output_dir);
    Json meta = meta_json(config, "spectrum");
    Json cutoffs = Json::array();
    for (std::size_t i = 0; i < sweep.g_values.size(); ++i)
        cutoffs.push_back({{"g", sweep.g_values[i]}, {"n_max_used", sweep.n_max_used[i]}});
    meta["cutoffs"] = cutoffs;

    if (config.format == OutputFormat::Csv) {
        std::string body = "g,level_index,energy,parity,converged\n";
        for (std::size_t i = 0; i < sweep.g_values.size(); ++i)
            for (std::size_t l = 0; l < sweep.levels[i].size(); ++l)
                body += format_number(sweep.g_values[i]) + "," + std::to_string(l) + "," +
                        format_number(sweep.levels[i][l].energy) + "," + std::to_string(sweep.levels[i][l].parity) +
                        ",true\n";
        write_text(config.output_dir / "spectrum.csv", body);
    } else {
        Json rows = Json::array();
        for (std::size_t i = 0; i < sweep.g_values.size(); ++i)
            for (std::size_t l = 0; l < sweep.levels[i].size(); ++l)
                rows.push_back({{"g", sweep.g_values[i]},
                                {"level_index", l},
                                {"energy", sweep.levels[i][l].energy},
                                {"parity", sweep.levels[i][l].parity},
                                {"converged", true}});
        write_json(config.output_dir / "spectrum.json", rows);
    }
    write_json(config.output_dir / "meta.json", meta);
    err << "spectrum: " << grid.size() << " couplings, " << config.spectrum_levels << " levels in "
        << elapsed_since(t0) << " s\n";
    return exit_ok;
}

int cmd_collapse(const RunConfig& config, bool strict, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    CollapseDiagnostics d;
    try {
        d = estimate_collapse(config.model, config.collapse);
    } catch (const CollapseFitError& e) {
        err << "error: collapse fit failed: " << e.what() << "\n";
        return exit_numerical;
    } catch (const NonConvergent& e) {
        err << "error: no cutoff convergence at g2 = " << format_number(e.g()) << "\n";
        return exit_numerical;
    }
    prepare_output(config.output_dir);
    Json j;
    j["g_col_analytic"] = d.g_col_analytic;
    j["g_col_estimated"] = d.g_col_estimated;
    j["method"] = to_string(d.method);
    Json curve = Json::array();
    for (const auto& s : d.spacing_curve)
        curve.push_back({{"g", s.g}, {"spacing", s.spacing}});
    j["spacing_curve"] = curve;
    j["g_col_fit"] = d.g_col_fit;
    j["smallest_failing_g"] = d.smallest_failing_g ? Json(*d.smallest_failing_g) : Json(nullptr);
    j["largest_converged_g"] = d.largest_converged_g ? Json(*d.largest_converged_g) : Json(nullptr);
    j["discrete_levels_observed"] = d.discrete_levels_observed;
    j["form_dependent"] = d.form_dependent;
    write_json(config.output_dir / "collapse.json", j);
    write_json(config.output_dir / "meta.json", meta_json(config, "collapse"));
    err << "collapse: analytic " << format_number(d.g_col_analytic) << ", estimated "
        << format_number(d.g_col_estimated) << " in " << elapsed_since(t0) << " s\n";
    if (d.form_dependent) {
        err << "warning: the analytic collapse coupling is only established for the full quadratic coupling\n";
        if (strict)
            return exit_strict;
    }
    return exit_ok;
}

int cmd_fluorescence(const RunConfig& config, bool strict, std::ostream& err) {
    if (!config.has_section("drive") || !config.has_section("dissipation")) {
        err << "error: the fluorescence command needs drive and dissipation sections\n";
        return exit_config;
    }
    double tau_max = 0.0;
    try {
        tau_max = config.resolved_tau_max();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }
    const auto couplings = config.coupling_values();
    const double g_col = collapse_coupling(config.model).value;
    for (double g : couplings)
        if (g >= g_col) {
            err << "error: g2 = " << format_number(g) << " is not below the collapse coupling " << format_number(g_col)
                << "\n";
            return exit_config;
        }
    const auto omega_grid = config.omega.values();

    int status = exit_ok;
    for (double g : couplings) {
        const auto t0 = std::chrono::steady_clock::now();
        ModelParams params = config.model;
        params.g2 = g;
        const auto dir = config.sweep ? config.output_dir / g_directory(g) : config.output_dir;
        FluorescenceSpectrum fs;
        double drive_frequency = 0.0;
        int n_max_used = 0;
        try {
            const auto eigs = converge_spectrum(params, config.dissipation.n_dressed, config.convergence);
            n_max_used = eigs.n_max_used;
            const auto gen = LindbladGenerator::build(eigs, params, config.dissipation, config.drive);
            drive_frequency = gen.frequency();
            FluorescenceOptions opts;
            opts.peak_threshold = config.peak_threshold;
            fs = fluorescence(eigs, gen, build_drive_operator(eigs.space, config.output_port), omega_grid, tau_max,
                              opts, config.floquet);
        } catch (const NonConvergent& e) {
            err << "error: no cutoff convergence at g2 = " << format_number(e.g()) << "\n";
            return exit_numerical;
        } catch (const TruncationError& e) {
            err << "error: g2 = " << format_number(g) << ": " << e.what() << "\n";
            return exit_numerical;
        } catch (const IntegrationError& e) {
            err << "error: g2 = " << format_number(g) << ": " << e.what() << "\n";
            return exit_numerical;
        } catch (const std::invalid_argument& e) {
            err << "error: g2 = " << format_number(g) << ": " << e.what() << "\n";
            return exit_numerical;
        }

        prepare_output(dir);
        if (config.format == OutputFormat::Csv) {
            std::string body = "omega,s_value\n";
            for (std::size_t i = 0; i < fs.omega_grid.size(); ++i)
                body += format_number(fs.omega_grid[i]) + "," + format_number(fs.s_values[i]) + "\n";
            write_text(dir / "fluorescence.csv", body);
            std::string peaks = "frequency,height,assignment\n";
            for (const auto& p : fs.peaks)
                peaks += format_number(p.frequency) + "," + format_number(p.height) + "," + p.assignment + "\n";
            write_text(dir / "peaks.csv", peaks);
        } else {
            Json rows = Json::array();
            for (std::size_t i = 0; i < fs.omega_grid.size(); ++i)
                rows.push_back({{"omega", fs.omega_grid[i]}, {"s_value", fs.s_values[i]}});
            write_json(dir / "fluorescence.json", rows);
            Json peaks = Json::array();
            for (const auto& p : fs.peaks)
                peaks.push_back({{"frequency", p.frequency}, {"height", p.height}, {"assignment", p.assignment}});
            write_json(dir / "peaks.json", peaks);
        }
        Json meta = meta_json(config, "fluorescence");
        meta["g2"] = g;
        meta["n_max_used"] = n_max_used;
        meta["drive_frequency"] = drive_frequency;
        meta["tau_max"] = tau_max;
        meta["window"] = fs.window;
        meta["tail_ratio"] = fs.tail_ratio;
        meta["tau_max_warning"] = fs.tau_max_warning;
        const auto summary = extract_peaks(fs, config.peak_threshold);
        meta["peak_count"] = summary.peaks.size();
        meta["peak_centroid"] = summary.centroid;
        meta["peak_spread"] = summary.spread;
        write_json(dir / "meta.json", meta);

        err << "fluorescence: g2 = " << format_number(g) << ", " << fs.peaks.size() << " peaks in "
            << elapsed_since(t0) << " s\n";
        if (fs.tau_max_warning) {
            err << "warning: g2 = " << format_number(g) << ": correlation has not decayed by tau_max (tail ratio "
                << format_number(fs.tail_ratio) << ")\n";
            if (strict)
                status = exit_strict;
        }
    }
    return status;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-photon qubit-cavity spectra, collapse diagnostics and fluorescence", "twophoton"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    bool strict = false;
    std::vector<CLI::App*> commands;
    for (const auto& [name, help] :
         std::vector<std::pair<std::string, std::string>>{{"spectrum", "Energy levels along a coupling sweep"},
                                                          {"collapse", "Numerical estimate of the collapse coupling"},
                                                          {"fluorescence", "Driven-dissipative emission spectrum"}}) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Configuration file")->required();
        sub->add_option("--out", out_dir, "Output directory, overrides output.directory");
        sub->add_flag("--strict", strict, "Treat warnings as failures (exit code 4)");
        commands.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion& e) {
        out << version() << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }

    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    }
    if (!out_dir.empty())
        config.output_dir = out_dir;

    try {
        if (commands[0]->parsed())
            return cmd_spectrum(config, strict, err);
        if (commands[1]->parsed())
            return cmd_collapse(config, strict, err);
        return cmd_fluorescence(config, strict, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_numerical;
    }
}

} // namespace twophoton::cli
