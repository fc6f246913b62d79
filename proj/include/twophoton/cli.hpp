// cli.hpp: Configuration parsing and the spectrum / collapse / fluorescence commands

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "twophoton/dynamics.hpp"
#include "twophoton/model.hpp"
#include "twophoton/spectrum.hpp"

namespace twophoton::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;
inline constexpr int exit_strict = 4;

std::string version();

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inclusive grid start, start + step, … up to stop (within 1e−9·step).
struct GridSpec {
    double start{0.0};
    double stop{0.0};
    double step{0.0};

    std::vector<double> values() const;
};

enum class OutputFormat { Csv, Json };

struct RunConfig {
    ModelParams model;
    DissipationSpec dissipation;
    DriveSpec drive;
    bool drive_frequency_auto{true};
    std::optional<GridSpec> sweep;
    std::filesystem::path output_dir{"out"};
    OutputFormat format{OutputFormat::Csv};

    std::size_t spectrum_levels{20};
    ConvergenceOptions convergence;
    CollapseOptions collapse;

    GridSpec omega{0.25, 1.75, 5e-4};
    std::optional<double> tau_max;       // default 15 / min κ
    DriveTarget output_port{DriveTarget::on_cavity()};
    double peak_threshold{0.05};
    FloquetOptions floquet;

    // Sections that carried at least one key.
    std::vector<std::string> sections;
    // Keys left at their defaults, for meta.json.
    std::vector<std::string> defaulted;

    bool has_section(const std::string& name) const;
    // g values of the sweep, or the single model.g2 without one.
    std::vector<double> coupling_values() const;
    double resolved_tau_max() const;
};

// Flat "section.key = value" lines; '#' starts a comment. Unknown keys, duplicates and
// out-of-range values throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Command bodies; each returns an exit code and logs to err.
int cmd_spectrum(const RunConfig& config, bool strict, std::ostream& err);
int cmd_collapse(const RunConfig& config, bool strict, std::ostream& err);
int cmd_fluorescence(const RunConfig& config, bool strict, std::ostream& err);

// Full command line: "<command> --config <path> [--out <dir>] [--strict]".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace twophoton::cli
