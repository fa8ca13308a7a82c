#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trudinger/grid.hpp"
#include "trudinger/pde.hpp"

namespace trudinger::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Experiment { solve, infconv, energy, metrology, barrier, full_pipeline };

struct DataSpec {
    std::string kind = "constant";  // constant | linear | kink | sine | file
    double c = 2.0;                 // constant level
    double a = 1.0, b = 2.0;        // linear a*x + b
    double center = 0.5;            // kink center
    double level = 2.0;             // kink/sine offset
    double slope = 1.0;             // kink slope
    double amplitude = 0.5;         // sine amplitude
    std::filesystem::path path;     // gridfun file
};

struct ExperimentConfig {
    Experiment experiment = Experiment::solve;
    Params params = Params::make(2.0, 1.0, 4.0);
    SpaceTimeGrid grid;
    DataSpec data;
    std::vector<double> epsilon_sweep;
    double alpha = 0.5;
    std::vector<double> barrier_gaps;
    long long mc_samples = 100000;
    std::filesystem::path output_dir = "out";
};

/// Flat key-value format with [section] headers, '#' comments and
/// whitespace-separated list values; grammar documented in the README.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

struct Options {
    std::uint64_t seed = 20240817ULL;
    int threads = 1;
    std::optional<std::filesystem::path> output_override;
};

/// Runs the configured experiment, writing artifacts under the output
/// directory. Returns 0 when every enabled check passed, 1 otherwise.
int run(const ExperimentConfig& config, const Options& options);

/// One row per recorded check: name, pass/fail, margin. Returns 0, or 2 when
/// the directory holds no reports.
int report_render(const std::filesystem::path& dir, std::ostream& os);

/// Full command-line entry point (flags: --config, --output, --seed,
/// --threads; subcommand `render <dir>`).
int main(int argc, char** argv);

}  // namespace trudinger::cli
