#ifndef CUBICON_CONFIG_HPP
#define CUBICON_CONFIG_HPP

#include "cubicon/analysis.hpp"
#include "cubicon/dynamics.hpp"
#include "cubicon/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cubicon {

// Run configuration parsed from the flat key-value format:
//
//   # comment
//   [system]
//   builtin = eqn1            # or: file = fields/my_system.txt
//   [domain]
//   lo = -6 -6
//   hi = 6 6
//   divisions = 512 512
//   [lambda]
//   values = 0.5 0.25         # or: min = 0.1 / max = 1 / count = 9
//   [map]
//   tau = 0.5
//   samples_per_axis = 2
//   bloat = 1                 # or: auto
//   escape_radius = auto
//   tolerance = 1e-8
//   [analysis]
//   collar = 2
//   seed = box                # or: global
//   seed_lo = -0.5 -0.5
//   seed_hi = 0.5 0.5
//   refine_separator = 1
//   separator_max_tau = 64
//   separator_sharp_tau = 0
//   separator_tau_factor = 4
//   separator_tolerance = 1e-6
//   attraction_samples = 100
//   attraction_horizon = 80
//   polarity_levels = 3 6 9
//   polarity_horizon = 80
//   [output]
//   dir = out
//   formats = json csv svg
//   threads = 1
struct RunConfig {
    // system
    std::string builtin;                 // "eqn1" | "lorenz" | "" (file)
    std::string file;                    // expression file path
    LorenzParams lorenz;
    std::optional<double> lipschitz_hint;
    // domain
    std::vector<double> lo, hi;
    std::vector<int> divisions;
    // lambda
    std::vector<double> lambda_values;
    // map
    double tau = -1.0;                   // -1 = per-system default
    int samples_per_axis = 2;
    int bloat = 1;
    double escape_radius = 0.0;          // 0 = auto
    double tolerance = 1e-8;
    // analysis
    int collar = 2;
    std::string seed = "";               // "global" | "box" | "" (per-system default)
    std::vector<double> seed_lo, seed_hi;
    bool refine_separator = true;
    double separator_max_tau = -1.0;     // -1 = 128 * tau
    double separator_tau_factor = 4.0;
    double separator_tolerance = 1e-6;
    double separator_sharp_tau = 0.0;    // 0 = last ladder tau
    int attraction_samples = 100;
    double attraction_horizon = 80.0;
    std::vector<double> polarity_levels;
    double polarity_horizon = 80.0;
    // output
    std::string out_dir = "out";
    bool write_json = true;
    bool write_csv = true;
    bool write_svg = true;
    int threads = 1;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Fills per-system defaults and checks every field; throws ConfigError with
// a message naming the offending key (and axis where applicable).
void validate_config(RunConfig& cfg);

ParametrizedFlow flow_from_config(const RunConfig& cfg);
GridPtr grid_from_config(const RunConfig& cfg);
AnalysisOptions analysis_options_from_config(const RunConfig& cfg);

} // namespace cubicon

#endif
