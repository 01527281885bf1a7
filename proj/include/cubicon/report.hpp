#ifndef CUBICON_REPORT_HPP
#define CUBICON_REPORT_HPP

#include "cubicon/analysis.hpp"
#include "cubicon/config.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cubicon {

struct RunResult {
    std::string command; // "analyze" | "sweep"
    RunConfig config;
    FamilyVerdict verdict;
    std::string verdict_json;      // schema v1, deterministic
    std::string sweep_csv;
    std::string diam_svg;
    std::vector<std::pair<std::string, std::string>> cell_plots; // (filename, svg)
};

// Single-lambda pipeline (requires exactly one lambda value).
RunResult run_analyze(const RunConfig& cfg);
// Family sweep (requires at least two lambda values).
RunResult run_sweep(const RunConfig& cfg);

std::string render_verdict_json(const RunResult& run);
std::string render_sweep_csv(const FamilyVerdict& v);
std::string render_diameter_svg(const FamilyVerdict& v);
// 2-D cell plot of the continued attractor and separating set at one lambda.
std::string render_cells_svg(const RunConfig& cfg, const LambdaReport& rep);

} // namespace cubicon

#endif
