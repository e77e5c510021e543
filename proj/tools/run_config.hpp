#pragma once

#include "splitsmooth/pipeline.hpp"
#include "splitsmooth/scenarios.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace splitsmooth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerify = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitUsage = 64;

/// Everything a command needs. Fields left at "auto" / unset are filled from
/// the scenario defaults by resolve().
struct RunConfig {
    std::string scenario;  ///< wiener | range | coordinated_turn
    std::string input;     ///< track CSV; exclusive with scenario
    std::string time_column = "t";
    std::vector<std::string> value_columns{"x", "y"};

    std::string solver = "auto";
    std::string regularizer = "auto";
    std::string groups;  ///< "2,3;4": zero-based state indices, groups separated by ';'
    std::vector<double> mu{1.0};
    std::string sparsity = "auto";
    std::optional<double> gamma;
    std::optional<int> kmax;
    int imax = 5;
    double lambda0 = 1e-2;
    double alpha = 10.0;

    std::uint64_t seed = 0;
    std::optional<std::size_t> T;
    std::optional<double> p0;
    int runs = 1;
    int jobs = 1;
    std::string out = "out";
};

/// Fills scenario-dependent defaults and checks the invariants (one data
/// source, known names). Throws InvalidArgument.
RunConfig resolve(RunConfig cfg);

/// Flat key/value echo of a resolved config, in flag order.
std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg);

/// Reads the `key = "value"` file written by describe(). Blank lines, '#' and
/// ';' comments and [section] headers are skipped. Throws InvalidArgument.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

std::vector<std::vector<Eigen::Index>> parse_groups(const std::string& text);

ScenarioParams scenario_params(const RunConfig& cfg, std::uint64_t seed);

/// A dataset and the problem built on it.
struct Prepared {
    TrackDataset data;
    std::optional<TrackingProblem> problem;
};

/// Simulates (or loads) the data and builds the regularised problem.
Prepared prepare(const RunConfig& cfg, std::uint64_t seed);

SolverSettings solver_settings(const RunConfig& cfg);
MadmmOptions madmm_options(const RunConfig& cfg);

}  // namespace splitsmooth::cli
