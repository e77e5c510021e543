#pragma once

#include "splitsmooth/model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace splitsmooth {

enum class ScenarioKind { wiener, range, coordinated_turn };

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

struct ScenarioParams {
    ScenarioKind kind = ScenarioKind::wiener;
    double dt = 0.1;
    double qc = 0.5;
    double sigma = 0.3;
    std::size_t T = 100;
    /// Probability that a step's process noise is exactly zero (wiener).
    double p0 = 0.8;
    std::uint64_t seed = 0;

    Vec m1;  ///< empty: scenario default
    Mat P1;  ///< empty: scenario default

    // range
    std::vector<std::array<double, 2>> sensors;
    /// Target fraction of steps spent stopped.
    double stop_fraction = 0.4;

    // coordinated turn
    double turn_rate_noise = 0.01;

    void validate() const;
};

/// §VI-A defaults (wiener), §VI-B defaults (range) or a coordinated-turn track.
ScenarioParams default_params(ScenarioKind kind);
/// Vessel-like wiener track: dt = 1, qc = 1, m1 = (0.1, 0.1, 0, 0), P1 = 100 I.
ScenarioParams vessel_params();

struct TrackDataset {
    std::optional<Trajectory> truth;
    Trajectory measurements;
    std::vector<double> timestamps;
    std::vector<std::string> warnings;
    /// Indices t where the spacing timestamps[t] - timestamps[t - 1] exceeds 1.5x the median.
    std::vector<std::size_t> gaps;

    std::size_t horizon() const noexcept { return static_cast<std::size_t>(measurements.cols()); }
};

/// Wiener-velocity model matrices with state (x, y, vx, vy).
Mat wiener_transition(double dt);
Mat wiener_covariance(double dt, double qc);

/// Model of a wiener scenario; needs qc > 0 and sigma > 0.
AffineModel wiener_model(const ScenarioParams& params);

struct WienerScenario {
    TrackDataset data;
    /// Absent when qc or sigma is zero (covariances not positive definite).
    std::optional<AffineModel> model;
};
WienerScenario simulate_wiener(const ScenarioParams& params);

/// Below this range the range Jacobian denominator is clamped.
inline constexpr double kRangeClamp = 1e-9;

Vec range_measurement(const Vec& x, const std::vector<std::array<double, 2>>& sensors);
Mat range_jacobian(const Vec& x, const std::vector<std::array<double, 2>>& sensors);
NonlinearModel range_model(const ScenarioParams& params);

struct RangeScenario {
    TrackDataset data;
    NonlinearModel model;
};
RangeScenario simulate_range(const ScenarioParams& params);

/// State (x, y, vx, vy, omega).
Vec ct_transition(const Vec& x, double dt);
Mat ct_jacobian(const Vec& x, double dt);
NonlinearModel coordinated_turn_model(const ScenarioParams& params);

struct TurnScenario {
    TrackDataset data;
    NonlinearModel model;
};
TurnScenario simulate_coordinated_turn(const ScenarioParams& params);

double relative_error(const Trajectory& estimate, const Trajectory& truth);

struct CsvSchema {
    std::string time_column = "t";
    std::vector<std::string> value_columns{"x", "y"};
    char delimiter = ',';
};

/// Header row required. Rows are sorted by timestamp (with a warning when they
/// were not); repeated timestamps are an error.
TrackDataset load_track_csv(const std::string& path, const CsvSchema& schema = {});

}  // namespace splitsmooth
