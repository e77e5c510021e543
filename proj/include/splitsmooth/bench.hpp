#pragma once

// Wall-time measurements of whole mADMM solves on the linear tracking scenario.

#include "splitsmooth/pipeline.hpp"

#include <optional>
#include <string>
#include <vector>

namespace splitsmooth {

struct BenchOptions {
    int repeats = 3;
    /// mADMM iterations per solve; early stopping is off so every run does the same work.
    int iterations = 5;
    bool warmup = true;
    /// Dense solvers whose estimated working set exceeds this are skipped.
    double memory_limit_bytes = 2.0e9;
    std::uint64_t seed = 0;
};

struct BenchPoint {
    SolverKind solver = SolverKind::ks_madmm;
    std::size_t T = 0;
    std::vector<double> runs;
    /// Absent when the point was skipped.
    std::optional<double> median_seconds;
    std::string note;
};

/// Rough bytes held by one dense x-step (a handful of (N_x T)^2 matrices).
double dense_memory_estimate(Eigen::Index state_dim, std::size_t T);

BenchPoint benchmark_point(SolverKind solver, std::size_t T, const BenchOptions& opts);

/// Least-squares slope of log(seconds) against log(T) over the measured points.
/// Returns nullopt with fewer than two measured points.
std::optional<double> loglog_slope(const std::vector<BenchPoint>& points);

}  // namespace splitsmooth
