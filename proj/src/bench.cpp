#include "splitsmooth/bench.hpp"

#include "splitsmooth/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>

namespace splitsmooth {

double dense_memory_estimate(Eigen::Index state_dim, std::size_t T) {
    const double n = static_cast<double>(state_dim) * static_cast<double>(T);
    return 8.0 * 8.0 * n * n;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

BenchPoint benchmark_point(SolverKind solver, std::size_t T, const BenchOptions& opts) {
    if (T < 10) throw InvalidArgument("benchmark horizons must be at least 10");
    if (opts.repeats < 1 || opts.iterations < 1) throw InvalidArgument("repeats and iterations must be positive");
    BenchPoint point;
    point.solver = solver;
    point.T = T;
    if (solver == SolverKind::batch_madmm && dense_memory_estimate(4, T) > opts.memory_limit_bytes) {
        point.note = "skipped: dense working set over memory limit";
        return point;
    }
    auto params = default_params(ScenarioKind::wiener);
    params.T = T;
    params.seed = opts.seed;
    const auto sc = simulate_wiener(params);
    const TrackingProblem problem(*sc.model, make_regularizer(RegularizerKind::l2, 4, {}, {1.0}, SparsityMode::process_noise),
                                  sc.data.measurements);
    SolverSettings settings;
    settings.kind = solver;
    MadmmOptions mo;
    mo.max_iterations = opts.iterations;
    mo.early_stop = false;
    mo.record_objective = false;
    mo.record_lagrangian = false;
    try {
        if (opts.warmup) solve(problem, settings, mo);
        for (int r = 0; r < opts.repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            solve(problem, settings, mo);
            point.runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
    } catch (const std::bad_alloc&) {
        point.runs.clear();
        point.note = "skipped: out of memory";
        return point;
    }
    point.median_seconds = median(point.runs);
    return point;
}

std::optional<double> loglog_slope(const std::vector<BenchPoint>& points) {
    std::vector<double> lx, ly;
    for (const auto& p : points) {
        if (!p.median_seconds || *p.median_seconds <= 0.0) continue;
        lx.push_back(std::log(static_cast<double>(p.T)));
        ly.push_back(std::log(*p.median_seconds));
    }
    if (lx.size() < 2) return std::nullopt;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace splitsmooth
