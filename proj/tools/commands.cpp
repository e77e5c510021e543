#include "commands.hpp"

#include "splitsmooth/bench.hpp"
#include "splitsmooth/csv.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace splitsmooth::cli {

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

void write_trajectory(const fs::path& path, const std::vector<double>& ts, const Trajectory& x, const char* prefix) {
    auto f = open_out(path);
    std::vector<std::string> row{"t"};
    for (Eigen::Index i = 0; i < x.rows(); ++i) row.push_back(prefix + std::to_string(i + 1));
    csv::write_row(f, row);
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
        row.assign(1, csv::format_number(ts.empty() ? static_cast<double>(t) : ts[static_cast<std::size_t>(t)]));
        for (Eigen::Index i = 0; i < x.rows(); ++i) row.push_back(csv::format_number(x(i, t)));
        csv::write_row(f, row);
    }
}

void write_config(const fs::path& path, const RunConfig& cfg) {
    auto f = open_out(path);
    for (const auto& [k, v] : describe(cfg)) f << k << " = \"" << v << "\"\n";
}

json config_json(const RunConfig& cfg) {
    json c = json::object();
    for (const auto& [k, v] : describe(cfg)) c[k] = v;
    return c;
}

/// Maps library exceptions onto exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

struct SeedResult {
    std::uint64_t seed = 0;
    int code = kExitOk;
    std::string message;
    std::string summary;
};

SeedResult solve_one(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir) {
    SeedResult r;
    r.seed = seed;
    std::ostringstream err;
    r.code = guarded(err, [&] {
        const auto prep = prepare(cfg, seed);
        if (!prep.problem) throw InvalidArgument("scenario has no model (qc or sigma is zero); nothing to solve");
        const TrackingProblem& problem = *prep.problem;
        const auto settings = solver_settings(cfg);
        check_compatible(settings, problem);
        const auto opts = madmm_options(cfg);

        const auto t0 = std::chrono::steady_clock::now();
        const Trajectory plain = plain_smoother(problem, settings);
        const auto rep = solve(problem, settings, opts);
        const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double final_objective = rep.objective.empty() ? objective(problem, rep.x) : rep.objective.back();
        if (!rep.x.allFinite() || !std::isfinite(final_objective))
            throw SolverError("estimate or objective is not finite; check the data scale", rep.iterations);

        auto f = open_out(dir / "report.jsonl");
        json head{{"type", "config"}, {"version", kVersion}, {"seed", seed}, {"config", config_json(cfg)}};
        f << head.dump() << "\n";
        json ds{{"type", "dataset"},
                {"T", problem.horizon()},
                {"state_dim", problem.state_dim()},
                {"meas_dim", problem.meas_dim()},
                {"warnings", prep.data.warnings},
                {"gaps", prep.data.gaps}};
        f << ds.dump() << "\n";
        for (std::size_t k = 0; k < static_cast<std::size_t>(rep.iterations); ++k) {
            json it{{"type", "iteration"},
                    {"k", k + 1},
                    {"objective", rep.objective[k]},
                    {"lagrangian", rep.lagrangian[k]},
                    {"primal_residual", rep.primal_residual[k]},
                    {"dual_residual", rep.dual_residual[k]},
                    {"seconds", rep.seconds[k]}};
            f << it.dump() << "\n";
        }
        json sum{{"type", "summary"},
                 {"iterations", rep.iterations},
                 {"converged", rep.converged},
                 {"objective", final_objective},
                 {"plain_objective", objective(problem, plain)},
                 {"zero_groups", rep.zero_groups.count()},
                 {"group_steps", rep.zero_groups.size()},
                 {"seconds", total}};
        if (prep.data.truth) {
            sum["relative_error"] = relative_error(rep.x, *prep.data.truth);
            sum["plain_relative_error"] = relative_error(plain, *prep.data.truth);
        }
        f << sum.dump() << "\n";

        write_trajectory(dir / "estimate.csv", prep.data.timestamps, rep.x, "x");
        Trajectory zeros = rep.zero_groups.cast<double>();
        write_trajectory(dir / "sparsity.csv", prep.data.timestamps, zeros, "zero_g");

        std::ostringstream line;
        line << "seed " << seed << ": " << rep.iterations << " iterations, "
             << (rep.converged ? "converged" : "not converged") << ", objective "
             << csv::format_number(sum["objective"].get<double>());
        if (prep.data.truth) line << ", x_err " << csv::format_number(sum["relative_error"].get<double>());
        r.summary = line.str();
        return kExitOk;
    });
    r.message = err.str();
    return r;
}

}  // namespace

int cmd_simulate(const RunConfig& raw, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        if (!raw.input.empty()) throw InvalidArgument("simulate needs --scenario, not --input");
        const RunConfig cfg = resolve(raw);
        const auto prep = prepare(cfg, cfg.seed);
        const fs::path dir(cfg.out);
        if (prep.data.truth) write_trajectory(dir / "truth.csv", prep.data.timestamps, *prep.data.truth, "x");
        write_trajectory(dir / "measurements.csv", prep.data.timestamps, prep.data.measurements, "y");
        write_config(dir / "config.ini", cfg);
        log << "wrote " << prep.data.horizon() << " steps to " << dir.string() << "\n";
        return kExitOk;
    });
}

int cmd_solve(const RunConfig& raw, std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    if (const int code = guarded(err, [&] {
            cfg = resolve(raw);
            if (!cfg.input.empty() && cfg.runs > 1) throw InvalidArgument("--runs needs a simulated scenario");
            return kExitOk;
        })) {
        return code;
    }
    std::vector<SeedResult> results(static_cast<std::size_t>(cfg.runs));
    auto dir_for = [&](std::size_t i) {
        return cfg.runs == 1 ? fs::path(cfg.out) : fs::path(cfg.out) / ("seed_" + std::to_string(cfg.seed + i));
    };
    // workers only read cfg and write their own slot
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < results.size(); i = next++) results[i] = solve_one(cfg, cfg.seed + i, dir_for(i));
    };
    const int n = std::min(cfg.jobs, cfg.runs);
    std::vector<std::thread> pool;
    for (int j = 1; j < n; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int code = kExitOk;
    for (const auto& r : results) {
        if (r.code == kExitOk) {
            log << r.summary << "\n";
        } else {
            err << "seed " << r.seed << ": " << r.message;
            code = std::max(code, r.code);
        }
    }
    return code;
}

int cmd_benchmark(const BenchmarkConfig& cfg, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        if (cfg.T.empty() || cfg.solvers.empty()) throw InvalidArgument("need at least one T and one solver");
        for (auto T : cfg.T) {
            if (T < 10) throw InvalidArgument("T values must be at least 10");
        }
        if (cfg.repeats < 3) throw InvalidArgument("repeats must be at least 3");
        std::vector<SolverKind> kinds;
        for (const auto& s : cfg.solvers) kinds.push_back(parse_solver_kind(s));

        BenchOptions bo;
        bo.repeats = cfg.repeats;
        bo.iterations = cfg.iterations;
        bo.memory_limit_bytes = cfg.memory_limit_gb * 1e9;
        bo.seed = cfg.seed;

        auto table = open_out(cfg.out + ".csv");
        auto slopes = open_out(cfg.out + ".jsonl");
        csv::write_row(table, {"solver", "T", "median_seconds", "runs", "status"});
        slopes << json{{"type", "config"},
                       {"version", kVersion},
                       {"seed", cfg.seed},
                       {"repeats", cfg.repeats},
                       {"iterations", cfg.iterations},
                       {"memory_limit_gb", cfg.memory_limit_gb}}
                      .dump()
               << "\n";
        for (const auto kind : kinds) {
            std::vector<BenchPoint> pts;
            for (const auto T : cfg.T) {
                auto p = benchmark_point(kind, T, bo);
                std::string runs;
                for (std::size_t i = 0; i < p.runs.size(); ++i) runs += (i ? ";" : "") + csv::format_number(p.runs[i]);
                const std::string status = p.median_seconds ? "ok" : "skipped";
                csv::write_row(table, {to_string(kind), std::to_string(T),
                                       p.median_seconds ? csv::format_number(*p.median_seconds) : "", runs,
                                       p.median_seconds ? status : status + " (" + p.note + ")"});
                log << to_string(kind) << "  T=" << T << "  "
                    << (p.median_seconds ? csv::format_number(*p.median_seconds) + " s" : "skipped") << "\n";
                pts.push_back(std::move(p));
            }
            const auto slope = loglog_slope(pts);
            json line{{"type", "slope"}, {"solver", to_string(kind)}};
            line["slope"] = slope ? json(*slope) : json(nullptr);
            slopes << line.dump() << "\n";
            log << to_string(kind) << "  log-log slope " << (slope ? csv::format_number(*slope) : "n/a") << "\n";
        }
        return kExitOk;
    });
}

}  // namespace splitsmooth::cli
