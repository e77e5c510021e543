#pragma once

#include "run_config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace splitsmooth::cli {

/// Each command returns a process exit code and reports errors on `err`.

/// Writes truth.csv (when known), measurements.csv and config.ini under cfg.out.
int cmd_simulate(const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// Solves and writes report.jsonl, estimate.csv and sparsity.csv under cfg.out
/// (one subdirectory per seed when runs > 1).
int cmd_solve(const RunConfig& cfg, std::ostream& log, std::ostream& err);

struct VerifyOptions {
    std::uint64_t seed = 0;
    /// Test hook: perturbs the fused transition inside the Lemma-2 check.
    bool inject_fault = false;
    std::string out;  ///< replay file for failing cases; empty: print only
};
int cmd_verify(const VerifyOptions& opts, std::ostream& log, std::ostream& err);

struct BenchmarkConfig {
    std::vector<std::size_t> T{1000, 10000, 100000};
    std::vector<std::string> solvers{"ks_madmm", "batch_madmm"};
    int repeats = 3;
    int iterations = 5;
    double memory_limit_gb = 2.0;
    std::uint64_t seed = 0;
    std::string out = "benchmark";
};
/// Writes <out>.csv (one row per solver and T) and <out>.jsonl (slopes).
int cmd_benchmark(const BenchmarkConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace splitsmooth::cli
