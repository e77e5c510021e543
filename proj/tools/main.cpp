#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>

using namespace splitsmooth::cli;

namespace {

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size() || v < 0 || v != std::floor(v)) throw CLI::ValidationError("--T", "bad value " + item);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

void add_run_flags(CLI::App* cmd, RunConfig& cfg, bool solve_flags) {
    cmd->add_option("--scenario", cfg.scenario, "wiener | range | coordinated_turn");
    cmd->add_option("-T,--T", cfg.T, "horizon override");
    cmd->add_option("--p0", cfg.p0, "probability of a zero process-noise step (wiener)");
    cmd->add_option("--seed", cfg.seed);
    cmd->add_option("--out", cfg.out, "output directory");
    // read before parsing by expand_config(); declared here for --help
    static std::string config_path;
    cmd->add_option("--config", config_path, "key = value file, e.g. a simulate config.ini; flags override it");
    if (!solve_flags) return;
    cmd->add_option("--input", cfg.input, "track CSV instead of a simulated scenario");
    cmd->add_option("--time-column", cfg.time_column);
    cmd->add_option("--columns", cfg.value_columns, "measurement columns")->delimiter(',');
    cmd->add_option("--solver", cfg.solver, "ks_madmm | gn_ieks_madmm | lm_ieks_madmm | batch_madmm");
    cmd->add_option("--regularizer", cfg.regularizer, "l2 | lasso | iso_tv | aniso_tv | fused | group | sparse_group");
    cmd->add_option("--groups", cfg.groups, "zero-based state indices, e.g. \"2,3;4\"");
    cmd->add_option("--mu", cfg.mu, "one weight, or one per group")->delimiter(',');
    cmd->add_option("--sparsity", cfg.sparsity, "state | process_noise");
    cmd->add_option("--gamma", cfg.gamma);
    cmd->add_option("--kmax", cfg.kmax, "mADMM iterations");
    cmd->add_option("--imax", cfg.imax, "inner IEKS iterations");
    cmd->add_option("--lambda0", cfg.lambda0);
    cmd->add_option("--alpha", cfg.alpha);
    cmd->add_option("--runs", cfg.runs, "Monte-Carlo seeds seed, seed+1, ...");
    cmd->add_option("--jobs", cfg.jobs, "worker threads for --runs");
}

/// Splices the entries of `--config FILE` into argv right after the
/// subcommand name. Keys also given as flags, and keys the subcommand does not
/// know, are dropped so that a simulate config.ini can seed a solve run.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
    for (std::size_t i = 1; i < args.size(); ++i) {
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands({})) {
            if (s->get_name() == args[i]) sub = s;
        }
        if (!sub) continue;
        std::string path;
        std::size_t at = 0, width = 0;
        for (std::size_t j = i + 1; j < args.size(); ++j) {
            if (args[j] == "--config" && j + 1 < args.size()) {
                path = args[j + 1], at = j, width = 2;
            } else if (args[j].rfind("--config=", 0) == 0) {
                path = args[j].substr(9), at = j, width = 1;
            }
        }
        if (path.empty()) return args;
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(at), args.begin() + static_cast<std::ptrdiff_t>(at + width));
        std::vector<std::string> extra;
        for (const auto& [key, value] : read_config_file(path)) {
            const std::string flag = "--" + key;
            const auto* opt = sub->get_option_no_throw(flag);
            if (!opt) continue;
            const bool given = std::any_of(args.begin() + static_cast<std::ptrdiff_t>(i) + 1, args.end(), [&](const std::string& a) {
                if (a.rfind("--", 0) == 0) return opt->check_lname(a.substr(2, a.find('=') - 2));
                return a.size() >= 2 && a[0] == '-' && opt->check_sname(a.substr(1, 1));
            });
            if (given) continue;
            extra.push_back(flag);
            extra.push_back(value);
        }
        args.insert(args.begin() + static_cast<std::ptrdiff_t>(i) + 1, extra.begin(), extra.end());
        return args;
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparsity-regularised state estimation by split smoothing"};
    app.set_version_flag("--version", splitsmooth::kVersion);
    app.require_subcommand(1);

    RunConfig sim_cfg;
    auto* sim = app.add_subcommand("simulate", "write a simulated scenario to CSV");
    add_run_flags(sim, sim_cfg, false);

    RunConfig solve_cfg;
    auto* sol = app.add_subcommand("solve", "run a solver and write a report");
    add_run_flags(sol, solve_cfg, true);

    VerifyOptions vopts;
    auto* ver = app.add_subcommand("verify", "cross-check the solvers against their oracles");
    ver->add_option("--seed", vopts.seed);
    ver->add_option("--out", vopts.out, "replay file for failing cases");
    ver->add_flag("--inject-fault", vopts.inject_fault, "test hook: corrupt the fused transition");

    BenchmarkConfig bcfg;
    std::string T_list;
    auto* ben = app.add_subcommand("benchmark", "time solvers over horizons");
    ben->add_option("--T", T_list, "comma-separated horizons, e.g. 1e3,1e4");
    ben->add_option("--solver", bcfg.solvers, "solvers to time")->delimiter(',');
    ben->add_option("--repeats", bcfg.repeats);
    ben->add_option("--kmax", bcfg.iterations, "mADMM iterations per timed solve");
    ben->add_option("--memory-limit", bcfg.memory_limit_gb, "GB; larger dense runs are skipped");
    ben->add_option("--seed", bcfg.seed);
    ben->add_option("--out", bcfg.out, "output prefix");

    try {
        std::vector<std::string> args(argv, argv + argc);
        args = expand_config(app, std::move(args));
        args.erase(args.begin());
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
        if (!T_list.empty()) bcfg.T = parse_sizes(T_list);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    if (*sim) return cmd_simulate(sim_cfg, std::cout, std::cerr);
    if (*sol) return cmd_solve(solve_cfg, std::cout, std::cerr);
    if (*ver) return cmd_verify(vopts, std::cout, std::cerr);
    return cmd_benchmark(bcfg, std::cout, std::cerr);
}
