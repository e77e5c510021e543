#include "run_config.hpp"

#include "splitsmooth/csv.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace splitsmooth::cli {

namespace {

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
    return out;
}

std::string join_numbers(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(csv::format_number(x));
    return join(s, ',');
}

Eigen::Index state_dim_of(const RunConfig& cfg) { return cfg.scenario == "coordinated_turn" ? 5 : 4; }

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read config " + path);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    for (int no = 1; std::getline(f, line); ++no) {
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument(path + ":" + std::to_string(no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) throw InvalidArgument(path + ":" + std::to_string(no) + ": empty key");
        kv.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

std::vector<std::vector<Eigen::Index>> parse_groups(const std::string& text) {
    std::vector<std::vector<Eigen::Index>> groups;
    std::stringstream all(text);
    std::string part;
    while (std::getline(all, part, ';')) {
        std::vector<Eigen::Index> g;
        std::stringstream ps(part);
        std::string item;
        while (std::getline(ps, item, ',')) {
            item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
            if (item.empty()) continue;
            try {
                std::size_t used = 0;
                const long v = std::stol(item, &used);
                if (used != item.size() || v < 0) throw InvalidArgument("");
                g.push_back(static_cast<Eigen::Index>(v));
            } catch (const std::exception&) {
                throw InvalidArgument("bad group index '" + item + "'");
            }
        }
        if (!g.empty()) groups.push_back(std::move(g));
    }
    return groups;
}

RunConfig resolve(RunConfig cfg) {
    if (cfg.scenario.empty() == cfg.input.empty()) {
        throw InvalidArgument("give exactly one of --scenario and --input");
    }
    if (!cfg.scenario.empty()) parse_scenario_kind(cfg.scenario);
    const bool wiener_like = cfg.scenario == "wiener" || !cfg.input.empty();
    const bool ct = cfg.scenario == "coordinated_turn";

    if (cfg.solver == "auto") cfg.solver = wiener_like ? "ks_madmm" : ct ? "gn_ieks_madmm" : "lm_ieks_madmm";
    parse_solver_kind(cfg.solver);
    if (cfg.regularizer == "auto") cfg.regularizer = wiener_like ? "l2" : "group";
    parse_regularizer_kind(cfg.regularizer);
    if (cfg.sparsity == "auto") cfg.sparsity = wiener_like ? "process_noise" : "state";
    if (parse_sparsity_mode(cfg.sparsity) == SparsityMode::custom) {
        throw InvalidArgument("sparsity must be state or process_noise");
    }
    const auto rk = parse_regularizer_kind(cfg.regularizer);
    if ((rk == RegularizerKind::group || rk == RegularizerKind::sparse_group) && cfg.groups.empty()) {
        cfg.groups = ct ? "2,3,4" : "2,3";
    }
    if (!cfg.gamma) cfg.gamma = ct ? 0.1 : 1.0;
    if (!cfg.kmax) cfg.kmax = ct ? 300 : 50;

    if (*cfg.gamma <= 0.0) throw InvalidArgument("gamma must be positive");
    if (*cfg.kmax < 1) throw InvalidArgument("kmax must be at least 1");
    if (cfg.imax < 1) throw InvalidArgument("imax must be at least 1");
    if (cfg.mu.empty()) throw InvalidArgument("mu needs at least one value");
    for (double m : cfg.mu) {
        if (!(m >= 0.0)) throw InvalidArgument("mu must be nonnegative");
    }
    if (cfg.runs < 1) throw InvalidArgument("runs must be at least 1");
    if (cfg.jobs < 1) throw InvalidArgument("jobs must be at least 1");
    if (cfg.p0 && !(*cfg.p0 >= 0.0 && *cfg.p0 <= 1.0)) throw InvalidArgument("p0 must lie in [0, 1]");
    if (cfg.value_columns.empty()) throw InvalidArgument("need at least one value column");
    parse_groups(cfg.groups);
    return cfg;
}

std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> kv;
    if (!cfg.scenario.empty()) kv.emplace_back("scenario", cfg.scenario);
    if (!cfg.input.empty()) {
        kv.emplace_back("input", cfg.input);
        kv.emplace_back("time-column", cfg.time_column);
        kv.emplace_back("columns", join(cfg.value_columns, ','));
    }
    kv.emplace_back("solver", cfg.solver);
    kv.emplace_back("regularizer", cfg.regularizer);
    if (!cfg.groups.empty()) kv.emplace_back("groups", cfg.groups);
    kv.emplace_back("mu", join_numbers(cfg.mu));
    kv.emplace_back("sparsity", cfg.sparsity);
    if (cfg.gamma) kv.emplace_back("gamma", csv::format_number(*cfg.gamma));
    if (cfg.kmax) kv.emplace_back("kmax", std::to_string(*cfg.kmax));
    kv.emplace_back("imax", std::to_string(cfg.imax));
    kv.emplace_back("lambda0", csv::format_number(cfg.lambda0));
    kv.emplace_back("alpha", csv::format_number(cfg.alpha));
    kv.emplace_back("seed", std::to_string(cfg.seed));
    if (cfg.T) kv.emplace_back("T", std::to_string(*cfg.T));
    if (cfg.p0) kv.emplace_back("p0", csv::format_number(*cfg.p0));
    kv.emplace_back("runs", std::to_string(cfg.runs));
    kv.emplace_back("jobs", std::to_string(cfg.jobs));
    kv.emplace_back("out", cfg.out);
    return kv;
}

ScenarioParams scenario_params(const RunConfig& cfg, std::uint64_t seed) {
    auto p = default_params(parse_scenario_kind(cfg.scenario));
    p.seed = seed;
    if (cfg.T) p.T = *cfg.T;
    if (cfg.p0) p.p0 = *cfg.p0;
    p.validate();
    return p;
}

namespace {

double median_spacing(const std::vector<double>& ts) {
    std::vector<double> d;
    for (std::size_t i = 1; i < ts.size(); ++i) d.push_back(ts[i] - ts[i - 1]);
    if (d.empty()) return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    return d[d.size() / 2];
}

}  // namespace

Prepared prepare(const RunConfig& cfg, std::uint64_t seed) {
    const Eigen::Index nx = state_dim_of(cfg);
    const auto reg = make_regularizer(parse_regularizer_kind(cfg.regularizer), nx, parse_groups(cfg.groups), cfg.mu,
                                      parse_sparsity_mode(cfg.sparsity));
    Prepared out;
    if (!cfg.input.empty()) {
        CsvSchema schema;
        schema.time_column = cfg.time_column;
        schema.value_columns = cfg.value_columns;
        out.data = load_track_csv(cfg.input, schema);
        if (out.data.measurements.rows() != 2) throw InvalidArgument("the vessel model needs two position columns");
        auto p = vessel_params();
        p.T = out.data.horizon();
        p.dt = median_spacing(out.data.timestamps);
        out.problem.emplace(wiener_model(p), reg, out.data.measurements);
        return out;
    }
    const auto params = scenario_params(cfg, seed);
    switch (params.kind) {
        case ScenarioKind::wiener: {
            auto sc = simulate_wiener(params);
            out.data = std::move(sc.data);
            if (sc.model) out.problem.emplace(std::move(*sc.model), reg, out.data.measurements);
            break;
        }
        case ScenarioKind::range: {
            auto sc = simulate_range(params);
            out.data = std::move(sc.data);
            out.problem.emplace(std::move(sc.model), reg, out.data.measurements);
            break;
        }
        case ScenarioKind::coordinated_turn: {
            auto sc = simulate_coordinated_turn(params);
            out.data = std::move(sc.data);
            out.problem.emplace(std::move(sc.model), reg, out.data.measurements);
            break;
        }
    }
    return out;
}

SolverSettings solver_settings(const RunConfig& cfg) {
    SolverSettings s;
    s.kind = parse_solver_kind(cfg.solver);
    s.lm.lambda0 = cfg.lambda0;
    s.lm.alpha = cfg.alpha;
    s.lm.max_iterations = cfg.imax;
    s.ieks.max_iterations = cfg.imax;
    return s;
}

MadmmOptions madmm_options(const RunConfig& cfg) {
    MadmmOptions o;
    o.gamma = cfg.gamma.value_or(1.0);
    o.max_iterations = cfg.kmax.value_or(50);
    o.validate();
    return o;
}

}  // namespace splitsmooth::cli
