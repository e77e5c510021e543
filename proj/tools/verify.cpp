// Cross-oracle checks packaged for `splitsmooth verify`.

#include "commands.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>

using nlohmann::json;

namespace splitsmooth::cli {

namespace {

struct CheckResult {
    bool pass = true;
    double metric = 0.0;
    std::string detail;
    json replay;  ///< inputs of the first failing case
};

struct Check {
    const char* name;
    double tolerance;
    std::function<CheckResult(std::uint64_t)> run;
};

Mat gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

Mat spd(std::mt19937_64& rng, Eigen::Index n) {
    const Mat M = gaussian(rng, n, n);
    return symmetrize(M * M.transpose() / static_cast<double>(n) + 0.2 * Mat::Identity(n, n));
}

AffineModel random_system(std::mt19937_64& rng, std::size_t T, Eigen::Index nx, Eigen::Index ny) {
    Mat A = gaussian(rng, nx, nx);
    A /= std::max(1.0, 1.2 * A.norm() / std::sqrt(static_cast<double>(nx)));
    return AffineModel(T, StepSeries<Mat>(A), StepSeries<Vec>(Vec(gaussian(rng, nx, 1, 0.1))),
                       StepSeries<Mat>(gaussian(rng, ny, nx)), StepSeries<Vec>(Vec(gaussian(rng, ny, 1, 0.1))),
                       StepSeries<Mat>(spd(rng, nx)), StepSeries<Mat>(spd(rng, ny)), gaussian(rng, nx, 1), spd(rng, nx));
}

Trajectory measurements_of(std::mt19937_64& rng, const AffineModel& m) {
    const auto T = static_cast<Eigen::Index>(m.horizon());
    Trajectory x(m.state_dim(), T), y(m.meas_dim(), T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto s = static_cast<std::size_t>(t);
        x.col(t) = t == 0 ? m.m1() : Vec(m.A(s) * x.col(t - 1) + m.b(s));
        x.col(t) += m.Q_factor(s).matrixL() * gaussian(rng, m.state_dim(), 1);
        y.col(t) = m.H(s) * x.col(t) + m.e(s) + m.R_factor(s).matrixL() * gaussian(rng, m.meas_dim(), 1);
    }
    return y;
}

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

double rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

CheckResult ks_vs_batch(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> uT(2, 40), unx(1, 5), uny(1, 3);
    CheckResult r;
    for (int rep = 0; rep < 20; ++rep) {
        const auto T = static_cast<std::size_t>(uT(rng));
        const Eigen::Index nx = unx(rng), ny = uny(rng);
        const AffineModel m = random_system(rng, T, nx, ny);
        const auto mode = rep % 2 ? SparsityMode::process_noise : SparsityMode::state;
        const TrackingProblem p(m, GroupRegularizer::none(nx, mode), measurements_of(rng, m));
        const auto Ti = static_cast<Eigen::Index>(T);
        const Trajectory v = gaussian(rng, nx, Ti), eb = gaussian(rng, nx, Ti);
        const Trajectory ks = augmented_ks(fuse_model(m, resolve_target(p, nullptr), v, eb, 1.0), p.measurements());
        const double d = rel(ks, batch_x_affine(stack_problem(p, v, eb, 1.0), 1.0));
        if (d > r.metric) r.metric = d;
        if (d > 1e-8 && r.pass) {
            r.pass = false;
            r.replay = {{"case", rep}, {"T", T}, {"nx", nx}, {"ny", ny}, {"mode", to_string(mode)}};
        }
    }
    r.detail = "20 random systems";
    return r;
}

CheckResult ieks_vs_batch(std::uint64_t seed) {
    auto params = default_params(ScenarioKind::range);
    params.T = 20;
    params.seed = seed;
    auto sc = simulate_range(params);
    const TrackingProblem p(sc.model, make_regularizer(RegularizerKind::group, 4, {{2, 3}}, {1.0}),
                            sc.data.measurements);
    std::mt19937_64 rng(seed + 1);
    const Trajectory x0 = *sc.data.truth + gaussian(rng, 4, 20, 0.1);
    const Trajectory v = constraint_lhs(p, *sc.data.truth) + gaussian(rng, 4, 20, 0.05);
    const Trajectory eb = gaussian(rng, 4, 20, 0.05);
    LMConfig cfg;
    cfg.step_floor = 0.0;
    IeksOptions io;
    io.tolerance = 0.0;
    const auto gn = gn_ieks(p, v, eb, 1.0, x0, io);
    const auto gnb = batch_nonlinear_solve(p, v, eb, 1.0, NonlinearMethod::gn, cfg, x0);
    const auto lm = lm_ieks(p, v, eb, 1.0, x0, cfg, io);
    const auto lmb = batch_nonlinear_solve(p, v, eb, 1.0, NonlinearMethod::lm, cfg, x0);
    CheckResult r;
    for (const auto* pair : {&gn, &lm}) {
        const auto& bat = pair == &gn ? gnb : lmb;
        if (pair->proposals.size() != bat.proposals.size()) {
            r.pass = false;
            r.metric = 1.0;
        }
        for (std::size_t i = 0; i < std::min(pair->proposals.size(), bat.proposals.size()); ++i) {
            r.metric = std::max(r.metric, rel(pair->proposals[i], bat.proposals[i]));
        }
    }
    r.pass = r.pass && r.metric <= 1e-7;
    if (!r.pass) r.replay = {{"scenario", "range"}, {"T", 20}, {"seed", seed}};
    r.detail = "GN and LM inner iterates, range T=20";
    return r;
}

Vec grid_prox(const Vec& z, double kappa) {
    auto f = [&](double a, double b) {
        return kappa * std::hypot(a, b) + 0.5 * ((a - z[0]) * (a - z[0]) + (b - z[1]) * (b - z[1]));
    };
    double ca = 0.0, cb = 0.0, half = z.norm() + 1.0;
    for (int level = 0; level < 6; ++level) {
        double best = f(ca, cb), ba = ca, bb = cb;
        for (int i = -60; i <= 60; ++i) {
            for (int j = -60; j <= 60; ++j) {
                const double a = ca + half * i / 60, b = cb + half * j / 60;
                if (f(a, b) < best) {
                    best = f(a, b);
                    ba = a;
                    bb = b;
                }
            }
        }
        if (f(0.0, 0.0) <= best) ba = bb = 0.0;
        ca = ba;
        cb = bb;
        half /= 10.0;
    }
    return (Vec(2) << ca, cb).finished();
}

CheckResult shrink_vs_grid(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uz(-3.0, 3.0), uk(0.0, 2.0);
    CheckResult r;
    for (int rep = 0; rep < 50; ++rep) {
        const Vec z = (Vec(2) << uz(rng), uz(rng)).finished();
        const double kappa = uk(rng);
        const double d = (block_shrink(z, kappa) - grid_prox(z, kappa)).cwiseAbs().maxCoeff();
        r.metric = std::max(r.metric, d);
        if (d > 1e-3 && r.pass) {
            r.pass = false;
            r.replay = {{"z", {z[0], z[1]}}, {"kappa", kappa}};
        }
    }
    r.detail = "50 random points";
    return r;
}

Mat central_difference(const std::function<Vec(const Vec&)>& f, const Vec& x) {
    const Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

CheckResult jacobians(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const auto ct = coordinated_turn_model(default_params(ScenarioKind::coordinated_turn));
    const auto range = range_model(default_params(ScenarioKind::range));
    CheckResult r;
    auto check = [&](const char* which, const Mat& J, const Mat& fd, const Vec& x) {
        const double d = (J - fd).norm() / std::max(1.0, fd.norm());
        r.metric = std::max(r.metric, d);
        if (d > 1e-5 && r.pass) {
            r.pass = false;
            r.replay = {{"jacobian", which}, {"x", matrix_json(x.transpose())}};
        }
    };
    for (int rep = 0; rep < 100; ++rep) {
        Vec x(5);
        for (auto& c : x) c = u(rng);
        if (rep % 4 == 0) x[4] *= 1e-9;
        check("ct transition", ct.transition_jacobian(x, 1),
              central_difference([&](const Vec& z) { return ct.transition(z, 1); }, x), x);
        check("ct measurement", ct.measurement_jacobian(x, 1),
              central_difference([&](const Vec& z) { return ct.measurement(z, 1); }, x), x);
        const Vec xr = x.head(4);
        check("range measurement", range.measurement_jacobian(xr, 1),
              central_difference([&](const Vec& z) { return range.measurement(z, 1); }, xr), xr);
    }
    r.detail = "range and coordinated-turn, 100 states";
    return r;
}

TrackingProblem wiener_problem(std::uint64_t seed) {
    auto params = default_params(ScenarioKind::wiener);
    params.T = 50;
    params.seed = seed;
    const auto sc = simulate_wiener(params);
    return TrackingProblem(*sc.model, make_regularizer(RegularizerKind::l2, 4, {}, {1.0}), sc.data.measurements);
}

CheckResult lemma1(std::uint64_t seed) {
    const TrackingProblem p = wiener_problem(seed);
    const XSolver xs = make_x_solver({});
    MadmmOptions ref;
    ref.max_iterations = 20000;
    ref.eps_pri = ref.eps_dual = 1e-12;
    ref.record_objective = ref.record_lagrangian = false;
    const SplitState star = run_madmm(p, xs, ref).state;
    MadmmOptions one = ref;
    one.max_iterations = 1;
    one.early_stop = false;
    SplitState s = initial_state(p, xs);
    CheckResult r;
    for (int k = 0; k < 50; ++k) {
        SplitState n = run_madmm(p, xs, one, s).state;
        const auto gap = lemma1_gap(s, n, star, one.gamma, p.regularizer());
        const double excess = (gap.lhs - gap.rhs) / std::max(1.0, gap.distance_k);
        r.metric = std::max(r.metric, excess);
        if (excess > 1e-9 && r.pass) {
            r.pass = false;
            r.replay = {{"scenario", "wiener"}, {"T", 50}, {"seed", seed}, {"iteration", k + 1}};
        }
        s = std::move(n);
    }
    r.detail = "contraction inequality over 50 KS-mADMM iterations";
    return r;
}

CheckResult lemma2(std::uint64_t seed, bool fault) {
    const TrackingProblem p = wiener_problem(seed);
    SolverSettings settings;
    if (fault) {
        // a wrong transition makes the x-step miss its minimiser
        settings.ieks.fused_hook = [](FusedModel& f) {
            std::vector<Mat> A = f.A.values();
            for (auto& a : A) a *= 1.2;
            f.A = StepSeries<Mat>(std::move(A));
        };
    }
    const XSolver xs = make_x_solver(settings);
    MadmmOptions opts;
    opts.gamma = 10.0;
    opts.early_stop = false;
    const SplitState s0 = initial_state(p, xs);
    const auto rep = run_madmm(p, xs, opts, s0);
    std::vector<double> L{augmented_lagrangian(p, s0, opts.gamma)};
    L.insert(L.end(), rep.lagrangian.begin(), rep.lagrangian.end());
    CheckResult r;
    for (std::size_t k = 1; k < L.size(); ++k) {
        const double rise = (L[k] - L[k - 1]) / std::max(1.0, std::abs(L[k - 1]));
        r.metric = std::max(r.metric, rise);
        if (rise > 1e-9 && r.pass) {
            r.pass = false;
            r.replay = {{"scenario", "wiener"}, {"T", 50}, {"seed", seed}, {"gamma", opts.gamma},
                        {"iteration", k}, {"fault", fault}};
        }
    }
    r.detail = "augmented Lagrangian over 50 KS-mADMM iterations, gamma 10";
    return r;
}

}  // namespace

int cmd_verify(const VerifyOptions& opts, std::ostream& log, std::ostream& err) {
    const std::vector<Check> checks{
        {"ks_vs_batch", 1e-8, ks_vs_batch},
        {"ieks_vs_batch", 1e-7, ieks_vs_batch},
        {"shrink_vs_grid", 1e-3, shrink_vs_grid},
        {"jacobians_vs_fd", 1e-5, jacobians},
        {"lemma1_contraction", 1e-9, lemma1},
        {"lemma2_monotone", 1e-9, [&](std::uint64_t s) { return lemma2(s, opts.inject_fault); }},
    };
    json failures = json::array();
    auto short_num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return std::string(buf);
    };
    log << std::left << std::setw(22) << "check" << std::setw(8) << "result" << std::setw(12) << "metric"
        << std::setw(10) << "tol" << "detail\n";
    for (const auto& c : checks) {
        CheckResult r;
        try {
            r = c.run(opts.seed);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
            r.replay = json::object();
        }
        log << std::setw(22) << c.name << std::setw(8) << (r.pass ? "pass" : "FAIL") << std::setw(12)
            << short_num(r.metric) << std::setw(10) << short_num(c.tolerance) << r.detail << "\n";
        if (!r.pass) {
            r.replay["check"] = c.name;
            r.replay["verify_seed"] = opts.seed;
            failures.push_back(r.replay);
        }
    }
    if (failures.empty()) return kExitOk;
    for (const auto& f : failures) err << "replay: " << f.dump() << "\n";
    if (!opts.out.empty()) {
        const std::filesystem::path path(opts.out);
        std::error_code ec;
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
        std::ofstream f(path, std::ios::binary);
        if (!f) err << "error: cannot write " << opts.out << "\n";
        for (const auto& x : failures) f << x.dump() << "\n";
    }
    return kExitVerify;
}

}  // namespace splitsmooth::cli
