#include "dense_reference.hpp"
#include "doctest.h"
#include "splitsmooth/batch.hpp"
#include "splitsmooth/scenarios.hpp"
#include "support.hpp"

using namespace splitsmooth;
using namespace testsupport;

namespace {

AffineModel scalar_affine(std::size_t T, double a = 1.0) {
    const Mat one = Mat::Identity(1, 1);
    return AffineModel(T, StepSeries<Mat>(Mat::Constant(1, 1, a)), {}, StepSeries<Mat>(one), {},
                       StepSeries<Mat>(one), StepSeries<Mat>(one), Vec::Zero(1), one);
}

/// h(x) = x^2, no dynamics beyond an (almost) flat prior.
TrackingProblem square_problem(double y) {
    const Mat one = Mat::Identity(1, 1);
    NonlinearModel m(
        1, 1, [](const Vec& x, std::size_t) { return x; }, [one](const Vec&, std::size_t) { return one; },
        [](const Vec& x, std::size_t) { return Vec(x.array().square()); },
        [](const Vec& x, std::size_t) { return Mat(2.0 * x.asDiagonal()); }, StepSeries<Mat>(one),
        StepSeries<Mat>(one), Vec::Zero(1), 1e12 * one);
    return TrackingProblem(std::move(m), GroupRegularizer::none(1), Trajectory::Constant(1, 1, y));
}

struct RangeSub {
    TrackingProblem problem;
    Trajectory v, eta_bar, x0;
};

RangeSub range_subproblem(std::uint64_t seed, std::size_t T = 30) {
    auto params = default_params(ScenarioKind::range);
    params.T = T;
    params.seed = seed;
    auto sc = simulate_range(params);
    const auto reg = make_regularizer(RegularizerKind::group, 4, {{2, 3}}, {1.0});
    TrackingProblem p(std::move(sc.model), reg, sc.data.measurements);
    std::mt19937_64 rng(seed + 100);
    const Trajectory truth = *sc.data.truth;
    Trajectory x0 = truth + random_matrix(rng, 4, static_cast<Eigen::Index>(T), 0.05);
    Trajectory v = constraint_lhs(p, truth) + random_matrix(rng, 4, static_cast<Eigen::Index>(T), 0.05);
    Trajectory eb = random_matrix(rng, 4, static_cast<Eigen::Index>(T), 0.05);
    return {std::move(p), std::move(v), std::move(eb), std::move(x0)};
}

}  // namespace

TEST_CASE("stacked transition pattern") {
    SUBCASE("state mode gives the identity") {
        const TrackingProblem p(scalar_affine(3, 0.9), GroupRegularizer::none(1), Trajectory::Zero(1, 3));
        const auto s = stack_problem(p, Trajectory::Zero(1, 3), Trajectory::Zero(1, 3), 1.0);
        CHECK(s.Phi == Mat::Identity(3, 3));
    }
    SUBCASE("process-noise mode places -B below the diagonal") {
        const auto reg = GroupRegularizer::none(1, SparsityMode::process_noise);
        const TrackingProblem p(scalar_affine(2, 0.9), reg, Trajectory::Zero(1, 2));
        const auto s = stack_problem(p, Trajectory::Zero(1, 2), Trajectory::Zero(1, 2), 1.0);
        Mat expect(2, 2);
        expect << 1.0, 0.0, -0.9, 1.0;
        CHECK(max_abs_diff(s.Phi, expect) == 0.0);
    }
    SUBCASE("block shape") {
        std::mt19937_64 rng(1);
        const AffineModel m = random_affine(rng, 3, 2, 1);
        const TrackingProblem p(m, GroupRegularizer::none(2, SparsityMode::process_noise), Trajectory::Zero(1, 3));
        const auto s = stack_problem(p, Trajectory::Zero(2, 3), Trajectory::Zero(2, 3), 1.0);
        REQUIRE(s.Phi.rows() == 6);
        REQUIRE(s.Phi.cols() == 6);
        CHECK(s.Phi.block(0, 0, 2, 2) == Mat::Identity(2, 2));
        CHECK(max_abs_diff(s.Phi.block(2, 0, 2, 2), -m.A(1)) == 0.0);
        CHECK(max_abs_diff(s.Phi.block(4, 2, 2, 2), -m.A(2)) == 0.0);
        CHECK(s.Phi.block(4, 0, 2, 2).isZero(0.0));
        CHECK(s.Phi.block(0, 2, 2, 4).isZero(0.0));
    }
}

TEST_CASE("batch_x_affine scalar stationarity") {
    const TrackingProblem p(scalar_affine(1), GroupRegularizer::none(1), Trajectory::Constant(1, 1, 2.0));
    const Trajectory z = Trajectory::Zero(1, 1);
    const Trajectory x = batch_x_affine(stack_problem(p, z, z, 1.0), 1.0);
    CHECK(x(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("batch_x_affine matches a least-squares oracle and is stationary") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t T = 5;
        const AffineModel m = random_affine(rng, T, 3, 2);
        const auto mode = rep % 2 ? SparsityMode::process_noise : SparsityMode::state;
        const auto reg = make_regularizer(RegularizerKind::l2, 3, {}, {1.0}, mode);
        const Trajectory y = sample_measurements(rng, m);
        const TrackingProblem p(m, reg, y);
        const double gamma = 0.3 * (rep % 4 + 1);
        const Trajectory v = random_matrix(rng, 3, 5), eb = random_matrix(rng, 3, 5);
        const Trajectory x = batch_x_affine(stack_problem(p, v, eb, gamma), gamma);

        const DenseMadmm ref(m, reg, y, resolve_target(p, nullptr));
        CHECK(rel_diff(x, ref.solve_x(v, eb, gamma)) <= 1e-10);

        const auto sys = normal_system(p, x, v, eb, gamma);
        CHECK(sys.gradient.norm() <= 1e-10 * (1.0 + x.norm()));
    }
}

TEST_CASE("normal_system gradient matches finite differences of theta") {
    const auto sub = range_subproblem(3, 6);
    const auto sys = normal_system(sub.problem, sub.x0, sub.v, sub.eta_bar, 1.0);
    const Eigen::Index n = sub.x0.size();
    auto theta = [&](const Vec& flat) {
        const Trajectory x = Eigen::Map<const Trajectory>(flat.data(), 4, n / 4);
        return Vec::Constant(1, x_subproblem_cost(sub.problem, x, sub.v, sub.eta_bar, 1.0));
    };
    const Vec flat = Eigen::Map<const Vec>(sub.x0.data(), n);
    const Mat fd = finite_difference(theta, flat, 1e-6);
    CHECK(rel_diff(fd.transpose(), sys.gradient) <= 1e-6);
}

TEST_CASE("Gauss-Newton step") {
    SUBCASE("hand step on the squared measurement") {
        const auto p = square_problem(4.0);
        const Trajectory z = Trajectory::Zero(1, 1);
        const Trajectory x = batch_gn_step(p, Trajectory::Constant(1, 1, 1.0), z, z, 0.0);
        CHECK(x(0, 0) == doctest::Approx(2.5).epsilon(1e-9));
    }
    SUBCASE("affine models are solved in one step from any start") {
        std::mt19937_64 rng(2);
        const AffineModel m = random_affine(rng, 6, 3, 2);
        const auto reg = make_regularizer(RegularizerKind::l2, 3, {}, {1.0}, SparsityMode::process_noise);
        const TrackingProblem p(m, reg, sample_measurements(rng, m));
        const Trajectory v = random_matrix(rng, 3, 6), eb = random_matrix(rng, 3, 6);
        const Trajectory exact = batch_x_affine(stack_problem(p, v, eb, 1.0), 1.0);
        const Trajectory x1 = batch_gn_step(p, random_matrix(rng, 3, 6, 5.0), v, eb, 1.0);
        CHECK(rel_diff(x1, exact) <= 1e-10);
        CHECK(rel_diff(batch_gn_step(p, x1, v, eb, 1.0), x1) <= 1e-10);
    }
    SUBCASE("stationary point is a fixed point") {
        const auto sub = range_subproblem(5, 12);
        auto tr = batch_nonlinear_solve(sub.problem, sub.v, sub.eta_bar, 1.0, NonlinearMethod::gn,
                                        LMConfig{.max_iterations = 30}, sub.x0);
        const Trajectory again = batch_gn_step(sub.problem, tr.x, sub.v, sub.eta_bar, 1.0);
        CHECK(max_abs_diff(again, tr.x) <= 1e-9);
    }
}

TEST_CASE("Levenberg-Marquardt step") {
    const auto p = square_problem(4.0);
    const Trajectory z = Trajectory::Zero(1, 1);
    const Trajectory x0 = Trajectory::Constant(1, 1, 1.0);
    LMConfig cfg;
    // N = 4, g = -6: x - (4 + 4)^-1 (-6)
    CHECK(batch_lm_step(p, x0, z, z, 0.0, cfg, 4.0)(0, 0) == doctest::Approx(1.75).epsilon(1e-9));
    CHECK(batch_lm_step(p, x0, z, z, 0.0, cfg, 0.0)(0, 0) == doctest::Approx(batch_gn_step(p, x0, z, z, 0.0)(0, 0)));

    const auto sub = range_subproblem(2, 10);
    const Trajectory frozen = batch_lm_step(sub.problem, sub.x0, sub.v, sub.eta_bar, 1.0, cfg, 1e12);
    CHECK(rel_diff(frozen, sub.x0) <= 1e-6);
    CHECK_THROWS_AS(batch_lm_step(p, x0, z, z, 0.0, cfg, -1.0), InvalidArgument);
}

TEST_CASE("damped normal matrix is positive definite") {
    const auto sub = range_subproblem(8, 10);
    auto sys = normal_system(sub.problem, sub.x0, sub.v, sub.eta_bar, 1.0);
    for (Eigen::Index i = 0; i < sys.N.rows(); ++i) sys.N(i, i) += 1e-2;
    Eigen::LLT<Mat> llt(sys.N);
    REQUIRE(llt.info() == Eigen::Success);
    CHECK(Mat(llt.matrixL()).diagonal().minCoeff() > 0.0);
}

TEST_CASE("nonlinear batch solve") {
    SUBCASE("affine problems take one accepted step to the exact solution") {
        std::mt19937_64 rng(4);
        const AffineModel m = random_affine(rng, 6, 3, 2);
        const TrackingProblem p(m, make_regularizer(RegularizerKind::l2, 3, {}, {1.0}), sample_measurements(rng, m));
        const Trajectory v = random_matrix(rng, 3, 6), eb = random_matrix(rng, 3, 6);
        const Trajectory exact = batch_x_affine(stack_problem(p, v, eb, 1.0), 1.0);
        for (auto method : {NonlinearMethod::gn, NonlinearMethod::lm}) {
            const auto tr = batch_nonlinear_solve(p, v, eb, 1.0, method, {}, Trajectory::Zero(3, 6));
            CHECK(tr.accepted_steps == 1);
            CHECK(rel_diff(tr.x, exact) <= 1e-10);
        }
    }
    SUBCASE("LM accepted theta strictly decreases on the range subproblem") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto sub = range_subproblem(seed);
            const auto tr = batch_nonlinear_solve(sub.problem, sub.v, sub.eta_bar, 1.0, NonlinearMethod::lm, {}, sub.x0);
            REQUIRE(tr.theta.size() >= 2);
            for (std::size_t i = 1; i < tr.theta.size(); ++i) CHECK(tr.theta[i] < tr.theta[i - 1]);
        }
    }
    SUBCASE("GN and LM agree after convergence") {
        const auto sub = range_subproblem(9);
        LMConfig cfg;
        cfg.max_iterations = 60;
        const auto gn = batch_nonlinear_solve(sub.problem, sub.v, sub.eta_bar, 1.0, NonlinearMethod::gn, cfg, sub.x0);
        const auto lm = batch_nonlinear_solve(sub.problem, sub.v, sub.eta_bar, 1.0, NonlinearMethod::lm, cfg, sub.x0);
        CHECK(max_abs_diff(gn.x, lm.x) <= 1e-6);
    }
}

TEST_CASE("LM configuration validation") {
    LMConfig cfg;
    cfg.alpha = 1.0;
    CHECK_THROWS_AS(cfg.validate(2, 3), InvalidArgument);
    cfg = {};
    cfg.lambda0 = -1.0;
    CHECK_THROWS_AS(cfg.validate(2, 3), InvalidArgument);
    cfg = {};
    cfg.S = StepSeries<Mat>(Mat::Identity(3, 3));
    CHECK_THROWS_AS(cfg.validate(2, 3), DimensionError);
    cfg.S = StepSeries<Mat>(-Mat::Identity(2, 2));
    CHECK_THROWS_AS(cfg.validate(2, 3), NotPositiveDefiniteError);
}
