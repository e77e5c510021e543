#include "doctest.h"
#include "support.hpp"

using namespace splitsmooth;
using namespace testsupport;

namespace {

AffineModel scalar_model(std::size_t T = 1) {
    const Mat one = Mat::Identity(1, 1);
    return AffineModel(T, StepSeries<Mat>(one), {}, StepSeries<Mat>(one), {}, StepSeries<Mat>(one),
                       StepSeries<Mat>(one), Vec::Zero(1), one);
}

Trajectory scalar(double value) { return Trajectory::Constant(1, 1, value); }

GroupRegularizer scalar_group(double mu) {
    return GroupRegularizer(1, StepSeries<std::vector<Mat>>(std::vector<Mat>{Mat::Identity(1, 1)}), {mu});
}

}  // namespace

TEST_CASE("objective of the one-step scalar problem") {
    const TrackingProblem p(scalar_model(), GroupRegularizer::none(1), scalar(2.0));
    CHECK(objective(p, scalar(1.0)) == doctest::Approx(1.0).epsilon(1e-14));

    const TrackingProblem pg(scalar_model(), scalar_group(3.0), scalar(2.0));
    CHECK(objective(pg, scalar(1.0)) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("objective vanishes on a zero-residual trajectory") {
    std::mt19937_64 rng(3);
    const std::size_t T = 6;
    const Mat A = random_matrix(rng, 3, 3, 0.4);
    const Mat H = random_matrix(rng, 2, 3);
    const Vec m1 = random_vector(rng, 3);
    const AffineModel m(T, StepSeries<Mat>(A), {}, StepSeries<Mat>(H), {}, StepSeries<Mat>(random_spd(rng, 3)),
                        StepSeries<Mat>(random_spd(rng, 2)), m1, random_spd(rng, 3));
    Trajectory x(3, T), y(2, T);
    x.col(0) = m1;
    for (Eigen::Index t = 1; t < 6; ++t) x.col(t) = A * x.col(t - 1);
    y = H * x;
    const auto reg = make_regularizer(RegularizerKind::l2, 3, {}, {0.0});
    const TrackingProblem p(m, reg, y);
    CHECK(objective(p, x) == doctest::Approx(0.0).epsilon(1e-24));
    CHECK(objective(p, x + Trajectory::Constant(3, T, 0.01)) > 0.0);
}

TEST_CASE("augmented Lagrangian") {
    const TrackingProblem p(scalar_model(), scalar_group(3.0), scalar(2.0));
    SplitState s = SplitState::zeros(1, 1, 1);
    s.x = scalar(1.0);

    SUBCASE("adds the quadratic constraint term") {
        // u = 1, v = 0, w = 0: data 1.0 plus (2/2)(1^2 + 0^2)
        CHECK(augmented_lagrangian(p, s, 2.0) == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("feasible point with zero multipliers equals the objective") {
        s.v = scalar(1.0);
        s.w = scalar(1.0);
        CHECK(augmented_lagrangian(p, s, 1.0) == doctest::Approx(objective(p, s.x)).epsilon(1e-12));
        s.eta_bar = scalar(1.0);
        CHECK(augmented_lagrangian(p, s, 1.0) == doctest::Approx(objective(p, s.x)).epsilon(1e-12));
    }
    SUBCASE("rejects nonpositive gamma") { CHECK_THROWS_AS(augmented_lagrangian(p, s, 0.0), InvalidArgument); }
}

TEST_CASE("feasible split state reproduces the objective on random problems") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const AffineModel m = random_affine(rng, 8, 4, 2);
        const auto reg = make_regularizer(RegularizerKind::sparse_group, 4, {{0, 1}, {2, 3}}, {0.7},
                                          rep % 2 ? SparsityMode::process_noise : SparsityMode::state);
        const TrackingProblem p(m, reg, sample_measurements(rng, m));
        SplitState s = SplitState::zeros(8, 4, reg.stacked_rows());
        s.x = random_matrix(rng, 4, 8);
        s.v = constraint_lhs(p, s.x);
        for (Eigen::Index t = 0; t < 8; ++t) s.w.col(t) = reg.stacked(0) * s.v.col(t);
        const double L = augmented_lagrangian(p, s, 1.7);
        CHECK(std::abs(L - objective(p, s.x)) <= 1e-12 * std::abs(L));
    }
}

TEST_CASE("regulariser families") {
    SUBCASE("lasso selects one component per group") {
        const auto r = make_regularizer(RegularizerKind::lasso, 3, {}, {1.0});
        REQUIRE(r.group_count() == 3);
        for (std::size_t g = 0; g < 3; ++g) {
            Mat expect = Mat::Zero(1, 3);
            expect(0, static_cast<Eigen::Index>(g)) = 1.0;
            CHECK(r.G(g, 0) == expect);
        }
    }
    SUBCASE("l2 is one identity group") {
        const auto r = make_regularizer(RegularizerKind::l2, 4, {}, {1.0});
        REQUIRE(r.group_count() == 1);
        CHECK(r.G(0, 0) == Mat::Identity(4, 4));
    }
    SUBCASE("group selects the listed components") {
        const auto r = make_regularizer(RegularizerKind::group, 4, {{2, 3}}, {1.0});
        REQUIRE(r.group_count() == 1);
        Mat expect = Mat::Zero(2, 4);
        expect(0, 2) = 1.0;
        expect(1, 3) = 1.0;
        CHECK(r.G(0, 0) == expect);
    }
    SUBCASE("total variation uses forward differences") {
        const auto iso = make_regularizer(RegularizerKind::iso_tv, 3, {}, {1.0});
        Mat D(2, 3);
        D << -1, 1, 0, 0, -1, 1;
        CHECK(iso.G(0, 0) == D);
        const auto aniso = make_regularizer(RegularizerKind::aniso_tv, 3, {}, {1.0});
        CHECK(aniso.group_count() == 2);
        CHECK(aniso.stacked(0) == D);
    }
    SUBCASE("every family has N_x columns and selectors are 0/1") {
        for (auto kind : {RegularizerKind::l2, RegularizerKind::lasso, RegularizerKind::iso_tv,
                          RegularizerKind::aniso_tv, RegularizerKind::fused, RegularizerKind::group,
                          RegularizerKind::sparse_group}) {
            const auto r = make_regularizer(kind, 5, {{0, 4}, {1}}, {0.5});
            Eigen::Index rows = 0;
            for (std::size_t g = 0; g < r.group_count(); ++g) {
                CHECK(r.G(g, 0).cols() == 5);
                rows += r.G(g, 0).rows();
                if (kind == RegularizerKind::lasso || kind == RegularizerKind::group) {
                    CHECK((r.G(g, 0).array() * (r.G(g, 0).array() - 1.0)).abs().maxCoeff() == 0.0);
                }
            }
            CHECK(r.stacked(0).rows() == rows);
            CHECK(r.stacked_rows() == rows);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(make_regularizer(RegularizerKind::group, 4, {{}}, {1.0}), InvalidArgument);
        CHECK_THROWS_AS(make_regularizer(RegularizerKind::group, 4, {{4}}, {1.0}), InvalidArgument);
        CHECK_THROWS_AS(make_regularizer(RegularizerKind::lasso, 3, {}, {1.0, 2.0}), InvalidArgument);
        CHECK_THROWS_AS(make_regularizer(RegularizerKind::lasso, 3, {}, {-1.0}), InvalidArgument);
        CHECK_THROWS_AS(parse_regularizer_kind("ridge"), InvalidArgument);
    }
    SUBCASE("per-group weights") {
        const auto r = make_regularizer(RegularizerKind::lasso, 2, {}, {1.0, 4.0});
        CHECK(r.weight(0) == 1.0);
        CHECK(r.weight(1) == 4.0);
    }
}

TEST_CASE("sparsity targets") {
    std::mt19937_64 rng(5);
    const AffineModel m = random_affine(rng, 4, 3, 2);
    SUBCASE("state mode is zero") {
        const auto tg = sparsity_target(m, SparsityMode::state);
        CHECK(tg.B[2].isZero(0.0));
        CHECK(tg.d[2].isZero(0.0));
    }
    SUBCASE("affine process noise copies the transition") {
        const auto tg = sparsity_target(m, SparsityMode::process_noise);
        CHECK(tg.B[2] == m.A(2));
        CHECK(tg.d[3] == m.b(3));
    }
    SUBCASE("nonlinear process noise linearises along the nominal") {
        const Mat one = Mat::Identity(1, 1);
        const NonlinearModel sq(
            2, 1, [](const Vec& x, std::size_t) { return Vec(x.array().square()); },
            [](const Vec& x, std::size_t) { return Mat(2.0 * x.asDiagonal()); },
            [](const Vec& x, std::size_t) { return x; }, [one](const Vec&, std::size_t) { return one; },
            StepSeries<Mat>(one), StepSeries<Mat>(one), Vec::Zero(1), one);
        Trajectory nominal(1, 2);
        nominal << 1.0, 0.0;
        const auto tg = sparsity_target(sq, SparsityMode::process_noise, &nominal);
        CHECK(tg.B[1](0, 0) == doctest::Approx(2.0));
        CHECK(tg.d[1](0) == doctest::Approx(-1.0));
        CHECK_THROWS_AS(sparsity_target(sq, SparsityMode::process_noise), InvalidArgument);
    }
}

TEST_CASE("constraint_lhs uses the prior mean at the first step") {
    std::mt19937_64 rng(8);
    const AffineModel m = random_affine(rng, 5, 3, 2);
    const auto reg = make_regularizer(RegularizerKind::l2, 3, {}, {1.0}, SparsityMode::process_noise);
    const TrackingProblem p(m, reg, sample_measurements(rng, m));
    const Trajectory x = random_matrix(rng, 3, 5);
    const Trajectory u = constraint_lhs(p, x);
    CHECK(max_abs_diff(u.col(0), x.col(0) - m.m1()) == 0.0);
    CHECK(max_abs_diff(u.col(3), x.col(3) - m.A(3) * x.col(2) - m.b(3)) < 1e-14);
}

TEST_CASE("model validation") {
    const Mat one = Mat::Identity(1, 1);
    Mat bad(1, 1);
    bad << -1.0;
    CHECK_THROWS_AS(AffineModel(2, StepSeries<Mat>(one), {}, StepSeries<Mat>(one), {}, StepSeries<Mat>(bad),
                                StepSeries<Mat>(one), Vec::Zero(1), one),
                    NotPositiveDefiniteError);
    Mat asym(2, 2);
    asym << 1.0, 0.5, 0.4, 1.0;
    const Mat I2 = Mat::Identity(2, 2);
    CHECK_THROWS_AS(AffineModel(2, StepSeries<Mat>(I2), {}, StepSeries<Mat>(I2), {}, StepSeries<Mat>(asym),
                                StepSeries<Mat>(I2), Vec::Zero(2), I2),
                    NotPositiveDefiniteError);
    CHECK_THROWS_AS(AffineModel(2, StepSeries<Mat>(I2), {}, StepSeries<Mat>(I2), {}, StepSeries<Mat>(I2),
                                StepSeries<Mat>(I2), Vec::Zero(3), I2),
                    DimensionError);
    CHECK_THROWS_AS(AffineModel(3, StepSeries<Mat>(std::vector<Mat>{I2, I2}), {}, StepSeries<Mat>(I2), {},
                                StepSeries<Mat>(I2), StepSeries<Mat>(I2), Vec::Zero(2), I2),
                    DimensionError);
    CHECK_THROWS_AS(TrackingProblem(scalar_model(3), GroupRegularizer::none(1), Trajectory::Zero(1, 2)),
                    DimensionError);
}
