#pragma once

#include "splitsmooth/model.hpp"

#include <random>

namespace testsupport {

using namespace splitsmooth;

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

inline Vec random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    return random_matrix(rng, n, 1, scale);
}

/// Well conditioned SPD matrix: M M^T / n + floor I.
inline Mat random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.2) {
    const Mat M = random_matrix(rng, n, n);
    return symmetrize(M * M.transpose() / static_cast<double>(n) + floor * Mat::Identity(n, n));
}

/// Random time-varying affine model; transition matrices have spectral radius below ~1.
inline AffineModel random_affine(std::mt19937_64& rng, std::size_t T, Eigen::Index nx, Eigen::Index ny) {
    std::vector<Mat> A, H, Q, R;
    std::vector<Vec> b, e;
    for (std::size_t t = 0; t < T; ++t) {
        Mat a = random_matrix(rng, nx, nx);
        a /= std::max(1.0, 1.2 * a.norm() / std::sqrt(static_cast<double>(nx)));
        A.push_back(a);
        b.push_back(random_vector(rng, nx, 0.1));
        H.push_back(random_matrix(rng, ny, nx));
        e.push_back(random_vector(rng, ny, 0.1));
        Q.push_back(random_spd(rng, nx));
        R.push_back(random_spd(rng, ny));
    }
    return AffineModel(T, StepSeries<Mat>(A), StepSeries<Vec>(b), StepSeries<Mat>(H), StepSeries<Vec>(e),
                       StepSeries<Mat>(Q), StepSeries<Mat>(R), random_vector(rng, nx), random_spd(rng, nx));
}

/// Measurements simulated from the model itself.
inline Trajectory sample_measurements(std::mt19937_64& rng, const AffineModel& m) {
    const auto T = static_cast<Eigen::Index>(m.horizon());
    Trajectory x(m.state_dim(), T), y(m.meas_dim(), T);
    x.col(0) = m.m1() + m.P1_factor().matrixL() * random_vector(rng, m.state_dim());
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto s = static_cast<std::size_t>(t);
        if (t > 0) x.col(t) = m.A(s) * x.col(t - 1) + m.b(s) + m.Q_factor(s).matrixL() * random_vector(rng, m.state_dim());
        y.col(t) = m.H(s) * x.col(t) + m.e(s) + m.R_factor(s).matrixL() * random_vector(rng, m.meas_dim());
    }
    return y;
}

/// Central-difference Jacobian.
template <typename F>
Mat finite_difference(F&& f, const Vec& x, double h = 1e-6) {
    const Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] += step;
        xm[i] -= step;
        J.col(i) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return J;
}

inline double rel_diff(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

inline double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testsupport
