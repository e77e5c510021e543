#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace splitsmooth {

/// Default floor on the reciprocal condition estimate of a Gauss-Newton
/// normal matrix: sqrt of machine epsilon, i.e. half the digits gone.
inline constexpr double kRcondFloor = 1.4901161193847656e-08;


using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Column-major sequence of per-step vectors: column t holds the value at step t.
/// Columns are contiguous, so the whole sequence can be viewed as one flat array.
using Trajectory = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error {
public:
    using Error::Error;
};

/// A linear system that the method cannot solve reliably (Cholesky failure or
/// a reciprocal-condition estimate below the configured floor).
class SingularSystemError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Failure inside an iterative solver, tagged with the iteration that failed.
class SolverError : public Error {
public:
    SolverError(const std::string& what, int iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

// ---------------------------------------------------------------------------
// StepSeries
// ---------------------------------------------------------------------------

/// Per-step quantity that is either constant over the horizon (one stored
/// entry) or given explicitly for every step. Indexing past the stored range
/// of a constant series returns the single entry.
template <typename T>
class StepSeries {
public:
    StepSeries() = default;
    explicit StepSeries(T constant) { values_.push_back(std::move(constant)); }
    explicit StepSeries(std::vector<T> per_step) : values_(std::move(per_step)) {}

    const T& operator[](std::size_t t) const { return values_.size() == 1 ? values_.front() : values_[t]; }

    bool constant() const noexcept { return values_.size() == 1; }
    bool empty() const noexcept { return values_.empty(); }
    std::size_t stored() const noexcept { return values_.size(); }
    const std::vector<T>& values() const noexcept { return values_; }

    /// Valid for a horizon of `horizon` steps.
    bool covers(std::size_t horizon) const noexcept { return values_.size() == 1 || values_.size() == horizon; }

private:
    std::vector<T> values_;
};

// ---------------------------------------------------------------------------
// Small helpers shared by all modules
// ---------------------------------------------------------------------------

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}

inline void require_dims(bool condition, const std::string& message) {
    if (!condition) throw DimensionError(message);
}

/// Symmetry to `rel_tol` relative to the largest entry.
inline bool is_symmetric(const Mat& m, double rel_tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky factor of a covariance; throws when the matrix is not SPD.
inline Eigen::LLT<Mat> factor_spd(const Mat& m, const std::string& name) {
    if (!is_symmetric(m)) throw NotPositiveDefiniteError(name + " is not symmetric");
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError(name + " is not positive definite");
    return llt;
}

/// ||r||^2 weighted by the inverse of the covariance whose factor is `llt`.
inline double inv_weighted_sq(const Eigen::LLT<Mat>& llt, const Vec& r) {
    return llt.matrixL().solve(r).squaredNorm();
}

/// Ratio of the smallest to the largest squared Cholesky pivot.
inline double pivot_ratio(const Eigen::LLT<Mat>& llt) {
    const Vec d = Mat(llt.matrixLLT()).diagonal().cwiseAbs2();
    return d.minCoeff() / d.maxCoeff();
}

}  // namespace splitsmooth
