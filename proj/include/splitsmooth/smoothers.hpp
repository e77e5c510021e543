#pragma once

// Recursive x-subproblem solvers: the augmented Kalman smoother on the fused
// model, and its iterated (Gauss-Newton / Levenberg-Marquardt) variants.

#include "splitsmooth/batch.hpp"
#include "splitsmooth/model.hpp"

#include <functional>

namespace splitsmooth {

/// Transition of step t in the fused model.
struct FusedStep {
    Mat A;
    Vec b;
    Mat Q;
};

/// Affine model with the splitting term folded in. Per-step quantities follow
/// the zero-based convention: entry 0 of transition series is unused.
///
/// Folding gamma/2 ||x_t - B_t x_{t-1} - c_t||^2 into the transition leaves a
/// term in x_{t-1} alone whenever A_t != B_t. It is carried as the coupling
/// channel: C_t x_{t-1} observed as c_t - b_t with covariance Q_t + I / gamma,
/// where C_t = A_t - B_t and c_t = d_t + v_t - eta_bar_t / gamma. The channel
/// is absent when A_t == B_t.
struct FusedModel {
    StepSeries<Mat> A;
    StepSeries<Mat> Q;
    Trajectory b;
    Vec m1;
    Mat P1;
    StepSeries<Mat> H;
    StepSeries<Vec> e;
    StepSeries<Mat> R;

    StepSeries<Mat> C;
    Trajectory c;
    StepSeries<Mat> Qc;

    /// LM pseudo-measurement z_t = x_t + noise with covariance Sigma_t. Empty when unused.
    Trajectory z;
    StepSeries<Mat> Sigma;

    std::size_t horizon() const noexcept { return static_cast<std::size_t>(b.cols()); }
    Eigen::Index state_dim() const noexcept { return m1.size(); }
    bool has_coupling() const noexcept { return !C.empty(); }
    bool has_pseudo() const noexcept { return z.cols() > 0; }
};

FusedStep fuse_dynamics(const Mat& A, const Vec& b, const Mat& Q, const Mat& B, const Vec& d, const Vec& v,
                        const Vec& eta_bar, double gamma);
std::pair<Vec, Mat> fuse_prior(const Vec& m1, const Mat& P1, const Vec& v1, const Vec& eta_bar1, double gamma);

/// Fused model of the affine x-subproblem. gamma = 0 returns the model unchanged.
FusedModel fuse_model(const AffineModel& model, const SparsityTarget& target, const Trajectory& v,
                      const Trajectory& eta_bar, double gamma);

/// Adds the LM pseudo-measurement channel z_t = x_t^(i), Sigma_t = S_t / lambda.
void add_damping(FusedModel& fused, const Trajectory& x, const LMConfig& cfg, double lambda);

/// Workspace and outputs of one forward-backward pass. Reusing a pass across
/// calls avoids reallocating the per-step storage.
struct SmootherPass {
    Trajectory filtered_mean;
    Mat filtered_cov;  ///< N_x by N_x T, block t is P_t
    Trajectory smoothed_mean;
    Mat smoothed_cov;  ///< filled when keep_smoothed_cov is set
    bool keep_smoothed_cov = false;
    /// max_t lambda_max(P^s_t), filled when track_max_eigenvalue is set.
    double max_smoothed_eigenvalue = 0.0;
    bool track_max_eigenvalue = false;
};

/// Kalman filter plus RTS smoother on the fused model; returns the smoothed means.
const Trajectory& augmented_ks(const FusedModel& fused, const Trajectory& y, SmootherPass& pass);
Trajectory augmented_ks(const FusedModel& fused, const Trajectory& y);

/// Eq. 22 linearisation along `nominal`.
AffineModel linearize(const NonlinearModel& model, const Trajectory& nominal);

struct IeksOptions {
    int max_iterations = 5;
    double tolerance = 1e-8;
    /// GN only: refuse linearisations whose rcond estimate is below this.
    double rcond_floor = kRcondFloor;
    bool check_conditioning = true;
    /// Test hook applied to every fused model before smoothing.
    std::function<void(FusedModel&)> fused_hook;
};

/// Max over t of lambda_max of the diagonal blocks of the GN normal matrix of
/// the linearised subproblem (damping excluded).
double normal_block_max_eigenvalue(const AffineModel& lin, const SparsityTarget& target, double gamma);

struct LinearizedSubproblem {
    AffineModel model;
    SparsityTarget target;
    FusedModel fused;
};

/// The subproblem linearised at `nominal` and its fused model; used by both IEKS variants.
LinearizedSubproblem linearize_subproblem(const TrackingProblem& problem, const Trajectory& nominal,
                                          const Trajectory& v, const Trajectory& eta_bar, double gamma);

InnerTrace gn_ieks(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                   const Trajectory& x0, const IeksOptions& opts = {});
InnerTrace lm_ieks(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                   const Trajectory& x0, const LMConfig& cfg, const IeksOptions& opts = {});

}  // namespace splitsmooth
