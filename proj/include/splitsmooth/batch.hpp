#pragma once

// Dense batch solvers for the x-subproblem. Everything here is O((N_x T)^3)
// and exists as a reference for the recursive smoothers.

#include "splitsmooth/model.hpp"

namespace splitsmooth {

struct LMConfig {
    double lambda0 = 1e-2;
    double alpha = 10.0;
    /// S_t; empty means identity.
    StepSeries<Mat> S;
    /// Accepted steps before stopping.
    int max_iterations = 5;
    /// Relative step norm below which the iteration stops.
    double step_floor = 1e-10;
    /// Consecutive rejections tolerated before giving up on further progress.
    int max_rejections = 40;

    void validate(Eigen::Index state_dim, std::size_t horizon) const;
    Mat S_at(std::size_t t, Eigen::Index state_dim) const;
};

/// Stacked form of the affine x-subproblem. Vectors concatenate per-step
/// values; matrices are dense.
struct StackedProblem {
    Eigen::Index state_dim = 0;
    std::size_t horizon = 0;
    Vec y, e, m, b, d, v, eta_bar;
    Mat H;    ///< block diagonal H_t
    Mat R;    ///< block diagonal R_t
    Mat Q;    ///< blockdiag(P1, Q_2, ..., Q_T)
    Mat A;    ///< identity diagonal, -A_t below
    Mat Phi;  ///< identity diagonal, -B_t below
};

/// Stacks the affine problem, or the linearisation of a nonlinear problem at `nominal`.
StackedProblem stack_problem(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar,
                             double gamma, const Trajectory* nominal = nullptr);

/// Eq. 10 solution.
Trajectory batch_x_affine(const StackedProblem& stacked, double gamma);

/// Gradient and Gauss-Newton normal matrix of the x-subproblem cost theta at x.
struct NormalSystem {
    Mat N;
    Vec gradient;
};
NormalSystem normal_system(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                           const Trajectory& eta_bar, double gamma);

/// 1 / (max_t lambda_max((N^-1)_tt) * max_t lambda_max(N_tt)): an upper bound
/// on the reciprocal condition number of N computed from diagonal blocks.
double block_rcond_estimate(const Mat& N, Eigen::Index state_dim);

struct GnStepOptions {
    /// Reject the linearisation when block_rcond_estimate falls below this.
    double rcond_floor = kRcondFloor;
    bool check_conditioning = true;
};

Trajectory batch_gn_step(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                         const Trajectory& eta_bar, double gamma, const GnStepOptions& opts = {});
/// lambda = 0 falls back to batch_gn_step.
Trajectory batch_lm_step(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                         const Trajectory& eta_bar, double gamma, const LMConfig& cfg, double lambda);

enum class NonlinearMethod { gn, lm };

/// Iterate history shared by the batch and recursive nonlinear solvers.
struct InnerTrace {
    Trajectory x;
    /// Proposed iterates in order (accepted or not).
    std::vector<Trajectory> proposals;
    std::vector<double> lambdas;
    std::vector<bool> accepted;
    /// theta at the start point followed by theta at each accepted iterate.
    std::vector<double> theta;
    int accepted_steps = 0;
};

InnerTrace batch_nonlinear_solve(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar,
                                 double gamma, NonlinearMethod method, const LMConfig& cfg, const Trajectory& x0,
                                 const GnStepOptions& gn = {});

}  // namespace splitsmooth
