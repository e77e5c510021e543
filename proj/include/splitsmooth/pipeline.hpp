#pragma once

// x-subproblem solvers packaged for run_madmm.

#include "splitsmooth/admm.hpp"
#include "splitsmooth/batch.hpp"
#include "splitsmooth/smoothers.hpp"

#include <string>

namespace splitsmooth {

enum class SolverKind { ks_madmm, gn_ieks_madmm, lm_ieks_madmm, batch_madmm };

SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

struct SolverSettings {
    SolverKind kind = SolverKind::ks_madmm;
    LMConfig lm;
    IeksOptions ieks;
    /// Inner method of batch_madmm on nonlinear problems.
    NonlinearMethod batch_method = NonlinearMethod::lm;
};

/// Throws InvalidArgument when the solver cannot handle the problem (ks_madmm needs an affine model).
void check_compatible(const SolverSettings& settings, const TrackingProblem& problem);

/// The returned solver keeps its own smoother workspace; use one per solve.
XSolver make_x_solver(const SolverSettings& settings);

/// Solution with the penalty switched off (gamma = 0 subproblem).
Trajectory plain_smoother(const TrackingProblem& problem, const SolverSettings& settings);

SolveReport solve(const TrackingProblem& problem, const SolverSettings& settings, const MadmmOptions& opts);

}  // namespace splitsmooth
