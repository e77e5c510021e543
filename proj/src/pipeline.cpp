#include "splitsmooth/pipeline.hpp"

#include <memory>

namespace splitsmooth {

SolverKind parse_solver_kind(const std::string& name) {
    if (name == "ks_madmm") return SolverKind::ks_madmm;
    if (name == "gn_ieks_madmm") return SolverKind::gn_ieks_madmm;
    if (name == "lm_ieks_madmm") return SolverKind::lm_ieks_madmm;
    if (name == "batch_madmm") return SolverKind::batch_madmm;
    throw InvalidArgument("unknown solver '" + name + "'");
}

std::string to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::ks_madmm: return "ks_madmm";
        case SolverKind::gn_ieks_madmm: return "gn_ieks_madmm";
        case SolverKind::lm_ieks_madmm: return "lm_ieks_madmm";
        case SolverKind::batch_madmm: return "batch_madmm";
    }
    return "?";
}

void check_compatible(const SolverSettings& settings, const TrackingProblem& problem) {
    if (settings.kind == SolverKind::ks_madmm && !problem.is_affine()) {
        throw InvalidArgument("ks_madmm needs an affine model; use gn_ieks_madmm or lm_ieks_madmm");
    }
    if (settings.kind == SolverKind::lm_ieks_madmm ||
        (settings.kind == SolverKind::batch_madmm && settings.batch_method == NonlinearMethod::lm)) {
        settings.lm.validate(problem.state_dim(), problem.horizon());
    }
}

XSolver make_x_solver(const SolverSettings& settings) {
    switch (settings.kind) {
        case SolverKind::ks_madmm: {
            auto pass = std::make_shared<SmootherPass>();
            auto hook = settings.ieks.fused_hook;
            return [pass, hook](const TrackingProblem& p, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                                const Trajectory&) -> Trajectory {
                if (!p.is_affine()) throw InvalidArgument("ks_madmm needs an affine model");
                FusedModel f = fuse_model(p.affine(), resolve_target(p, nullptr), v, eta_bar, gamma);
                if (hook) hook(f);
                return augmented_ks(f, p.measurements(), *pass);
            };
        }
        case SolverKind::gn_ieks_madmm: {
            const IeksOptions opts = settings.ieks;
            return [opts](const TrackingProblem& p, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                          const Trajectory& warm) { return gn_ieks(p, v, eta_bar, gamma, warm, opts).x; };
        }
        case SolverKind::lm_ieks_madmm: {
            const IeksOptions opts = settings.ieks;
            const LMConfig cfg = settings.lm;
            return [opts, cfg](const TrackingProblem& p, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                               const Trajectory& warm) { return lm_ieks(p, v, eta_bar, gamma, warm, cfg, opts).x; };
        }
        case SolverKind::batch_madmm: {
            const LMConfig cfg = settings.lm;
            const NonlinearMethod method = settings.batch_method;
            GnStepOptions gn;
            gn.rcond_floor = settings.ieks.rcond_floor;
            gn.check_conditioning = settings.ieks.check_conditioning;
            return [cfg, method, gn](const TrackingProblem& p, const Trajectory& v, const Trajectory& eta_bar,
                                     double gamma, const Trajectory& warm) -> Trajectory {
                if (p.is_affine()) return batch_x_affine(stack_problem(p, v, eta_bar, gamma), gamma);
                return batch_nonlinear_solve(p, v, eta_bar, gamma, method, cfg, warm, gn).x;
            };
        }
    }
    throw InvalidArgument("unknown solver kind");
}

Trajectory plain_smoother(const TrackingProblem& problem, const SolverSettings& settings) {
    check_compatible(settings, problem);
    const auto T = static_cast<Eigen::Index>(problem.horizon());
    const Eigen::Index nx = problem.state_dim();
    const Trajectory zero = Trajectory::Zero(nx, T);
    return make_x_solver(settings)(problem, zero, zero, 0.0, problem.m1().replicate(1, T));
}

SolveReport solve(const TrackingProblem& problem, const SolverSettings& settings, const MadmmOptions& opts) {
    check_compatible(settings, problem);
    return run_madmm(problem, make_x_solver(settings), opts);
}

}  // namespace splitsmooth
