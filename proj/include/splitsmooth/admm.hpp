#pragma once

#include "splitsmooth/model.hpp"

#include <functional>
#include <optional>

namespace splitsmooth {

struct MadmmOptions {
    double gamma = 1.0;
    int max_iterations = 50;
    double eps_pri = 1e-6;
    double eps_dual = 1e-6;
    /// Groups with ||w_{g,t}|| at or below this count as zero in the sparsity pattern.
    double zero_threshold = 1e-6;
    /// Stop as soon as both residuals are below tolerance.
    bool early_stop = true;
    /// Objective and augmented Lagrangian are O(T) each; benchmarks switch them off.
    bool record_objective = true;
    bool record_lagrangian = true;

    void validate() const;
};

using SparsityPattern = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SolveReport {
    Trajectory x;
    SplitState state;
    std::vector<double> objective;
    std::vector<double> lagrangian;
    std::vector<double> primal_residual;
    std::vector<double> dual_residual;
    std::vector<double> seconds;
    int iterations = 0;
    bool converged = false;
    /// N_g by T; true where ||w_{g,t}|| <= zero_threshold.
    SparsityPattern zero_groups;
};

/// x-subproblem oracle: (problem, v, eta_bar, gamma, warm start) -> x.
/// gamma = 0 asks for the plain (unregularised) smoother.
using XSolver = std::function<Trajectory(const TrackingProblem&, const Trajectory&, const Trajectory&, double,
                                         const Trajectory&)>;

/// Prox of kappa * ||.||_2.
Vec block_shrink(const Vec& z, double kappa);

/// Per-step updates (Eq. 6b-6d) for step t.
Vec update_w(const GroupRegularizer& reg, std::size_t t, const Vec& v_t, const Vec& eta_under_t, double gamma);
Vec update_v(const GroupRegularizer& reg, std::size_t t, const Vec& u_t, const Vec& w_t, const Vec& eta_bar_t,
             const Vec& eta_under_t, double gamma);
/// Returns the new (eta_bar_t, eta_under_t).
std::pair<Vec, Vec> update_dual(const GroupRegularizer& reg, std::size_t t, const Vec& u_t, const Vec& w_t,
                                const Vec& v_t, const Vec& eta_bar_t, const Vec& eta_under_t, double gamma);

// Whole-horizon forms over the flat arrays; these run the SIMD kernels.

/// G_t v_t for every t.
Trajectory apply_groups(const GroupRegularizer& reg, const Trajectory& v);
Trajectory update_w_all(const GroupRegularizer& reg, const Trajectory& v, const Trajectory& eta_under, double gamma);
Trajectory update_v_all(const GroupRegularizer& reg, const Trajectory& u, const Trajectory& w,
                        const Trajectory& eta_bar, const Trajectory& eta_under, double gamma);
/// In-place dual ascent. `Gv` must be apply_groups(reg, v).
void update_dual_all(const Trajectory& u, const Trajectory& w, const Trajectory& v, const Trajectory& Gv,
                     Trajectory& eta_bar, Trajectory& eta_under, double gamma);

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
};

/// r_pri = ||[u; w] - [I; G] v||, r_dual = gamma ||(I + G^T G)(v_next - v_prev)||,
/// with u evaluated at next.x.
Residuals residuals(const TrackingProblem& problem, const SplitState& prev, const SplitState& next, double gamma);
Residuals residuals(const GroupRegularizer& reg, const Trajectory& u, const Trajectory& v_prev, const SplitState& next,
                    double gamma);

SparsityPattern zero_groups(const GroupRegularizer& reg, const Trajectory& w, double threshold);

/// x^0 from the plain smoother, v^0 = u(x^0), w^0 = G v^0, eta = 0.
SplitState initial_state(const TrackingProblem& problem, const XSolver& solver);

SolveReport run_madmm(const TrackingProblem& problem, const XSolver& solver, const MadmmOptions& opts,
                      std::optional<SplitState> start = std::nullopt);

struct Lemma1Terms {
    double lhs = 0.0;          ///< ||s_{k+1} - s*||_Omega^2
    double rhs = 0.0;          ///< ||s_k - s*||_Omega^2 - ||s_k - s_{k+1}||_Omega^2
    double distance_k = 0.0;   ///< ||s_k - s*||_Omega^2
};

/// Weighting of the v block in Omega.
enum class OmegaForm {
    paper,   ///< gamma I + G^T G
    scaled,  ///< gamma (I + G^T G)
};

/// ||(v, eta)||_Omega^2 summed over the horizon.
double omega_norm_sq(const GroupRegularizer& reg, const Trajectory& v, const Trajectory& eta_bar,
                     const Trajectory& eta_under, double gamma, OmegaForm form);

Lemma1Terms lemma1_gap(const SplitState& k, const SplitState& k1, const SplitState& star, double gamma,
                       const GroupRegularizer& reg, OmegaForm form = OmegaForm::scaled);

}  // namespace splitsmooth
