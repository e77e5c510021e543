#include "splitsmooth/admm.hpp"

#include "splitsmooth/kernels.hpp"

#include <chrono>
#include <cmath>

namespace splitsmooth {

namespace {

std::span<const double> flat(const Trajectory& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(Trajectory& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

void check_shape(const Trajectory& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    require_dims(m.rows() == rows && m.cols() == cols, std::string(name) + " has wrong shape");
}

}  // namespace

void MadmmOptions::validate() const {
    require(gamma > 0.0, "gamma must be positive");
    require(max_iterations >= 1, "max_iterations must be at least 1");
    require(eps_pri > 0.0 && eps_dual > 0.0, "tolerances must be positive");
    require(zero_threshold >= 0.0, "zero threshold must be nonnegative");
}

Vec block_shrink(const Vec& z, double kappa) {
    require(kappa >= 0.0, "shrinkage threshold must be nonnegative");
    const double n = z.norm();
    if (n <= kappa) return Vec::Zero(z.size());
    return (1.0 - kappa / n) * z;
}

Vec update_w(const GroupRegularizer& reg, std::size_t t, const Vec& v_t, const Vec& eta_under_t, double gamma) {
    require(gamma > 0.0, "gamma must be positive");
    require_dims(eta_under_t.size() == reg.stacked_rows(), "eta partition does not match the groups");
    const Vec z = reg.stacked(t) * v_t - eta_under_t / gamma;
    Vec w(z.size());
    for (std::size_t g = 0; g < reg.group_count(); ++g) {
        const auto off = reg.group_offset(g);
        const auto len = reg.group_size(g);
        w.segment(off, len) = block_shrink(z.segment(off, len), reg.weight(g) / gamma);
    }
    return w;
}

Vec update_v(const GroupRegularizer& reg, std::size_t t, const Vec& u_t, const Vec& w_t, const Vec& eta_bar_t,
             const Vec& eta_under_t, double gamma) {
    require(gamma > 0.0, "gamma must be positive");
    Vec rhs = u_t + eta_bar_t / gamma;
    if (reg.stacked_rows() == 0) return rhs;
    rhs.noalias() += reg.stacked(t).transpose() * (w_t + eta_under_t / gamma);
    return reg.v_factor(t).solve(rhs);
}

std::pair<Vec, Vec> update_dual(const GroupRegularizer& reg, std::size_t t, const Vec& u_t, const Vec& w_t,
                                const Vec& v_t, const Vec& eta_bar_t, const Vec& eta_under_t, double gamma) {
    Vec head = eta_bar_t + gamma * (u_t - v_t);
    Vec tail = eta_under_t;
    if (reg.stacked_rows() > 0) tail += gamma * (w_t - reg.stacked(t) * v_t);
    return {std::move(head), std::move(tail)};
}

Trajectory apply_groups(const GroupRegularizer& reg, const Trajectory& v) {
    const Eigen::Index P = reg.stacked_rows();
    if (P == 0) return Trajectory(0, v.cols());
    if (reg.time_invariant()) return reg.stacked(0) * v;
    Trajectory out(P, v.cols());
    for (Eigen::Index t = 0; t < v.cols(); ++t) out.col(t).noalias() = reg.stacked(static_cast<std::size_t>(t)) * v.col(t);
    return out;
}

Trajectory update_w_all(const GroupRegularizer& reg, const Trajectory& v, const Trajectory& eta_under, double gamma) {
    require(gamma > 0.0, "gamma must be positive");
    const Eigen::Index P = reg.stacked_rows();
    check_shape(eta_under, P, v.cols(), "eta_under");
    Trajectory z = apply_groups(reg, v);
    if (P == 0) return z;
    kernels::sub_scaled(flat(z), flat(eta_under), 1.0 / gamma, flat(z));

    std::vector<kernels::Index> offsets(reg.group_count());
    std::vector<kernels::Index> sizes(reg.group_count());
    std::vector<double> kappa(reg.group_count());
    for (std::size_t g = 0; g < reg.group_count(); ++g) {
        offsets[g] = reg.group_offset(g);
        sizes[g] = reg.group_size(g);
        kappa[g] = reg.weight(g) / gamma;
    }
    Trajectory w(P, v.cols());
    kernels::group_shrink(flat(z), flat(w), offsets, sizes, kappa, static_cast<std::size_t>(P));
    return w;
}

Trajectory update_v_all(const GroupRegularizer& reg, const Trajectory& u, const Trajectory& w,
                        const Trajectory& eta_bar, const Trajectory& eta_under, double gamma) {
    require(gamma > 0.0, "gamma must be positive");
    const Eigen::Index P = reg.stacked_rows();
    check_shape(eta_bar, u.rows(), u.cols(), "eta_bar");
    check_shape(w, P, u.cols(), "w");
    check_shape(eta_under, P, u.cols(), "eta_under");
    Trajectory rhs(u.rows(), u.cols());
    kernels::sub_scaled(flat(u), flat(eta_bar), -1.0 / gamma, flat(rhs));
    if (P == 0) return rhs;
    Trajectory tail(P, u.cols());
    kernels::sub_scaled(flat(w), flat(eta_under), -1.0 / gamma, flat(tail));
    if (reg.time_invariant()) {
        rhs.noalias() += reg.stacked(0).transpose() * tail;
        return reg.v_factor(0).solve(rhs);
    }
    for (Eigen::Index t = 0; t < u.cols(); ++t) {
        const auto s = static_cast<std::size_t>(t);
        rhs.col(t) = reg.v_factor(s).solve(rhs.col(t) + reg.stacked(s).transpose() * tail.col(t));
    }
    return rhs;
}

void update_dual_all(const Trajectory& u, const Trajectory& w, const Trajectory& v, const Trajectory& Gv,
                     Trajectory& eta_bar, Trajectory& eta_under, double gamma) {
    check_shape(eta_bar, u.rows(), u.cols(), "eta_bar");
    check_shape(v, u.rows(), u.cols(), "v");
    kernels::scaled_diff_accumulate(gamma, flat(u), flat(v), flat(eta_bar));
    if (w.rows() == 0) return;
    check_shape(eta_under, w.rows(), w.cols(), "eta_under");
    kernels::scaled_diff_accumulate(gamma, flat(w), flat(Gv), flat(eta_under));
}

Residuals residuals(const GroupRegularizer& reg, const Trajectory& u, const Trajectory& v_prev, const SplitState& next,
                    double gamma) {
    check_shape(next.v, u.rows(), u.cols(), "v");
    check_shape(v_prev, u.rows(), u.cols(), "previous v");
    const Trajectory Gv = apply_groups(reg, next.v);
    double pri = kernels::squared_distance(flat(u), flat(next.v));
    if (reg.stacked_rows() > 0) pri += kernels::squared_distance(flat(next.w), flat(Gv));

    Trajectory dv = next.v - v_prev;
    if (reg.stacked_rows() > 0) {
        if (reg.time_invariant()) {
            const Mat GtG = reg.stacked(0).transpose() * reg.stacked(0);
            dv += GtG * (next.v - v_prev);
        } else {
            for (Eigen::Index t = 0; t < dv.cols(); ++t) {
                const Mat& G = reg.stacked(static_cast<std::size_t>(t));
                dv.col(t) += G.transpose() * (G * (next.v.col(t) - v_prev.col(t)));
            }
        }
    }
    return {std::sqrt(pri), gamma * dv.norm()};
}

Residuals residuals(const TrackingProblem& problem, const SplitState& prev, const SplitState& next, double gamma) {
    return residuals(problem.regularizer(), constraint_lhs(problem, next.x), prev.v, next, gamma);
}

SparsityPattern zero_groups(const GroupRegularizer& reg, const Trajectory& w, double threshold) {
    SparsityPattern out(static_cast<Eigen::Index>(reg.group_count()), w.cols());
    for (Eigen::Index t = 0; t < w.cols(); ++t) {
        for (std::size_t g = 0; g < reg.group_count(); ++g) {
            out(static_cast<Eigen::Index>(g), t) =
                w.col(t).segment(reg.group_offset(g), reg.group_size(g)).norm() <= threshold;
        }
    }
    return out;
}

SplitState initial_state(const TrackingProblem& problem, const XSolver& solver) {
    const std::size_t T = problem.horizon();
    const Eigen::Index nx = problem.state_dim();
    const auto& reg = problem.regularizer();
    SplitState s = SplitState::zeros(T, nx, reg.stacked_rows());
    const Trajectory warm = problem.m1().replicate(1, static_cast<Eigen::Index>(T));
    s.x = solver(problem, s.v, s.eta_bar, 0.0, warm);
    s.v = constraint_lhs(problem, s.x);
    s.w = apply_groups(reg, s.v);
    return s;
}

SolveReport run_madmm(const TrackingProblem& problem, const XSolver& solver, const MadmmOptions& opts,
                      std::optional<SplitState> start) {
    opts.validate();
    const double gamma = opts.gamma;
    const auto& reg = problem.regularizer();
    SplitState s = start ? std::move(*start) : initial_state(problem, solver);
    const auto T = static_cast<Eigen::Index>(problem.horizon());
    check_shape(s.x, problem.state_dim(), T, "x");
    check_shape(s.v, problem.state_dim(), T, "v");
    check_shape(s.eta_bar, problem.state_dim(), T, "eta_bar");
    check_shape(s.w, reg.stacked_rows(), T, "w");
    check_shape(s.eta_under, reg.stacked_rows(), T, "eta_under");

    SolveReport report;
    using clock = std::chrono::steady_clock;
    for (int k = 0; k < opts.max_iterations; ++k) {
        const auto t0 = clock::now();
        Trajectory x;
        try {
            x = solver(problem, s.v, s.eta_bar, gamma, s.x);
        } catch (const SingularSystemError& e) {
            throw SingularSystemError(std::string(e.what()) + " (iteration " + std::to_string(k + 1) + ")");
        } catch (const std::exception& e) {
            throw SolverError(e.what(), k + 1);
        }
        const Trajectory u = constraint_lhs(problem, x);
        Trajectory w = update_w_all(reg, s.v, s.eta_under, gamma);
        Trajectory v = update_v_all(reg, u, w, s.eta_bar, s.eta_under, gamma);
        const Trajectory Gv = apply_groups(reg, v);
        update_dual_all(u, w, v, Gv, s.eta_bar, s.eta_under, gamma);

        const Trajectory v_prev = std::move(s.v);
        s.x = std::move(x);
        s.w = std::move(w);
        s.v = std::move(v);
        const Residuals r = residuals(reg, u, v_prev, s, gamma);
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();

        report.primal_residual.push_back(r.primal);
        report.dual_residual.push_back(r.dual);
        report.seconds.push_back(secs);
        if (opts.record_objective) report.objective.push_back(objective(problem, s.x));
        if (opts.record_lagrangian) report.lagrangian.push_back(augmented_lagrangian(problem, s, gamma));
        report.iterations = k + 1;
        if (r.primal <= opts.eps_pri && r.dual <= opts.eps_dual) {
            report.converged = true;
            if (opts.early_stop) break;
        }
    }
    report.x = s.x;
    report.zero_groups = zero_groups(reg, s.w, opts.zero_threshold);
    report.state = std::move(s);
    return report;
}

double omega_norm_sq(const GroupRegularizer& reg, const Trajectory& v, const Trajectory& eta_bar,
                     const Trajectory& eta_under, double gamma, OmegaForm form) {
    require(gamma > 0.0, "gamma must be positive");
    const Trajectory Gv = apply_groups(reg, v);
    const double vv = v.squaredNorm();
    const double gg = Gv.squaredNorm();
    const double v_part = form == OmegaForm::paper ? gamma * vv + gg : gamma * (vv + gg);
    return v_part + (eta_bar.squaredNorm() + eta_under.squaredNorm()) / gamma;
}

Lemma1Terms lemma1_gap(const SplitState& k, const SplitState& k1, const SplitState& star, double gamma,
                       const GroupRegularizer& reg, OmegaForm form) {
    auto dist = [&](const SplitState& a, const SplitState& b) {
        return omega_norm_sq(reg, a.v - b.v, a.eta_bar - b.eta_bar, a.eta_under - b.eta_under, gamma, form);
    };
    Lemma1Terms out;
    out.distance_k = dist(k, star);
    out.lhs = dist(k1, star);
    out.rhs = out.distance_k - dist(k, k1);
    return out;
}

}  // namespace splitsmooth
