#include "splitsmooth/smoothers.hpp"

#include <cmath>

namespace splitsmooth {

FusedStep fuse_dynamics(const Mat& A, const Vec& b, const Mat& Q, const Mat& B, const Vec& d, const Vec& v,
                        const Vec& eta_bar, double gamma) {
    require(gamma >= 0.0, "gamma must be nonnegative");
    if (gamma == 0.0) return {A, b, Q};
    // (Q^-1 + gamma I)^-1 = (I + gamma Q)^-1 Q, so no inverse of Q is formed.
    const Eigen::Index n = Q.rows();
    const Eigen::PartialPivLU<Mat> lu(Mat::Identity(n, n) + gamma * Q);
    FusedStep out;
    out.Q = symmetrize(lu.solve(Q));
    out.A = lu.solve(A + gamma * Q * B);
    out.b = lu.solve(b + Q * (gamma * (d + v) - eta_bar));
    return out;
}

std::pair<Vec, Mat> fuse_prior(const Vec& m1, const Mat& P1, const Vec& v1, const Vec& eta_bar1, double gamma) {
    require(gamma >= 0.0, "gamma must be nonnegative");
    if (gamma == 0.0) return {m1, P1};
    const Eigen::Index n = P1.rows();
    const Eigen::PartialPivLU<Mat> lu(Mat::Identity(n, n) + gamma * P1);
    // P~ (P1^-1 m1 + gamma m1 + gamma v1 - eta1) = (I + gamma P1)^-1 (m1 + P1 (gamma m1 + gamma v1 - eta1))
    Vec m = lu.solve(m1 + P1 * (gamma * (m1 + v1) - eta_bar1));
    Mat P = symmetrize(lu.solve(P1));
    return {std::move(m), std::move(P)};
}

namespace {

bool all_constant(const AffineModel& m, const SparsityTarget& t) {
    return m.A_series().constant() && m.Q_series().constant() && m.b_series().constant() && t.B.constant() &&
           t.d.constant();
}

}  // namespace

FusedModel fuse_model(const AffineModel& model, const SparsityTarget& target, const Trajectory& v,
                      const Trajectory& eta_bar, double gamma) {
    require(gamma >= 0.0, "gamma must be nonnegative");
    const std::size_t T = model.horizon();
    const Eigen::Index nx = model.state_dim();
    const auto Ti = static_cast<Eigen::Index>(T);
    require_dims(v.rows() == nx && v.cols() == Ti, "v has wrong shape");
    require_dims(eta_bar.rows() == nx && eta_bar.cols() == Ti, "eta_bar has wrong shape");

    FusedModel f;
    f.H = model.H_series();
    f.e = model.e_series();
    f.R = model.R_series();

    if (gamma == 0.0) {
        f.A = model.A_series();
        f.Q = model.Q_series();
        f.m1 = model.m1();
        f.P1 = model.P1();
        f.b.resize(nx, Ti);
        if (model.b_series().constant()) {
            f.b.colwise() = model.b(0);
        } else {
            for (Eigen::Index t = 0; t < Ti; ++t) f.b.col(t) = model.b(static_cast<std::size_t>(t));
        }
        return f;
    }

    std::tie(f.m1, f.P1) = fuse_prior(model.m1(), model.P1(), v.col(0), eta_bar.col(0), gamma);
    const Mat I = Mat::Identity(nx, nx);

    // Splitting target c_t = d_t + v_t - eta_bar_t / gamma.
    Trajectory c = v - eta_bar / gamma;
    bool coupled = false;

    if (all_constant(model, target)) {
        const Mat& A = model.A(1 % T);
        const Mat& Q = model.Q(1 % T);
        const Mat& B = target.B[1 % T];
        const Vec& b = model.b(1 % T);
        const Vec& d = target.d[1 % T];
        const Eigen::PartialPivLU<Mat> lu(I + gamma * Q);
        f.Q = StepSeries<Mat>(symmetrize(lu.solve(Q)));
        f.A = StepSeries<Mat>(lu.solve(A + gamma * Q * B));
        const Vec base = lu.solve(b + gamma * Q * d);
        const Mat gQ = lu.solve(gamma * Q);
        f.b.noalias() = gQ * c;
        f.b.colwise() += base;
        c.colwise() += d;
        const Mat C = A - B;
        if (C.cwiseAbs().maxCoeff() > 0.0) {
            coupled = true;
            f.C = StepSeries<Mat>(C);
            f.Qc = StepSeries<Mat>(Mat(Q + I / gamma));
            c.colwise() -= b;
        }
    } else {
        std::vector<Mat> As(T, Mat::Zero(nx, nx));
        std::vector<Mat> Qs(T, I);
        std::vector<Mat> Cs(T, Mat::Zero(nx, nx));
        std::vector<Mat> Qcs(T, I);
        f.b = Trajectory::Zero(nx, Ti);
        for (std::size_t t = 1; t < T; ++t) {
            const auto col = static_cast<Eigen::Index>(t);
            const FusedStep s = fuse_dynamics(model.A(t), model.b(t), model.Q(t), target.B[t], target.d[t],
                                              v.col(col), eta_bar.col(col), gamma);
            As[t] = s.A;
            Qs[t] = s.Q;
            f.b.col(col) = s.b;
            Cs[t] = model.A(t) - target.B[t];
            Qcs[t] = model.Q(t) + I / gamma;
            c.col(col) += target.d[t] - model.b(t);
            if (Cs[t].cwiseAbs().maxCoeff() > 0.0) coupled = true;
        }
        f.A = StepSeries<Mat>(std::move(As));
        f.Q = StepSeries<Mat>(std::move(Qs));
        if (coupled) {
            f.C = StepSeries<Mat>(std::move(Cs));
            f.Qc = StepSeries<Mat>(std::move(Qcs));
        }
    }
    if (coupled) f.c = std::move(c);
    return f;
}

void add_damping(FusedModel& fused, const Trajectory& x, const LMConfig& cfg, double lambda) {
    require(lambda > 0.0, "damping requires lambda > 0");
    const Eigen::Index nx = fused.state_dim();
    fused.z = x;
    if (cfg.S.empty()) {
        fused.Sigma = StepSeries<Mat>(Mat(Mat::Identity(nx, nx) / lambda));
        return;
    }
    std::vector<Mat> sig;
    sig.reserve(cfg.S.stored());
    for (const Mat& s : cfg.S.values()) sig.push_back(s / lambda);
    fused.Sigma = StepSeries<Mat>(std::move(sig));
}

// ---------------------------------------------------------------------------
// Augmented Kalman smoother
// ---------------------------------------------------------------------------

namespace {

/// Measurement update of (m, P) with z = H x + noise(R). Workspaces are
/// sized on first use and reused afterwards.
struct Updater {
    Mat PHt, K, S, HP;
    Vec innov;
    Eigen::LLT<Mat> llt;

    void apply(Vec& m, Mat& P, const Mat& H, const Eigen::Ref<const Vec>& z, const Mat& R, std::size_t t) {
        PHt.noalias() = P * H.transpose();
        S = R;
        S.noalias() += H * PHt;
        llt.compute(S);
        if (llt.info() != Eigen::Success) {
            throw SingularSystemError("innovation covariance is not positive definite at step " + std::to_string(t));
        }
        innov = z;
        innov.noalias() -= H * m;
        // K^T = S^-1 (P H^T)^T
        K = PHt.transpose();
        llt.solveInPlace(K);
        m.noalias() += K.transpose() * innov;
        P.noalias() -= PHt * K;
    }

    /// H = I.
    void apply_identity(Vec& m, Mat& P, const Eigen::Ref<const Vec>& z, const Mat& R, std::size_t t) {
        S = P + R;
        llt.compute(S);
        if (llt.info() != Eigen::Success) {
            throw SingularSystemError("pseudo-measurement covariance is not positive definite at step " +
                                      std::to_string(t));
        }
        innov = z - m;
        K = P;  // symmetric, so K^T = S^-1 P
        llt.solveInPlace(K);
        m.noalias() += K.transpose() * innov;
        P -= P * K;  // P appears on both sides, so no noalias
    }
};

double max_eigenvalue(const Mat& P) {
    return Eigen::SelfAdjointEigenSolver<Mat>(symmetrize(P), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace

const Trajectory& augmented_ks(const FusedModel& f, const Trajectory& y, SmootherPass& pass) {
    const std::size_t T = f.horizon();
    const Eigen::Index nx = f.state_dim();
    const auto Ti = static_cast<Eigen::Index>(T);
    require(T >= 1, "empty horizon");
    require_dims(y.cols() == Ti, "measurement count does not match the fused model");
    require_dims(f.A.covers(T) && f.Q.covers(T) && f.H.covers(T) && f.R.covers(T), "fused series length mismatch");
    require_dims(!f.has_pseudo() || (f.z.cols() == Ti && f.Sigma.covers(T)), "pseudo-measurement length mismatch");

    pass.filtered_mean.resize(nx, Ti);
    pass.filtered_cov.resize(nx, nx * Ti);
    pass.smoothed_mean.resize(nx, Ti);
    const bool need_cov = pass.keep_smoothed_cov || pass.track_max_eigenvalue;
    if (pass.keep_smoothed_cov) pass.smoothed_cov.resize(nx, nx * Ti);
    pass.max_smoothed_eigenvalue = 0.0;

    const bool has_e = !f.e.empty();
    Updater up;
    Vec m(nx);
    Mat P(nx, nx);
    Mat AP(nx, nx);
    Vec zy;

    for (std::size_t t = 0; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        if (t == 0) {
            m = f.m1;
            P = f.P1;
        } else {
            const Mat& A = f.A[t];
            m.noalias() = A * pass.filtered_mean.col(c - 1);
            m += f.b.col(c);
            AP.noalias() = A * pass.filtered_cov.middleCols((c - 1) * nx, nx);
            P = f.Q[t];
            P.noalias() += AP * A.transpose();
        }
        if (f.H[t].rows() > 0) {
            zy = y.col(c);
            if (has_e) zy -= f.e[t];
            up.apply(m, P, f.H[t], zy, f.R[t], t);
        }
        if (f.has_pseudo()) up.apply_identity(m, P, f.z.col(c), f.Sigma[t], t);
        if (f.has_coupling() && t + 1 < T) up.apply(m, P, f.C[t + 1], f.c.col(c + 1), f.Qc[t + 1], t);
        pass.filtered_mean.col(c) = m;
        pass.filtered_cov.middleCols(c * nx, nx) = 0.5 * (P + P.transpose());
    }

    // Rauch-Tung-Striebel backward pass; predictions are recomputed rather than stored.
    pass.smoothed_mean.col(Ti - 1) = pass.filtered_mean.col(Ti - 1);
    Mat Ps = pass.filtered_cov.middleCols((Ti - 1) * nx, nx);
    if (pass.keep_smoothed_cov) pass.smoothed_cov.middleCols((Ti - 1) * nx, nx) = Ps;
    if (pass.track_max_eigenvalue) pass.max_smoothed_eigenvalue = max_eigenvalue(Ps);

    Mat Pp(nx, nx), Gt(nx, nx), D(nx, nx), GD(nx, nx);
    Vec mp(nx);
    Eigen::LLT<Mat> llt(nx);
    for (Eigen::Index c = Ti - 2; c >= 0; --c) {
        const auto t1 = static_cast<std::size_t>(c + 1);
        const Mat& A = f.A[t1];
        const auto Pt = pass.filtered_cov.middleCols(c * nx, nx);
        AP.noalias() = A * Pt;
        Pp = f.Q[t1];
        Pp.noalias() += AP * A.transpose();
        mp.noalias() = A * pass.filtered_mean.col(c);
        mp += f.b.col(c + 1);
        llt.compute(Pp);
        if (llt.info() != Eigen::Success) {
            throw SingularSystemError("predicted covariance is not positive definite at step " +
                                      std::to_string(c + 1));
        }
        // G^T = Pp^-1 A P_t
        Gt = AP;
        llt.solveInPlace(Gt);
        pass.smoothed_mean.col(c) = pass.filtered_mean.col(c);
        pass.smoothed_mean.col(c).noalias() += Gt.transpose() * (pass.smoothed_mean.col(c + 1) - mp);
        if (!need_cov) continue;
        D = Ps - Pp;
        GD.noalias() = Gt.transpose() * D;
        Ps = Pt;
        Ps.noalias() += GD * Gt;
        Ps = 0.5 * (Ps + Ps.transpose()).eval();
        if (pass.keep_smoothed_cov) pass.smoothed_cov.middleCols(c * nx, nx) = Ps;
        if (pass.track_max_eigenvalue) pass.max_smoothed_eigenvalue = std::max(pass.max_smoothed_eigenvalue, max_eigenvalue(Ps));
    }
    return pass.smoothed_mean;
}

Trajectory augmented_ks(const FusedModel& fused, const Trajectory& y) {
    SmootherPass pass;
    return augmented_ks(fused, y, pass);
}

// ---------------------------------------------------------------------------
// Iterated smoothers
// ---------------------------------------------------------------------------

AffineModel linearize(const NonlinearModel& model, const Trajectory& nominal) {
    const std::size_t T = model.horizon();
    const Eigen::Index nx = model.state_dim();
    require_dims(nominal.rows() == nx && static_cast<std::size_t>(nominal.cols()) == T, "nominal has wrong shape");
    std::vector<Mat> A(T, Mat::Zero(nx, nx));
    std::vector<Vec> b(T, Vec::Zero(nx));
    std::vector<Mat> H(T);
    std::vector<Vec> e(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        const Vec xt = nominal.col(c);
        H[t] = model.measurement_jacobian(xt, t);
        e[t] = model.measurement(xt, t) - H[t] * xt;
        if (t == 0) continue;
        const Vec xp = nominal.col(c - 1);
        A[t] = model.transition_jacobian(xp, t);
        b[t] = model.transition(xp, t) - A[t] * xp;
    }
    return AffineModel(T, StepSeries<Mat>(std::move(A)), StepSeries<Vec>(std::move(b)), StepSeries<Mat>(std::move(H)),
                       StepSeries<Vec>(std::move(e)), model.Q_series(), model.R_series(), model.m1(), model.P1());
}

double normal_block_max_eigenvalue(const AffineModel& lin, const SparsityTarget& target, double gamma) {
    const std::size_t T = lin.horizon();
    const Eigen::Index nx = lin.state_dim();
    const Mat I = Mat::Identity(nx, nx);
    double best = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const Mat& H = lin.H(t);
        Mat N = H.transpose() * lin.R_factor(t).solve(H);
        N += t == 0 ? lin.P1_factor().solve(I) : lin.Q_factor(t).solve(I);
        if (gamma > 0.0) N += gamma * I;
        if (t + 1 < T) {
            const Mat& A = lin.A(t + 1);
            N += A.transpose() * lin.Q_factor(t + 1).solve(A);
            if (gamma > 0.0) N += gamma * target.B[t + 1].transpose() * target.B[t + 1];
        }
        best = std::max(best, max_eigenvalue(N));
    }
    return best;
}

LinearizedSubproblem linearize_subproblem(const TrackingProblem& problem, const Trajectory& nominal,
                                          const Trajectory& v, const Trajectory& eta_bar, double gamma) {
    SparsityTarget target = resolve_target(problem, &nominal);
    AffineModel lin = problem.is_affine() ? problem.affine() : linearize(problem.nonlinear(), nominal);
    FusedModel fused = fuse_model(lin, target, v, eta_bar, gamma);
    return {std::move(lin), std::move(target), std::move(fused)};
}

namespace {

double relative_step(const Trajectory& next, const Trajectory& x) { return (next - x).norm() / (1.0 + x.norm()); }

}  // namespace

InnerTrace gn_ieks(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                   const Trajectory& x0, const IeksOptions& opts) {
    require(opts.max_iterations >= 1, "IEKS iteration cap must be at least 1");
    InnerTrace tr;
    tr.x = x0;
    tr.theta.push_back(x_subproblem_cost(problem, tr.x, v, eta_bar, gamma));
    SmootherPass pass;
    pass.track_max_eigenvalue = opts.check_conditioning;
    for (int i = 0; i < opts.max_iterations; ++i) {
        std::optional<LinearizedSubproblem> sub;
        try {
            sub.emplace(linearize_subproblem(problem, tr.x, v, eta_bar, gamma));
            if (opts.fused_hook) opts.fused_hook(sub->fused);
            augmented_ks(sub->fused, problem.measurements(), pass);
        } catch (const SingularSystemError& e) {
            throw SingularSystemError(std::string(e.what()) + " (GN-IEKS iteration " + std::to_string(i + 1) +
                                      "); use the Levenberg-Marquardt solver");
        } catch (const Error& e) {
            throw SolverError(std::string("GN-IEKS: ") + e.what(), i + 1);
        }
        if (opts.check_conditioning) {
            const double nmax = normal_block_max_eigenvalue(sub->model, sub->target, gamma);
            const double rc = pass.max_smoothed_eigenvalue > 0.0 ? 1.0 / (pass.max_smoothed_eigenvalue * nmax) : 0.0;
            if (!(rc >= opts.rcond_floor)) {
                throw SingularSystemError("GN-IEKS linearisation is numerically singular (rcond estimate " +
                                          std::to_string(rc) + ", iteration " + std::to_string(i + 1) +
                                          "); use the Levenberg-Marquardt solver");
            }
        }
        const Trajectory& next = pass.smoothed_mean;
        const double step = relative_step(next, tr.x);
        tr.proposals.push_back(next);
        tr.lambdas.push_back(0.0);
        tr.accepted.push_back(true);
        tr.x = next;
        tr.theta.push_back(x_subproblem_cost(problem, tr.x, v, eta_bar, gamma));
        ++tr.accepted_steps;
        if (problem.is_affine() || step <= opts.tolerance) break;
    }
    return tr;
}

InnerTrace lm_ieks(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar, double gamma,
                   const Trajectory& x0, const LMConfig& cfg, const IeksOptions& opts) {
    cfg.validate(problem.state_dim(), problem.horizon());
    InnerTrace tr;
    tr.x = x0;
    double theta = x_subproblem_cost(problem, tr.x, v, eta_bar, gamma);
    tr.theta.push_back(theta);
    const bool affine = problem.is_affine();
    double lambda = affine ? 0.0 : cfg.lambda0;
    int rejections = 0;
    SmootherPass pass;
    FusedModel base = linearize_subproblem(problem, tr.x, v, eta_bar, gamma).fused;
    while (tr.accepted_steps < cfg.max_iterations) {
        FusedModel fused = base;
        if (lambda > 0.0) add_damping(fused, tr.x, cfg, lambda);
        if (opts.fused_hook) opts.fused_hook(fused);
        try {
            augmented_ks(fused, problem.measurements(), pass);
        } catch (const Error& e) {
            throw SolverError(std::string("LM-IEKS: ") + e.what(), tr.accepted_steps + 1);
        }
        const Trajectory& next = pass.smoothed_mean;
        const double step = relative_step(next, tr.x);
        const double theta_next = x_subproblem_cost(problem, next, v, eta_bar, gamma);
        tr.proposals.push_back(next);
        tr.lambdas.push_back(lambda);
        const bool accept = lambda == 0.0 || theta_next < theta;
        tr.accepted.push_back(accept);
        if (accept) {
            tr.x = next;
            theta = theta_next;
            tr.theta.push_back(theta);
            ++tr.accepted_steps;
            rejections = 0;
            lambda /= cfg.alpha;
            if (affine || step <= cfg.step_floor) break;
            base = linearize_subproblem(problem, tr.x, v, eta_bar, gamma).fused;
        } else {
            lambda *= cfg.alpha;
            if (++rejections >= cfg.max_rejections || step <= cfg.step_floor) break;
        }
    }
    return tr;
}

}  // namespace splitsmooth
