#include "splitsmooth/batch.hpp"

#include "splitsmooth/smoothers.hpp"

#include <cmath>

namespace splitsmooth {

void LMConfig::validate(Eigen::Index state_dim, std::size_t horizon) const {
    require(lambda0 >= 0.0, "lambda0 must be nonnegative");
    require(alpha > 1.0, "alpha must exceed 1");
    require(max_iterations >= 1, "LM iteration cap must be at least 1");
    require(step_floor >= 0.0, "step floor must be nonnegative");
    require(max_rejections >= 1, "rejection cap must be at least 1");
    if (S.empty()) return;
    require_dims(S.covers(horizon), "S must hold 1 or T entries");
    for (const Mat& s : S.values()) {
        require_dims(s.rows() == state_dim && s.cols() == state_dim, "S_t must be N_x by N_x");
        factor_spd(s, "S_t");
    }
}

Mat LMConfig::S_at(std::size_t t, Eigen::Index state_dim) const {
    if (S.empty()) return Mat::Identity(state_dim, state_dim);
    return S[t];
}

namespace {

Mat inverse_spd(const Mat& m, const std::string& name) {
    return factor_spd(m, name).solve(Mat::Identity(m.rows(), m.cols()));
}

Vec flatten(const Trajectory& x) { return Eigen::Map<const Vec>(x.data(), x.size()); }

Trajectory unflatten(const Vec& v, Eigen::Index rows) {
    return Eigen::Map<const Trajectory>(v.data(), rows, v.size() / rows);
}

}  // namespace

StackedProblem stack_problem(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar,
                             double gamma, const Trajectory* nominal) {
    require(gamma >= 0.0, "gamma must be nonnegative");
    const std::size_t T = problem.horizon();
    const Eigen::Index nx = problem.state_dim();
    const Eigen::Index ny = problem.meas_dim();
    const auto Ti = static_cast<Eigen::Index>(T);
    require_dims(v.rows() == nx && v.cols() == Ti, "v has wrong shape");
    require_dims(eta_bar.rows() == nx && eta_bar.cols() == Ti, "eta_bar has wrong shape");

    std::optional<AffineModel> lin;
    if (!problem.is_affine()) {
        if (nominal == nullptr) throw InvalidArgument("stacking a nonlinear problem needs a nominal trajectory");
        lin.emplace(linearize(problem.nonlinear(), *nominal));
    }
    const AffineModel& model = lin ? *lin : problem.affine();
    const SparsityTarget target = resolve_target(problem, nominal);

    const Eigen::Index n = nx * Ti;
    StackedProblem s;
    s.state_dim = nx;
    s.horizon = T;
    s.y = flatten(problem.measurements());
    s.v = flatten(v);
    s.eta_bar = flatten(eta_bar);
    s.e = Vec::Zero(ny * Ti);
    s.m = Vec::Zero(n);
    s.b = Vec::Zero(n);
    s.d = Vec::Zero(n);
    s.H = Mat::Zero(ny * Ti, n);
    s.R = Mat::Zero(ny * Ti, ny * Ti);
    s.Q = Mat::Zero(n, n);
    s.A = Mat::Identity(n, n);
    s.Phi = Mat::Identity(n, n);
    s.m.head(nx) = model.m1();
    s.d.head(nx) = model.m1();
    s.Q.topLeftCorner(nx, nx) = model.P1();
    for (Eigen::Index t = 0; t < Ti; ++t) {
        const auto st = static_cast<std::size_t>(t);
        s.H.block(t * ny, t * nx, ny, nx) = model.H(st);
        s.R.block(t * ny, t * ny, ny, ny) = model.R(st);
        s.e.segment(t * ny, ny) = model.e(st);
        if (t == 0) continue;
        s.Q.block(t * nx, t * nx, nx, nx) = model.Q(st);
        s.A.block(t * nx, (t - 1) * nx, nx, nx) = -model.A(st);
        s.b.segment(t * nx, nx) = model.b(st);
        s.Phi.block(t * nx, (t - 1) * nx, nx, nx) = -target.B[st];
        s.d.segment(t * nx, nx) = target.d[st];
    }
    return s;
}

Trajectory batch_x_affine(const StackedProblem& s, double gamma) {
    require(gamma >= 0.0, "gamma must be nonnegative");
    Eigen::LLT<Mat> Rf(s.R);
    if (Rf.info() != Eigen::Success) throw SingularSystemError("stacked R is not positive definite");
    Eigen::LLT<Mat> Qf(s.Q);
    if (Qf.info() != Eigen::Success) throw SingularSystemError("stacked Q is not positive definite");

    // L^-1 H and L^-1 A so that the normal matrix is a sum of Gram matrices.
    const Mat WH = Rf.matrixL().solve(s.H);
    const Mat WA = Qf.matrixL().solve(s.A);
    const Eigen::Index n = s.A.rows();
    Mat N = Mat::Zero(n, n);
    N.selfadjointView<Eigen::Lower>().rankUpdate(WH.transpose());
    N.selfadjointView<Eigen::Lower>().rankUpdate(WA.transpose());
    if (gamma > 0.0) N.selfadjointView<Eigen::Lower>().rankUpdate(s.Phi.transpose(), gamma);

    Vec rhs = WH.transpose() * Rf.matrixL().solve(s.y - s.e);
    rhs.noalias() += WA.transpose() * Qf.matrixL().solve(s.m + s.b);
    if (gamma > 0.0) rhs.noalias() += s.Phi.transpose() * (gamma * (s.d + s.v) - s.eta_bar);

    Eigen::LLT<Mat> Nf(N.selfadjointView<Eigen::Lower>());
    if (Nf.info() != Eigen::Success) throw SingularSystemError("normal matrix H'R^-1H + A'Q^-1A + gamma Phi'Phi is singular");
    return unflatten(Nf.solve(rhs), s.state_dim);
}

NormalSystem normal_system(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                           const Trajectory& eta_bar, double gamma) {
    const auto& f = problem.as_nonlinear();
    const std::size_t T = problem.horizon();
    const Eigen::Index nx = problem.state_dim();
    const Eigen::Index n = nx * static_cast<Eigen::Index>(T);
    const auto& y = problem.measurements();
    const auto& reg = problem.regularizer();

    Mat N = Mat::Zero(n, n);
    Vec g = Vec::Zero(n);
    auto add_block = [&](Eigen::Index r, Eigen::Index c, const Mat& m) { N.block(r * nx, c * nx, nx, nx) += m; };

    // Measurements.
    for (std::size_t t = 0; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        const Mat J = f.measurement_jacobian(x.col(c), t);
        const Mat Rinv = inverse_spd(f.R(t), "R_t");
        add_block(c, c, J.transpose() * Rinv * J);
        g.segment(c * nx, nx) -= J.transpose() * Rinv * (y.col(c) - f.measurement(x.col(c), t));
    }
    // Prior and dynamics.
    {
        const Mat Pinv = inverse_spd(f.P1(), "P1");
        add_block(0, 0, Pinv);
        g.head(nx) += Pinv * (x.col(0) - f.m1());
    }
    for (std::size_t t = 1; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        const Mat Ja = f.transition_jacobian(x.col(c - 1), t);
        const Mat Qinv = inverse_spd(f.Q(t), "Q_t");
        const Vec r = x.col(c) - f.transition(x.col(c - 1), t);
        add_block(c, c, Qinv);
        add_block(c, c - 1, -Qinv * Ja);
        add_block(c - 1, c, -Ja.transpose() * Qinv);
        add_block(c - 1, c - 1, Ja.transpose() * Qinv * Ja);
        g.segment(c * nx, nx) += Qinv * r;
        g.segment((c - 1) * nx, nx) -= Ja.transpose() * Qinv * r;
    }
    if (gamma == 0.0) return {std::move(N), std::move(g)};

    // Splitting term gamma/2 ||u(x) - v + eta_bar / gamma||^2.
    const Trajectory u = constraint_lhs(problem, x);
    const Mat I = Mat::Identity(nx, nx);
    for (std::size_t t = 0; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        const Vec r = u.col(c) - v.col(c) + eta_bar.col(c) / gamma;
        add_block(c, c, gamma * I);
        g.segment(c * nx, nx) += gamma * r;
        if (t == 0 || reg.mode() == SparsityMode::state) continue;
        const Mat B = reg.mode() == SparsityMode::custom ? Mat(reg.custom_target().B[t])
                                                          : f.transition_jacobian(x.col(c - 1), t);
        add_block(c, c - 1, -gamma * B);
        add_block(c - 1, c, -gamma * B.transpose());
        add_block(c - 1, c - 1, gamma * B.transpose() * B);
        g.segment((c - 1) * nx, nx) -= gamma * B.transpose() * r;
    }
    return {std::move(N), std::move(g)};
}

double block_rcond_estimate(const Mat& N, Eigen::Index nx) {
    const Eigen::Index blocks = N.rows() / nx;
    Eigen::LLT<Mat> llt(N);
    if (llt.info() != Eigen::Success) return 0.0;
    double inv_max = 0.0;
    double n_max = 0.0;
    for (Eigen::Index t = 0; t < blocks; ++t) {
        Mat E = Mat::Zero(N.rows(), nx);
        E.middleRows(t * nx, nx).setIdentity();
        const Mat col = llt.solve(E);
        const Mat inv_tt = symmetrize(col.middleRows(t * nx, nx));
        const Mat n_tt = symmetrize(N.block(t * nx, t * nx, nx, nx));
        inv_max = std::max(inv_max, Eigen::SelfAdjointEigenSolver<Mat>(inv_tt, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
        n_max = std::max(n_max, Eigen::SelfAdjointEigenSolver<Mat>(n_tt, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
    }
    if (inv_max <= 0.0 || n_max <= 0.0) return 0.0;
    return 1.0 / (inv_max * n_max);
}

Trajectory batch_gn_step(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                         const Trajectory& eta_bar, double gamma, const GnStepOptions& opts) {
    const NormalSystem sys = normal_system(problem, x, v, eta_bar, gamma);
    Eigen::LLT<Mat> llt(sys.N);
    if (llt.info() != Eigen::Success) {
        throw SingularSystemError("Gauss-Newton normal matrix is singular; use the Levenberg-Marquardt solver");
    }
    if (opts.check_conditioning) {
        const double rc = block_rcond_estimate(sys.N, problem.state_dim());
        if (rc < opts.rcond_floor) {
            throw SingularSystemError("Gauss-Newton normal matrix is numerically singular (rcond estimate " +
                                      std::to_string(rc) + "); use the Levenberg-Marquardt solver");
        }
    }
    return x - unflatten(llt.solve(sys.gradient), problem.state_dim());
}

Trajectory batch_lm_step(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                         const Trajectory& eta_bar, double gamma, const LMConfig& cfg, double lambda) {
    require(lambda >= 0.0, "lambda must be nonnegative");
    if (lambda == 0.0) return batch_gn_step(problem, x, v, eta_bar, gamma, GnStepOptions{0.0, false});
    NormalSystem sys = normal_system(problem, x, v, eta_bar, gamma);
    const Eigen::Index nx = problem.state_dim();
    for (std::size_t t = 0; t < problem.horizon(); ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        sys.N.block(c * nx, c * nx, nx, nx) += lambda * inverse_spd(cfg.S_at(t, nx), "S_t");
    }
    Eigen::LLT<Mat> llt(sys.N);
    if (llt.info() != Eigen::Success) throw SingularSystemError("damped normal matrix is not positive definite");
    return x - unflatten(llt.solve(sys.gradient), nx);
}

InnerTrace batch_nonlinear_solve(const TrackingProblem& problem, const Trajectory& v, const Trajectory& eta_bar,
                                 double gamma, NonlinearMethod method, const LMConfig& cfg, const Trajectory& x0,
                                 const GnStepOptions& gn) {
    cfg.validate(problem.state_dim(), problem.horizon());
    InnerTrace tr;
    tr.x = x0;
    double theta = x_subproblem_cost(problem, tr.x, v, eta_bar, gamma);
    tr.theta.push_back(theta);
    // theta is quadratic for affine models: one undamped step is exact.
    const bool affine = problem.is_affine();
    double lambda = method == NonlinearMethod::gn || affine ? 0.0 : cfg.lambda0;
    int rejections = 0;
    while (tr.accepted_steps < cfg.max_iterations) {
        Trajectory next = method == NonlinearMethod::gn
                              ? batch_gn_step(problem, tr.x, v, eta_bar, gamma, gn)
                              : batch_lm_step(problem, tr.x, v, eta_bar, gamma, cfg, lambda);
        const double step = (next - tr.x).norm() / (1.0 + tr.x.norm());
        const double theta_next = x_subproblem_cost(problem, next, v, eta_bar, gamma);
        tr.proposals.push_back(next);
        tr.lambdas.push_back(lambda);
        const bool accept = method == NonlinearMethod::gn || lambda == 0.0 || theta_next < theta;
        tr.accepted.push_back(accept);
        if (accept) {
            tr.x = std::move(next);
            theta = theta_next;
            tr.theta.push_back(theta);
            ++tr.accepted_steps;
            rejections = 0;
            lambda /= cfg.alpha;
            if (affine || step <= (method == NonlinearMethod::gn ? 1e-8 : cfg.step_floor)) break;
        } else {
            lambda *= cfg.alpha;
            if (++rejections >= cfg.max_rejections || step <= cfg.step_floor) break;
        }
    }
    return tr;
}

}  // namespace splitsmooth
