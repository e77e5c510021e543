#include "splitsmooth/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splitsmooth {

namespace {

StepSeries<Eigen::LLT<Mat>> factor_series(const StepSeries<Mat>& series, const std::string& name) {
    std::vector<Eigen::LLT<Mat>> out;
    out.reserve(series.stored());
    for (std::size_t i = 0; i < series.stored(); ++i) {
        out.push_back(factor_spd(series.values()[i], name + "[" + std::to_string(i) + "]"));
    }
    return StepSeries<Eigen::LLT<Mat>>(std::move(out));
}

template <typename T>
void check_series(const StepSeries<T>& s, std::size_t horizon, const std::string& name) {
    require_dims(!s.empty(), name + " is empty");
    require_dims(s.covers(horizon), name + " must hold 1 or T entries");
}

void check_square(const Mat& m, Eigen::Index n, const std::string& name) {
    require_dims(m.rows() == n && m.cols() == n, name + " must be " + std::to_string(n) + "x" + std::to_string(n));
}

}  // namespace

// ---------------------------------------------------------------------------
// AffineModel
// ---------------------------------------------------------------------------

AffineModel::AffineModel(std::size_t horizon, StepSeries<Mat> A, StepSeries<Vec> b, StepSeries<Mat> H,
                         StepSeries<Vec> e, StepSeries<Mat> Q, StepSeries<Mat> R, Vec m1, Mat P1)
    : horizon_(horizon),
      A_(std::move(A)),
      b_(std::move(b)),
      H_(std::move(H)),
      e_(std::move(e)),
      Q_(std::move(Q)),
      R_(std::move(R)),
      m1_(std::move(m1)),
      P1_(std::move(P1)) {
    require_dims(horizon_ >= 1, "horizon must be at least 1");
    const Eigen::Index nx = m1_.size();
    require_dims(nx >= 1, "state dimension must be positive");
    check_series(A_, horizon_, "A");
    check_series(H_, horizon_, "H");
    check_series(Q_, horizon_, "Q");
    check_series(R_, horizon_, "R");
    if (b_.empty()) b_ = StepSeries<Vec>(Vec::Zero(nx));
    const Eigen::Index ny = H_[0].rows();
    if (e_.empty()) e_ = StepSeries<Vec>(Vec::Zero(ny));
    check_series(b_, horizon_, "b");
    check_series(e_, horizon_, "e");
    for (const auto& a : A_.values()) check_square(a, nx, "A_t");
    for (const auto& q : Q_.values()) check_square(q, nx, "Q_t");
    for (const auto& bb : b_.values()) require_dims(bb.size() == nx, "b_t has wrong length");
    for (const auto& h : H_.values()) require_dims(h.rows() == ny && h.cols() == nx, "H_t has inconsistent shape");
    for (const auto& ee : e_.values()) require_dims(ee.size() == ny, "e_t has wrong length");
    for (const auto& r : R_.values()) check_square(r, ny, "R_t");
    check_square(P1_, nx, "P1");
    Qf_ = factor_series(Q_, "Q");
    Rf_ = factor_series(R_, "R");
    P1f_ = factor_spd(P1_, "P1");
}

AffineModel AffineModel::with_horizon(std::size_t horizon) const {
    require(A_.constant() && b_.constant() && H_.constant() && e_.constant() && Q_.constant() && R_.constant(),
            "with_horizon needs a time-invariant model");
    return AffineModel(horizon, A_, b_, H_, e_, Q_, R_, m1_, P1_);
}

// ---------------------------------------------------------------------------
// NonlinearModel
// ---------------------------------------------------------------------------

NonlinearModel::NonlinearModel(std::size_t horizon, Eigen::Index meas_dim, VectorFn transition,
                               JacobianFn transition_jacobian, VectorFn measurement, JacobianFn measurement_jacobian,
                               StepSeries<Mat> Q, StepSeries<Mat> R, Vec m1, Mat P1)
    : horizon_(horizon),
      meas_dim_(meas_dim),
      a_(std::move(transition)),
      Ja_(std::move(transition_jacobian)),
      h_(std::move(measurement)),
      Jh_(std::move(measurement_jacobian)),
      Q_(std::move(Q)),
      R_(std::move(R)),
      m1_(std::move(m1)),
      P1_(std::move(P1)) {
    require_dims(horizon_ >= 1, "horizon must be at least 1");
    require(a_ && Ja_ && h_ && Jh_, "all model callables must be set");
    const Eigen::Index nx = m1_.size();
    require_dims(nx >= 1 && meas_dim_ >= 1, "dimensions must be positive");
    check_series(Q_, horizon_, "Q");
    check_series(R_, horizon_, "R");
    for (const auto& q : Q_.values()) check_square(q, nx, "Q_t");
    for (const auto& r : R_.values()) check_square(r, meas_dim_, "R_t");
    check_square(P1_, nx, "P1");
    Qf_ = factor_series(Q_, "Q");
    Rf_ = factor_series(R_, "R");
    P1f_ = factor_spd(P1_, "P1");
}

NonlinearModel NonlinearModel::with_prior(Vec m1, Mat P1) const {
    return NonlinearModel(horizon_, meas_dim_, a_, Ja_, h_, Jh_, Q_, R_, std::move(m1), std::move(P1));
}

NonlinearModel NonlinearModel::with_horizon(std::size_t horizon) const {
    require(Q_.constant() && R_.constant(), "with_horizon needs constant covariances");
    return NonlinearModel(horizon, meas_dim_, a_, Ja_, h_, Jh_, Q_, R_, m1_, P1_);
}

NonlinearModel as_nonlinear(const AffineModel& model) {
    // Series are shared by value; the lambdas hold their own copies.
    auto A = model.A_series();
    auto b = model.b_series();
    auto H = model.H_series();
    auto e = model.e_series();
    return NonlinearModel(
        model.horizon(), model.meas_dim(),
        [A, b](const Vec& x, std::size_t t) -> Vec { return A[t] * x + b[t]; },
        [A](const Vec&, std::size_t t) -> Mat { return A[t]; },
        [H, e](const Vec& x, std::size_t t) -> Vec { return H[t] * x + e[t]; },
        [H](const Vec&, std::size_t t) -> Mat { return H[t]; }, model.Q_series(), model.R_series(), model.m1(),
        model.P1());
}

// ---------------------------------------------------------------------------
// GroupRegularizer
// ---------------------------------------------------------------------------

GroupRegularizer::GroupRegularizer(Eigen::Index state_dim, StepSeries<std::vector<Mat>> groups,
                                   std::vector<double> weights, SparsityMode mode, SparsityTarget custom_target)
    : nx_(state_dim), groups_(std::move(groups)), weights_(std::move(weights)), mode_(mode),
      custom_(std::move(custom_target)) {
    require_dims(nx_ >= 1, "state dimension must be positive");
    require_dims(!groups_.empty(), "group series is empty");
    const std::size_t ng = groups_[0].size();
    require_dims(weights_.size() == ng, "need one weight per group");
    for (double mu : weights_) require(std::isfinite(mu) && mu >= 0.0, "group weights must be nonnegative");

    sizes_.resize(ng);
    offsets_.resize(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        sizes_[g] = groups_[0][g].rows();
        offsets_[g] = rows_;
        rows_ += sizes_[g];
    }
    std::vector<Mat> stacked;
    std::vector<Eigen::LLT<Mat>> factors;
    for (const auto& step : groups_.values()) {
        require_dims(step.size() == ng, "group count must not change over time");
        Mat Gt(rows_, nx_);
        for (std::size_t g = 0; g < ng; ++g) {
            require_dims(step[g].cols() == nx_, "every G_{g,t} needs N_x columns");
            require_dims(step[g].rows() == sizes_[g], "group sizes must not change over time");
            require_dims(step[g].rows() >= 1, "empty group");
            Gt.middleRows(offsets_[g], sizes_[g]) = step[g];
        }
        Mat M = Mat::Identity(nx_, nx_);
        if (rows_ > 0) M.noalias() += Gt.transpose() * Gt;
        factors.emplace_back(M);
        stacked.push_back(std::move(Gt));
    }
    stacked_ = StepSeries<Mat>(std::move(stacked));
    v_factor_ = StepSeries<Eigen::LLT<Mat>>(std::move(factors));

    if (mode_ == SparsityMode::custom) {
        require_dims(!custom_.B.empty() && !custom_.d.empty(), "custom sparsity mode needs B_t and d_t");
        for (const auto& B : custom_.B.values()) check_square(B, nx_, "B_t");
        for (const auto& d : custom_.d.values()) require_dims(d.size() == nx_, "d_t has wrong length");
    }
}

GroupRegularizer GroupRegularizer::none(Eigen::Index state_dim, SparsityMode mode) {
    return GroupRegularizer(state_dim, StepSeries<std::vector<Mat>>(std::vector<Mat>{}), {}, mode);
}

GroupRegularizer GroupRegularizer::with_weights(std::vector<double> weights) const {
    return GroupRegularizer(nx_, groups_, std::move(weights), mode_, custom_);
}

GroupRegularizer GroupRegularizer::with_mode(SparsityMode mode) const {
    return GroupRegularizer(nx_, groups_, weights_, mode, custom_);
}

namespace {

Mat selector_rows(Eigen::Index nx, const std::vector<Eigen::Index>& idx) {
    require(!idx.empty(), "empty group");
    Mat G = Mat::Zero(static_cast<Eigen::Index>(idx.size()), nx);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        require(idx[r] >= 0 && idx[r] < nx, "group index " + std::to_string(idx[r]) + " out of range");
        G(static_cast<Eigen::Index>(r), idx[r]) = 1.0;
    }
    return G;
}

// Forward difference rows: row i is x_{i+1} - x_i.
Mat difference_operator(Eigen::Index nx) {
    require(nx >= 2, "total-variation penalties need N_x >= 2");
    Mat D = Mat::Zero(nx - 1, nx);
    for (Eigen::Index i = 0; i + 1 < nx; ++i) {
        D(i, i) = -1.0;
        D(i, i + 1) = 1.0;
    }
    return D;
}

}  // namespace

GroupRegularizer make_regularizer(RegularizerKind kind, Eigen::Index state_dim,
                                  const std::vector<std::vector<Eigen::Index>>& groups,
                                  const std::vector<double>& weights, SparsityMode mode) {
    require(state_dim >= 1, "state dimension must be positive");
    std::vector<Mat> G;
    auto add_lasso = [&] {
        for (Eigen::Index g = 0; g < state_dim; ++g) G.push_back(selector_rows(state_dim, {g}));
    };
    auto add_aniso = [&] {
        const Mat D = difference_operator(state_dim);
        for (Eigen::Index r = 0; r < D.rows(); ++r) G.push_back(D.row(r));
    };
    auto add_groups = [&] {
        require(!groups.empty(), "group lasso needs at least one group");
        for (const auto& idx : groups) G.push_back(selector_rows(state_dim, idx));
    };
    switch (kind) {
        case RegularizerKind::l2: G.push_back(Mat::Identity(state_dim, state_dim)); break;
        case RegularizerKind::lasso: add_lasso(); break;
        case RegularizerKind::iso_tv: G.push_back(difference_operator(state_dim)); break;
        case RegularizerKind::aniso_tv: add_aniso(); break;
        case RegularizerKind::fused:
            add_lasso();
            add_aniso();
            break;
        case RegularizerKind::group: add_groups(); break;
        case RegularizerKind::sparse_group:
            add_lasso();
            add_groups();
            break;
    }
    std::vector<double> mu;
    if (weights.size() == 1) {
        mu.assign(G.size(), weights.front());
    } else {
        require(weights.size() == G.size(), "expected 1 or " + std::to_string(G.size()) + " weights, got " +
                                                std::to_string(weights.size()));
        mu = weights;
    }
    for (double m : mu) require(m >= 0.0, "group weights must be nonnegative");
    return GroupRegularizer(state_dim, StepSeries<std::vector<Mat>>(std::move(G)), std::move(mu), mode);
}

RegularizerKind parse_regularizer_kind(const std::string& name) {
    if (name == "l2") return RegularizerKind::l2;
    if (name == "lasso") return RegularizerKind::lasso;
    if (name == "iso_tv") return RegularizerKind::iso_tv;
    if (name == "aniso_tv") return RegularizerKind::aniso_tv;
    if (name == "fused") return RegularizerKind::fused;
    if (name == "group") return RegularizerKind::group;
    if (name == "sparse_group") return RegularizerKind::sparse_group;
    throw InvalidArgument("unknown regularizer '" + name + "'");
}

std::string to_string(RegularizerKind kind) {
    switch (kind) {
        case RegularizerKind::l2: return "l2";
        case RegularizerKind::lasso: return "lasso";
        case RegularizerKind::iso_tv: return "iso_tv";
        case RegularizerKind::aniso_tv: return "aniso_tv";
        case RegularizerKind::fused: return "fused";
        case RegularizerKind::group: return "group";
        case RegularizerKind::sparse_group: return "sparse_group";
    }
    return "?";
}

SparsityMode parse_sparsity_mode(const std::string& name) {
    if (name == "state") return SparsityMode::state;
    if (name == "process_noise") return SparsityMode::process_noise;
    if (name == "custom") return SparsityMode::custom;
    throw InvalidArgument("unknown sparsity mode '" + name + "'");
}

std::string to_string(SparsityMode mode) {
    switch (mode) {
        case SparsityMode::state: return "state";
        case SparsityMode::process_noise: return "process_noise";
        case SparsityMode::custom: return "custom";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// TrackingProblem / SplitState
// ---------------------------------------------------------------------------

namespace {

NonlinearModel nonlinear_view(const StateSpaceModel& model) {
    if (const auto* affine = std::get_if<AffineModel>(&model)) return as_nonlinear(*affine);
    return std::get<NonlinearModel>(model);
}

std::size_t model_horizon(const StateSpaceModel& m) {
    return std::visit([](const auto& mm) { return mm.horizon(); }, m);
}

}  // namespace

TrackingProblem::TrackingProblem(StateSpaceModel model, GroupRegularizer regularizer, Trajectory measurements)
    : model_(std::move(model)), reg_(std::move(regularizer)), y_(std::move(measurements)),
      nonlinear_view_(nonlinear_view(model_)) {
    const std::size_t T = model_horizon(model_);
    require_dims(static_cast<std::size_t>(y_.cols()) == T, "measurement count " + std::to_string(y_.cols()) +
                                                               " does not match horizon " + std::to_string(T));
    require_dims(y_.rows() == nonlinear_view_.meas_dim(), "measurement dimension mismatch");
    require_dims(reg_.state_dim() == nonlinear_view_.state_dim(), "regulariser state dimension mismatch");
    require_dims(reg_.covers(T), "group series must hold 1 or T entries");
    if (reg_.mode() == SparsityMode::custom) {
        require_dims(reg_.custom_target().B.covers(T) && reg_.custom_target().d.covers(T),
                     "custom target must hold 1 or T entries");
    }
}

TrackingProblem TrackingProblem::with_regularizer(GroupRegularizer regularizer) const {
    return TrackingProblem(model_, std::move(regularizer), y_);
}

SplitState SplitState::zeros(std::size_t horizon, Eigen::Index state_dim, Eigen::Index group_rows) {
    const auto T = static_cast<Eigen::Index>(horizon);
    return SplitState{Trajectory::Zero(state_dim, T), Trajectory::Zero(group_rows, T), Trajectory::Zero(state_dim, T),
                      Trajectory::Zero(state_dim, T), Trajectory::Zero(group_rows, T)};
}

Vec SplitState::eta(std::size_t t) const {
    const auto c = static_cast<Eigen::Index>(t);
    Vec out(eta_bar.rows() + eta_under.rows());
    out << eta_bar.col(c), eta_under.col(c);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

SparsityTarget sparsity_target(const StateSpaceModel& model, SparsityMode mode, const Trajectory* nominal) {
    if (mode == SparsityMode::custom) throw InvalidArgument("custom targets are supplied, not derived");
    const auto view = nonlinear_view(model);
    const Eigen::Index nx = view.state_dim();
    if (mode == SparsityMode::state) return {StepSeries<Mat>(Mat::Zero(nx, nx)), StepSeries<Vec>(Vec::Zero(nx))};
    if (const auto* affine = std::get_if<AffineModel>(&model)) return {affine->A_series(), affine->b_series()};
    if (nominal == nullptr) throw InvalidArgument("nonlinear process-noise target needs a nominal trajectory");
    const std::size_t T = view.horizon();
    require_dims(static_cast<std::size_t>(nominal->cols()) == T && nominal->rows() == nx, "nominal has wrong shape");
    std::vector<Mat> B(T, Mat::Zero(nx, nx));
    std::vector<Vec> d(T, Vec::Zero(nx));
    for (std::size_t t = 1; t < T; ++t) {
        const Vec xp = nominal->col(static_cast<Eigen::Index>(t - 1));
        B[t] = view.transition_jacobian(xp, t);
        d[t] = view.transition(xp, t) - B[t] * xp;
    }
    return {StepSeries<Mat>(std::move(B)), StepSeries<Vec>(std::move(d))};
}

SparsityTarget resolve_target(const TrackingProblem& problem, const Trajectory* nominal) {
    const auto& reg = problem.regularizer();
    if (reg.mode() == SparsityMode::custom) return reg.custom_target();
    return sparsity_target(problem.model(), reg.mode(), nominal);
}

Trajectory constraint_lhs(const TrackingProblem& problem, const Trajectory& x) {
    const std::size_t T = problem.horizon();
    require_dims(static_cast<std::size_t>(x.cols()) == T && x.rows() == problem.state_dim(), "x has wrong shape");
    Trajectory u(x.rows(), x.cols());
    u.col(0) = x.col(0) - problem.m1();
    const auto& reg = problem.regularizer();
    if (reg.mode() == SparsityMode::state) {
        u.rightCols(x.cols() - 1) = x.rightCols(x.cols() - 1);
        return u;
    }
    if (reg.mode() == SparsityMode::process_noise) {
        const auto& f = problem.as_nonlinear();
        for (std::size_t t = 1; t < T; ++t) {
            const auto c = static_cast<Eigen::Index>(t);
            u.col(c) = x.col(c) - f.transition(x.col(c - 1), t);
        }
        return u;
    }
    const auto& target = reg.custom_target();
    for (std::size_t t = 1; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        u.col(c) = x.col(c) - target.B[t] * x.col(c - 1) - target.d[t];
    }
    return u;
}

double data_cost(const TrackingProblem& problem, const Trajectory& x) {
    const auto& f = problem.as_nonlinear();
    const std::size_t T = problem.horizon();
    require_dims(static_cast<std::size_t>(x.cols()) == T && x.rows() == problem.state_dim(), "x has wrong shape");
    const auto& y = problem.measurements();
    double cost = inv_weighted_sq(f.P1_factor(), x.col(0) - f.m1());
    for (std::size_t t = 0; t < T; ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        cost += inv_weighted_sq(f.R_factor(t), y.col(c) - f.measurement(x.col(c), t));
        if (t > 0) cost += inv_weighted_sq(f.Q_factor(t), x.col(c) - f.transition(x.col(c - 1), t));
    }
    return 0.5 * cost;
}

namespace {

double group_penalty(const GroupRegularizer& reg, const Trajectory& z, bool apply_G) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < z.cols(); ++t) {
        for (std::size_t g = 0; g < reg.group_count(); ++g) {
            if (reg.weight(g) == 0.0) continue;
            const double n = apply_G ? (reg.G(g, static_cast<std::size_t>(t)) * z.col(t)).norm()
                                     : z.col(t).segment(reg.group_offset(g), reg.group_size(g)).norm();
            total += reg.weight(g) * n;
        }
    }
    return total;
}

}  // namespace

double objective(const TrackingProblem& problem, const Trajectory& x) {
    const Trajectory u = constraint_lhs(problem, x);
    return data_cost(problem, x) + group_penalty(problem.regularizer(), u, true);
}

double augmented_lagrangian(const TrackingProblem& problem, const SplitState& s, double gamma) {
    require(gamma > 0.0, "gamma must be positive");
    const auto& reg = problem.regularizer();
    const Eigen::Index P = reg.stacked_rows();
    require_dims(s.w.rows() == P && s.eta_under.rows() == P && s.v.rows() == problem.state_dim() &&
                     s.eta_bar.rows() == problem.state_dim(),
                 "split state does not match the regulariser");
    require_dims(s.w.cols() == s.x.cols() && s.v.cols() == s.x.cols() && s.eta_bar.cols() == s.x.cols() &&
                     s.eta_under.cols() == s.x.cols(),
                 "split state horizons differ");
    const Trajectory u = constraint_lhs(problem, s.x);
    double value = data_cost(problem, s.x) + group_penalty(reg, s.w, false);
    double linear = 0.0;
    double quad = 0.0;
    for (Eigen::Index t = 0; t < s.x.cols(); ++t) {
        const Vec r_head = u.col(t) - s.v.col(t);
        linear += s.eta_bar.col(t).dot(r_head);
        quad += r_head.squaredNorm();
        if (P > 0) {
            const Vec r_tail = s.w.col(t) - reg.stacked(static_cast<std::size_t>(t)) * s.v.col(t);
            linear += s.eta_under.col(t).dot(r_tail);
            quad += r_tail.squaredNorm();
        }
    }
    return value + linear + 0.5 * gamma * quad;
}

double x_subproblem_cost(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                         const Trajectory& eta_bar, double gamma) {
    const Trajectory u = constraint_lhs(problem, x);
    double pen = 0.0;
    if (gamma > 0.0) pen = (u - v + eta_bar / gamma).squaredNorm();
    return data_cost(problem, x) + 0.5 * gamma * pen;
}

}  // namespace splitsmooth
