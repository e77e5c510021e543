#pragma once

#include "splitsmooth/common.hpp"

#include <functional>
#include <optional>
#include <variant>

namespace splitsmooth {

// Time indexing is zero-based throughout: step 0 carries the prior (m1, P1),
// and the transition entry at step t >= 1 maps x_{t-1} to x_t. Entry 0 of any
// transition-related series is never read.

/// Affine Gaussian state-space model x_t = A_t x_{t-1} + b_t + q_t,
/// y_t = H_t x_t + e_t + r_t, x_0 ~ N(m1, P1).
class AffineModel {
public:
    /// Empty bias series mean zero bias. Covariances are factorised here and
    /// rejected if not symmetric positive definite.
    AffineModel(std::size_t horizon, StepSeries<Mat> A, StepSeries<Vec> b, StepSeries<Mat> H, StepSeries<Vec> e,
                StepSeries<Mat> Q, StepSeries<Mat> R, Vec m1, Mat P1);

    std::size_t horizon() const noexcept { return horizon_; }
    Eigen::Index state_dim() const noexcept { return m1_.size(); }
    Eigen::Index meas_dim() const noexcept { return H_[0].rows(); }

    const Mat& A(std::size_t t) const { return A_[t]; }
    const Vec& b(std::size_t t) const { return b_[t]; }
    const Mat& H(std::size_t t) const { return H_[t]; }
    const Vec& e(std::size_t t) const { return e_[t]; }
    const Mat& Q(std::size_t t) const { return Q_[t]; }
    const Mat& R(std::size_t t) const { return R_[t]; }
    const Vec& m1() const noexcept { return m1_; }
    const Mat& P1() const noexcept { return P1_; }

    const Eigen::LLT<Mat>& Q_factor(std::size_t t) const { return Qf_[t]; }
    const Eigen::LLT<Mat>& R_factor(std::size_t t) const { return Rf_[t]; }
    const Eigen::LLT<Mat>& P1_factor() const noexcept { return P1f_; }

    const StepSeries<Mat>& A_series() const noexcept { return A_; }
    const StepSeries<Vec>& b_series() const noexcept { return b_; }
    const StepSeries<Mat>& H_series() const noexcept { return H_; }
    const StepSeries<Vec>& e_series() const noexcept { return e_; }
    const StepSeries<Mat>& Q_series() const noexcept { return Q_; }
    const StepSeries<Mat>& R_series() const noexcept { return R_; }

    /// Same model over a different horizon; only valid when every series is constant.
    AffineModel with_horizon(std::size_t horizon) const;

private:
    std::size_t horizon_;
    StepSeries<Mat> A_;
    StepSeries<Vec> b_;
    StepSeries<Mat> H_;
    StepSeries<Vec> e_;
    StepSeries<Mat> Q_;
    StepSeries<Mat> R_;
    Vec m1_;
    Mat P1_;
    StepSeries<Eigen::LLT<Mat>> Qf_;
    StepSeries<Eigen::LLT<Mat>> Rf_;
    Eigen::LLT<Mat> P1f_;
};

using VectorFn = std::function<Vec(const Vec&, std::size_t)>;
using JacobianFn = std::function<Mat(const Vec&, std::size_t)>;

/// General model x_t = a_t(x_{t-1}) + q_t, y_t = h_t(x_t) + r_t with
/// user-supplied Jacobians.
class NonlinearModel {
public:
    NonlinearModel(std::size_t horizon, Eigen::Index meas_dim, VectorFn transition, JacobianFn transition_jacobian,
                   VectorFn measurement, JacobianFn measurement_jacobian, StepSeries<Mat> Q, StepSeries<Mat> R, Vec m1,
                   Mat P1);

    std::size_t horizon() const noexcept { return horizon_; }
    Eigen::Index state_dim() const noexcept { return m1_.size(); }
    Eigen::Index meas_dim() const noexcept { return meas_dim_; }

    Vec transition(const Vec& x_prev, std::size_t t) const { return a_(x_prev, t); }
    Mat transition_jacobian(const Vec& x_prev, std::size_t t) const { return Ja_(x_prev, t); }
    Vec measurement(const Vec& x, std::size_t t) const { return h_(x, t); }
    Mat measurement_jacobian(const Vec& x, std::size_t t) const { return Jh_(x, t); }

    const Mat& Q(std::size_t t) const { return Q_[t]; }
    const Mat& R(std::size_t t) const { return R_[t]; }
    const Vec& m1() const noexcept { return m1_; }
    const Mat& P1() const noexcept { return P1_; }
    const Eigen::LLT<Mat>& Q_factor(std::size_t t) const { return Qf_[t]; }
    const Eigen::LLT<Mat>& R_factor(std::size_t t) const { return Rf_[t]; }
    const Eigen::LLT<Mat>& P1_factor() const noexcept { return P1f_; }
    const StepSeries<Mat>& Q_series() const noexcept { return Q_; }
    const StepSeries<Mat>& R_series() const noexcept { return R_; }

    NonlinearModel with_prior(Vec m1, Mat P1) const;
    NonlinearModel with_horizon(std::size_t horizon) const;

private:
    std::size_t horizon_;
    Eigen::Index meas_dim_;
    VectorFn a_;
    JacobianFn Ja_;
    VectorFn h_;
    JacobianFn Jh_;
    StepSeries<Mat> Q_;
    StepSeries<Mat> R_;
    Vec m1_;
    Mat P1_;
    StepSeries<Eigen::LLT<Mat>> Qf_;
    StepSeries<Eigen::LLT<Mat>> Rf_;
    Eigen::LLT<Mat> P1f_;
};

/// View an affine model through the nonlinear interface.
NonlinearModel as_nonlinear(const AffineModel& model);

using StateSpaceModel = std::variant<AffineModel, NonlinearModel>;

// ---------------------------------------------------------------------------
// Regulariser
// ---------------------------------------------------------------------------

/// What the group penalty acts on: the state itself, the process noise, or an
/// explicitly supplied affine target B_t x_{t-1} + d_t.
enum class SparsityMode { state, process_noise, custom };

/// Per-step affine target (B_t, d_t). Entry 0 is never read: the first step
/// always uses x_0 - m1.
struct SparsityTarget {
    StepSeries<Mat> B;
    StepSeries<Vec> d;
};

/// Group structure G_{g,t}, weights mu_g and the sparsity target.
class GroupRegularizer {
public:
    /// `groups[t][g]` is G_{g,t}; a constant series applies the same groups at every step.
    GroupRegularizer(Eigen::Index state_dim, StepSeries<std::vector<Mat>> groups, std::vector<double> weights,
                     SparsityMode mode = SparsityMode::state, SparsityTarget custom_target = {});

    /// No groups at all (plain smoothing).
    static GroupRegularizer none(Eigen::Index state_dim, SparsityMode mode = SparsityMode::state);

    Eigen::Index state_dim() const noexcept { return nx_; }
    std::size_t group_count() const noexcept { return weights_.size(); }
    Eigen::Index group_size(std::size_t g) const { return sizes_[g]; }
    Eigen::Index group_offset(std::size_t g) const { return offsets_[g]; }
    /// Total stacked rows, sum of P_g.
    Eigen::Index stacked_rows() const noexcept { return rows_; }
    double weight(std::size_t g) const { return weights_[g]; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<Eigen::Index>& offsets() const noexcept { return offsets_; }

    const Mat& G(std::size_t g, std::size_t t) const { return groups_[t][g]; }
    /// Stacked G_t (sum P_g by N_x).
    const Mat& stacked(std::size_t t) const { return stacked_[t]; }
    /// Cholesky factor of I + G_t^T G_t, computed once.
    const Eigen::LLT<Mat>& v_factor(std::size_t t) const { return v_factor_[t]; }
    bool time_invariant() const noexcept { return stacked_.constant(); }
    bool covers(std::size_t horizon) const noexcept { return groups_.covers(horizon); }

    SparsityMode mode() const noexcept { return mode_; }
    const SparsityTarget& custom_target() const noexcept { return custom_; }

    GroupRegularizer with_weights(std::vector<double> weights) const;
    GroupRegularizer with_mode(SparsityMode mode) const;

private:
    Eigen::Index nx_;
    StepSeries<std::vector<Mat>> groups_;
    std::vector<double> weights_;
    std::vector<Eigen::Index> sizes_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index rows_ = 0;
    StepSeries<Mat> stacked_;
    StepSeries<Eigen::LLT<Mat>> v_factor_;
    SparsityMode mode_;
    SparsityTarget custom_;
};

enum class RegularizerKind { l2, lasso, iso_tv, aniso_tv, fused, group, sparse_group };

/// Builds the standard G_{g,t} families. Group index sets are zero-based and
/// only consulted for `group` and `sparse_group`. A single weight is applied to
/// every group; otherwise one weight per emitted group is required.
GroupRegularizer make_regularizer(RegularizerKind kind, Eigen::Index state_dim,
                                  const std::vector<std::vector<Eigen::Index>>& groups,
                                  const std::vector<double>& weights, SparsityMode mode = SparsityMode::state);

RegularizerKind parse_regularizer_kind(const std::string& name);
std::string to_string(RegularizerKind kind);
SparsityMode parse_sparsity_mode(const std::string& name);
std::string to_string(SparsityMode mode);

// ---------------------------------------------------------------------------
// Problem and split state
// ---------------------------------------------------------------------------

class TrackingProblem {
public:
    TrackingProblem(StateSpaceModel model, GroupRegularizer regularizer, Trajectory measurements);

    const StateSpaceModel& model() const noexcept { return model_; }
    const GroupRegularizer& regularizer() const noexcept { return reg_; }
    const Trajectory& measurements() const noexcept { return y_; }

    bool is_affine() const noexcept { return std::holds_alternative<AffineModel>(model_); }
    const AffineModel& affine() const { return std::get<AffineModel>(model_); }
    const NonlinearModel& nonlinear() const { return std::get<NonlinearModel>(model_); }
    /// Nonlinear view of either alternative.
    const NonlinearModel& as_nonlinear() const { return nonlinear_view_; }

    std::size_t horizon() const noexcept { return static_cast<std::size_t>(y_.cols()); }
    Eigen::Index state_dim() const noexcept { return reg_.state_dim(); }
    Eigen::Index meas_dim() const noexcept { return y_.rows(); }
    const Vec& m1() const { return nonlinear_view_.m1(); }

    TrackingProblem with_regularizer(GroupRegularizer regularizer) const;

private:
    StateSpaceModel model_;
    GroupRegularizer reg_;
    Trajectory y_;
    NonlinearModel nonlinear_view_;
};

/// mADMM iterate. eta_t is stored split into its N_x head (eta_bar) and
/// group tail (eta_under); `eta(t)` reassembles it.
struct SplitState {
    Trajectory x;
    Trajectory w;
    Trajectory v;
    Trajectory eta_bar;
    Trajectory eta_under;

    static SplitState zeros(std::size_t horizon, Eigen::Index state_dim, Eigen::Index group_rows);
    Vec eta(std::size_t t) const;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// (B_t, d_t) for the given mode. Nonlinear process-noise mode linearises the
/// transition along `nominal`, which is then required.
SparsityTarget sparsity_target(const StateSpaceModel& model, SparsityMode mode, const Trajectory* nominal = nullptr);

/// Target actually used by `problem` at linearisation point `nominal`
/// (custom targets come from the regulariser).
SparsityTarget resolve_target(const TrackingProblem& problem, const Trajectory* nominal);

/// u_t = x_t - B_t x_{t-1} - d_t with u_0 = x_0 - m1. In nonlinear
/// process-noise mode the exact transition a_t(x_{t-1}) is used.
Trajectory constraint_lhs(const TrackingProblem& problem, const Trajectory& x);

/// Weighted measurement, dynamics and prior terms.
double data_cost(const TrackingProblem& problem, const Trajectory& x);

/// Full regularised objective.
double objective(const TrackingProblem& problem, const Trajectory& x);

double augmented_lagrangian(const TrackingProblem& problem, const SplitState& state, double gamma);

/// x-subproblem cost: data terms plus gamma/2 sum ||u_t - v_t + eta_bar_t / gamma||^2.
double x_subproblem_cost(const TrackingProblem& problem, const Trajectory& x, const Trajectory& v,
                         const Trajectory& eta_bar, double gamma);

}  // namespace splitsmooth
