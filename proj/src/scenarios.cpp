#include "splitsmooth/scenarios.hpp"

#include "splitsmooth/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace splitsmooth {

ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "wiener") return ScenarioKind::wiener;
    if (name == "range") return ScenarioKind::range;
    if (name == "coordinated_turn" || name == "ct") return ScenarioKind::coordinated_turn;
    throw InvalidArgument("unknown scenario '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::wiener: return "wiener";
        case ScenarioKind::range: return "range";
        case ScenarioKind::coordinated_turn: return "coordinated_turn";
    }
    return "?";
}

void ScenarioParams::validate() const {
    require(dt > 0.0, "dt must be positive");
    require(qc >= 0.0, "qc must be nonnegative");
    require(sigma >= 0.0, "sigma must be nonnegative");
    require(T >= 2, "T must be at least 2");
    require(p0 >= 0.0 && p0 <= 1.0, "p0 must lie in [0, 1]");
    require(stop_fraction >= 0.0 && stop_fraction < 1.0, "stop fraction must lie in [0, 1)");
    require(turn_rate_noise >= 0.0, "turn-rate noise must be nonnegative");
    if (kind == ScenarioKind::range) require(!sensors.empty(), "range scenario needs at least one sensor");
}

ScenarioParams default_params(ScenarioKind kind) {
    ScenarioParams p;
    p.kind = kind;
    switch (kind) {
        case ScenarioKind::wiener:
            p.dt = 0.1;
            p.qc = 0.5;
            p.sigma = 0.3;
            p.T = 100;
            p.p0 = 0.8;
            p.m1 = Vec(4);
            p.m1 << 0.1, 0.0, 0.1, 0.0;
            p.P1 = Mat::Identity(4, 4);
            break;
        case ScenarioKind::range:
            p.dt = 0.1;
            p.sigma = 0.2;
            p.T = 60;
            p.m1 = Vec::Zero(4);
            p.P1 = Mat::Identity(4, 4) / 10.0;
            p.sensors = {{0.0, -0.5}, {0.5, 0.6}, {-0.5, 0.6}};
            break;
        case ScenarioKind::coordinated_turn:
            p.dt = 0.1;
            p.qc = 0.1;
            p.sigma = 0.5;
            p.T = 200;
            p.m1 = Vec(5);
            p.m1 << 4.5, 13.5, 0.0, 0.0, 0.0;
            p.P1 = Vec((Vec(5) << 50.0, 50.0, 50.0, 50.0, 0.01).finished()).asDiagonal();
            break;
    }
    return p;
}

ScenarioParams vessel_params() {
    ScenarioParams p = default_params(ScenarioKind::wiener);
    p.dt = 1.0;
    p.qc = 1.0;
    p.m1 << 0.1, 0.1, 0.0, 0.0;
    p.P1 = 100.0 * Mat::Identity(4, 4);
    return p;
}

namespace {

Vec prior_mean(const ScenarioParams& p, Eigen::Index nx) {
    if (p.m1.size() == 0) return Vec::Zero(nx);
    require_dims(p.m1.size() == nx, "m1 has wrong dimension");
    return p.m1;
}

Mat prior_cov(const ScenarioParams& p, Eigen::Index nx) {
    if (p.P1.size() == 0) return Mat::Identity(nx, nx);
    require_dims(p.P1.rows() == nx && p.P1.cols() == nx, "P1 has wrong dimension");
    return p.P1;
}

/// Draws from N(0, cov) via a factor computed once; semidefinite covariances allowed.
class GaussianSampler {
public:
    explicit GaussianSampler(const Mat& cov) {
        Eigen::LDLT<Mat> ldlt(cov);
        const Vec d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
        const Mat L = ldlt.matrixL();
        factor_ = ldlt.transpositionsP().transpose() * (L * d.asDiagonal());
    }
    template <typename Rng>
    Vec draw(Rng& rng) {
        Vec z(factor_.cols());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal_(rng);
        return factor_ * z;
    }

private:
    Mat factor_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

Mat position_selector(Eigen::Index nx) {
    Mat H = Mat::Zero(2, nx);
    H(0, 0) = 1.0;
    H(1, 1) = 1.0;
    return H;
}

std::vector<double> regular_timestamps(std::size_t T, double dt) {
    std::vector<double> ts(T);
    for (std::size_t t = 0; t < T; ++t) ts[t] = static_cast<double>(t) * dt;
    return ts;
}

}  // namespace

Mat wiener_transition(double dt) {
    Mat A = Mat::Identity(4, 4);
    A(0, 2) = dt;
    A(1, 3) = dt;
    return A;
}

Mat wiener_covariance(double dt, double qc) {
    Mat Q = Mat::Zero(4, 4);
    const double a = dt * dt * dt / 3.0;
    const double b = dt * dt / 2.0;
    Q(0, 0) = Q(1, 1) = a;
    Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = b;
    Q(2, 2) = Q(3, 3) = dt;
    return qc * Q;
}

AffineModel wiener_model(const ScenarioParams& p) {
    p.validate();
    require(p.qc > 0.0 && p.sigma > 0.0, "wiener model needs qc > 0 and sigma > 0");
    const Mat R = p.sigma * p.sigma * Mat::Identity(2, 2);
    return AffineModel(p.T, StepSeries<Mat>(wiener_transition(p.dt)), {}, StepSeries<Mat>(position_selector(4)), {},
                       StepSeries<Mat>(wiener_covariance(p.dt, p.qc)), StepSeries<Mat>(R), prior_mean(p, 4),
                       prior_cov(p, 4));
}

WienerScenario simulate_wiener(const ScenarioParams& p) {
    p.validate();
    std::mt19937_64 rng(p.seed);
    std::bernoulli_distribution zero_step(p.p0);
    std::normal_distribution<double> meas(0.0, 1.0);
    GaussianSampler q(wiener_covariance(p.dt, p.qc));
    const Mat A = wiener_transition(p.dt);
    const auto T = static_cast<Eigen::Index>(p.T);

    Trajectory x(4, T);
    Trajectory y(2, T);
    x.col(0) = prior_mean(p, 4);
    for (Eigen::Index t = 0; t < T; ++t) {
        if (t > 0) {
            x.col(t) = A * x.col(t - 1);
            // Draw unconditionally so the stream does not depend on p0.
            const Vec noise = q.draw(rng);
            if (!zero_step(rng)) x.col(t) += noise;
        }
        for (Eigen::Index i = 0; i < 2; ++i) y(i, t) = x(i, t) + p.sigma * meas(rng);
    }

    WienerScenario out;
    out.data.truth = std::move(x);
    out.data.measurements = std::move(y);
    out.data.timestamps = regular_timestamps(p.T, p.dt);
    if (p.qc > 0.0 && p.sigma > 0.0) out.model.emplace(wiener_model(p));
    return out;
}

Vec range_measurement(const Vec& x, const std::vector<std::array<double, 2>>& sensors) {
    Vec y(static_cast<Eigen::Index>(sensors.size()));
    for (std::size_t n = 0; n < sensors.size(); ++n) {
        y[static_cast<Eigen::Index>(n)] = std::hypot(x[0] - sensors[n][0], x[1] - sensors[n][1]);
    }
    return y;
}

Mat range_jacobian(const Vec& x, const std::vector<std::array<double, 2>>& sensors) {
    Mat J = Mat::Zero(static_cast<Eigen::Index>(sensors.size()), x.size());
    for (std::size_t n = 0; n < sensors.size(); ++n) {
        const double dx = x[0] - sensors[n][0];
        const double dy = x[1] - sensors[n][1];
        const double r = std::max(std::hypot(dx, dy), kRangeClamp);
        J(static_cast<Eigen::Index>(n), 0) = dx / r;
        J(static_cast<Eigen::Index>(n), 1) = dy / r;
    }
    return J;
}

NonlinearModel range_model(const ScenarioParams& p) {
    p.validate();
    require(p.sigma > 0.0, "range model needs sigma > 0");
    const Mat A = wiener_transition(p.dt);
    const Vec qd = (Vec(4) << 0.01, 0.01, 0.1, 0.1).finished();
    const Mat Q = qd.asDiagonal();
    const auto ns = static_cast<Eigen::Index>(p.sensors.size());
    const Mat R = p.sigma * p.sigma * Mat::Identity(ns, ns);
    const auto sensors = p.sensors;
    return NonlinearModel(
        p.T, ns, [A](const Vec& x, std::size_t) -> Vec { return A * x; },
        [A](const Vec&, std::size_t) -> Mat { return A; },
        [sensors](const Vec& x, std::size_t) { return range_measurement(x, sensors); },
        [sensors](const Vec& x, std::size_t) { return range_jacobian(x, sensors); }, StepSeries<Mat>(Q),
        StepSeries<Mat>(R), prior_mean(p, 4), prior_cov(p, 4));
}

RangeScenario simulate_range(const ScenarioParams& p) {
    p.validate();
    std::mt19937_64 rng(p.seed);
    std::uniform_int_distribution<int> seg_len(4, 10);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto T = static_cast<Eigen::Index>(p.T);

    // Alternate moving and stopped segments; stopped segments are chosen with
    // probability stop_fraction so that about that share of steps is stopped.
    std::vector<bool> stopped(p.T, false);
    for (Eigen::Index t = 1; t < T;) {
        const int len = seg_len(rng);
        const bool stop = unif(rng) < p.stop_fraction;
        for (Eigen::Index k = t; k < std::min<Eigen::Index>(T, t + len); ++k) stopped[static_cast<std::size_t>(k)] = stop;
        t += len;
    }

    Trajectory x(4, T);
    x.col(0) = prior_mean(p, 4);
    Vec vel(2);
    vel << normal(rng), normal(rng);
    for (Eigen::Index t = 1; t < T; ++t) {
        const bool stop = stopped[static_cast<std::size_t>(t)];
        if (!stop) {
            if (stopped[static_cast<std::size_t>(t - 1)] || t == 1) vel << normal(rng), normal(rng);
            vel[0] += 0.1 * normal(rng);
            vel[1] += 0.1 * normal(rng);
        }
        x.col(t).head(2) = x.col(t - 1).head(2) + p.dt * (stop ? Vec::Zero(2) : vel);
        x.col(t).tail(2) = stop ? Vec::Zero(2) : vel;
    }

    const auto ns = static_cast<Eigen::Index>(p.sensors.size());
    Trajectory y(ns, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        y.col(t) = range_measurement(x.col(t), p.sensors);
        for (Eigen::Index n = 0; n < ns; ++n) y(n, t) += p.sigma * normal(rng);
    }

    TrackDataset data;
    data.truth = std::move(x);
    data.measurements = std::move(y);
    data.timestamps = regular_timestamps(p.T, p.dt);
    return RangeScenario{std::move(data), range_model(p)};
}

namespace {

/// sin(w dt) / w, (1 - cos(w dt)) / w and their derivatives in w.
struct TurnTerms {
    double s, c, ds, dc;
};

TurnTerms turn_terms(double w, double dt) {
    if (std::abs(w) < 1e-4) {
        const double dt2 = dt * dt;
        const double dt3 = dt2 * dt;
        const double dt4 = dt3 * dt;
        return {dt - w * w * dt3 / 6.0, w * dt2 / 2.0 - w * w * w * dt4 / 24.0, -w * dt3 / 3.0,
                dt2 / 2.0 - w * w * dt4 / 8.0};
    }
    const double sn = std::sin(w * dt);
    const double cs = std::cos(w * dt);
    return {sn / w, (1.0 - cs) / w, (dt * cs * w - sn) / (w * w), (dt * sn * w - (1.0 - cs)) / (w * w)};
}

}  // namespace

Vec ct_transition(const Vec& x, double dt) {
    require_dims(x.size() == 5, "coordinated-turn state has 5 components");
    const double w = x[4];
    const TurnTerms k = turn_terms(w, dt);
    const double sn = std::sin(w * dt);
    const double cs = std::cos(w * dt);
    Vec out(5);
    out[0] = x[0] + k.s * x[2] - k.c * x[3];
    out[1] = x[1] + k.c * x[2] + k.s * x[3];
    out[2] = cs * x[2] - sn * x[3];
    out[3] = sn * x[2] + cs * x[3];
    out[4] = w;
    return out;
}

Mat ct_jacobian(const Vec& x, double dt) {
    require_dims(x.size() == 5, "coordinated-turn state has 5 components");
    const double w = x[4];
    const TurnTerms k = turn_terms(w, dt);
    const double sn = std::sin(w * dt);
    const double cs = std::cos(w * dt);
    Mat J = Mat::Identity(5, 5);
    J(0, 2) = k.s;
    J(0, 3) = -k.c;
    J(0, 4) = k.ds * x[2] - k.dc * x[3];
    J(1, 2) = k.c;
    J(1, 3) = k.s;
    J(1, 4) = k.dc * x[2] + k.ds * x[3];
    J(2, 2) = cs;
    J(2, 3) = -sn;
    J(2, 4) = -dt * sn * x[2] - dt * cs * x[3];
    J(3, 2) = sn;
    J(3, 3) = cs;
    J(3, 4) = dt * cs * x[2] - dt * sn * x[3];
    return J;
}

NonlinearModel coordinated_turn_model(const ScenarioParams& p) {
    p.validate();
    require(p.qc > 0.0 && p.sigma > 0.0 && p.turn_rate_noise > 0.0,
            "coordinated-turn model needs positive noise levels");
    Mat Q = Mat::Zero(5, 5);
    Q.topLeftCorner(4, 4) = wiener_covariance(p.dt, p.qc);
    Q(4, 4) = p.turn_rate_noise * p.dt;
    const Mat H = position_selector(5);
    const Mat R = p.sigma * p.sigma * Mat::Identity(2, 2);
    const double dt = p.dt;
    return NonlinearModel(
        p.T, 2, [dt](const Vec& x, std::size_t) { return ct_transition(x, dt); },
        [dt](const Vec& x, std::size_t) { return ct_jacobian(x, dt); },
        [H](const Vec& x, std::size_t) -> Vec { return H * x; }, [H](const Vec&, std::size_t) -> Mat { return H; },
        StepSeries<Mat>(Q), StepSeries<Mat>(R), prior_mean(p, 5), prior_cov(p, 5));
}

TurnScenario simulate_coordinated_turn(const ScenarioParams& p) {
    NonlinearModel model = coordinated_turn_model(p);
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto T = static_cast<Eigen::Index>(p.T);
    Trajectory x(5, T);
    // Start at the prior mean with a nonzero speed so the track actually turns.
    x.col(0) = model.m1();
    x(2, 0) += 1.0;
    GaussianSampler q(model.Q(1));
    for (Eigen::Index t = 1; t < T; ++t) {
        x.col(t) = ct_transition(x.col(t - 1), p.dt);
        const Vec noise = q.draw(rng);
        if (unif(rng) >= p.p0) x.col(t) += noise;
    }
    Trajectory y(2, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        y(0, t) = x(0, t) + p.sigma * normal(rng);
        y(1, t) = x(1, t) + p.sigma * normal(rng);
    }
    TrackDataset data;
    data.truth = std::move(x);
    data.measurements = std::move(y);
    data.timestamps = regular_timestamps(p.T, p.dt);
    return TurnScenario{std::move(data), std::move(model)};
}

double relative_error(const Trajectory& estimate, const Trajectory& truth) {
    require_dims(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(),
                 "estimate and truth differ in shape");
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index t = 0; t < truth.cols(); ++t) {
        num += (estimate.col(t) - truth.col(t)).norm();
        den += truth.col(t).norm();
    }
    if (den == 0.0) throw InvalidArgument("relative error is undefined for an all-zero truth");
    return num / den;
}

TrackDataset load_track_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);

    const auto records = csv::parse(text, schema.delimiter);
    if (records.empty()) throw InvalidArgument(path + ": missing header row");
    const auto& header = records.front().fields;
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InvalidArgument(path + ": column '" + name + "' not found in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t tcol = column(schema.time_column);
    std::vector<std::size_t> vcols;
    for (const auto& name : schema.value_columns) vcols.push_back(column(name));
    require(!vcols.empty(), "schema needs at least one value column");

    struct Row {
        double t;
        Vec values;
        std::size_t line;
    };
    std::vector<Row> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = path + ": line " + std::to_string(rec.line);
        if (rec.fields.size() != header.size()) {
            throw InvalidArgument(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(rec.fields.size()));
        }
        Row row{0.0, Vec(static_cast<Eigen::Index>(vcols.size())), rec.line};
        try {
            row.t = csv::parse_number(rec.fields[tcol]);
            for (std::size_t i = 0; i < vcols.size(); ++i) {
                row.values[static_cast<Eigen::Index>(i)] = csv::parse_number(rec.fields[vcols[i]]);
            }
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(where + ": " + e.what());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidArgument(path + ": no data rows");

    TrackDataset ds;
    const bool sorted = std::is_sorted(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    if (!sorted) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
        ds.warnings.push_back("rows were not in timestamp order and have been sorted");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].t == rows[i - 1].t) {
            throw InvalidArgument(path + ": line " + std::to_string(rows[i].line) + ": timestamp " +
                                  csv::format_number(rows[i].t) + " repeats line " + std::to_string(rows[i - 1].line) +
                                  " (timestamps must be strictly increasing)");
        }
    }

    const auto T = static_cast<Eigen::Index>(rows.size());
    ds.measurements.resize(static_cast<Eigen::Index>(vcols.size()), T);
    ds.timestamps.resize(rows.size());
    for (Eigen::Index t = 0; t < T; ++t) {
        ds.measurements.col(t) = rows[static_cast<std::size_t>(t)].values;
        ds.timestamps[static_cast<std::size_t>(t)] = rows[static_cast<std::size_t>(t)].t;
    }
    if (rows.size() >= 3) {
        std::vector<double> dts(rows.size() - 1);
        for (std::size_t i = 1; i < rows.size(); ++i) dts[i - 1] = ds.timestamps[i] - ds.timestamps[i - 1];
        std::vector<double> sorted_dts = dts;
        std::nth_element(sorted_dts.begin(), sorted_dts.begin() + static_cast<std::ptrdiff_t>(sorted_dts.size() / 2),
                         sorted_dts.end());
        const double median = sorted_dts[sorted_dts.size() / 2];
        for (std::size_t i = 0; i < dts.size(); ++i) {
            if (dts[i] > 1.5 * median) ds.gaps.push_back(i + 1);
        }
    }
    return ds;
}

}  // namespace splitsmooth
