#include <cacc/errors.hpp>
#include <cacc/mpc.hpp>
#include <cacc/qp.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace cacc {

void MpcConfig::validate() const {
    bounds.validate();
    if (N_p < 1) throw ConfigError("N_p must be at least 1");
    if (!(Q >= 0.0 && R >= 0.0 && D >= 0.0)) throw ConfigError("MPC weights must be nonnegative");
    if (!(torque_scale > 0.0)) throw ConfigError("torque scale must be positive");
    if (sqp_iters < 1) throw ConfigError("sqp_iters must be at least 1");
}

double predict_front_accel(const V2VMessage* msg, long k, double a_min) {
    if (!msg || msg->forecast.empty()) return a_min;
    const long off = k - msg->stamp;
    if (off < 0 || off > msg->N_T || off >= static_cast<long>(msg->forecast.size())) return a_min;
    return msg->forecast[static_cast<std::size_t>(off)];
}

double FrontPredictor::accel(long k) const { return predict_front_accel(msg_ ? &*msg_ : nullptr, k, a_min_); }

PlatoonState shift_state(const Observation& obs, const std::vector<double>& ego_speeds, const FrontPredictor& pred,
                         double t_s) {
    if (ego_speeds.empty()) throw InsufficientHistory("shift_state: no ego speed at the observation stamp");
    PlatoonState x{obs.d, positive_part(ego_speeds[0]), positive_part(obs.v_f)};
    for (std::size_t j = 0; j + 1 < ego_speeds.size(); ++j) {
        const long k = obs.stamp + static_cast<long>(j);
        x.d += t_s * (x.v_f - x.v);
        x.v = ego_speeds[j + 1];
        x.v_f = positive_part(x.v_f + t_s * pred.accel(k));
    }
    return x;
}

namespace {

// Gap used for drag evaluation inside predictions; predictions may wander below zero.
Gap drag_gap(double d) { return Gap(std::max(d, 0.0)); }

struct Prediction {
    Eigen::VectorXd cd, cv;  // affine offsets of d_k, v_k, k = 0..N
    Eigen::MatrixXd Sd, Sv;  // sensitivities to the scaled inputs
};

Prediction condense(const VehicleParams& p, const RoadProfile& road, const PlatoonState& x0,
                    const std::vector<double>& vf, const std::vector<double>& ref_inputs, const MpcConfig& cfg) {
    const int N = cfg.N_p;
    const double t_s = cfg.bounds.t_s;
    // nonlinear reference rollout of the current iterate
    std::vector<double> dr(N + 1), vr(N + 1);
    dr[0] = x0.d;
    vr[0] = x0.v;
    for (int k = 0; k < N; ++k) {
        PlatoonState s{dr[k], vr[k], vf[k]};
        auto n = step(p, road, s, ref_inputs[k], 0.0, t_s, drag_gap(dr[k]));
        dr[k + 1] = n.d;
        vr[k + 1] = n.v;
    }
    const double G = p.M * p.g * (std::sin(road.theta) + p.C_r * std::cos(road.theta));
    const double k_in = t_s / (p.M * p.R_w) * cfg.torque_scale;

    Prediction P;
    P.cd.resize(N + 1);
    P.cv.resize(N + 1);
    P.Sd = Eigen::MatrixXd::Zero(N + 1, N);
    P.Sv = Eigen::MatrixXd::Zero(N + 1, N);
    P.cd(0) = x0.d;
    P.cv(0) = x0.v;
    for (int k = 0; k < N; ++k) {
        const Gap g = drag_gap(dr[k]);
        const double cx = drag_coefficient(p, g);
        const double q = 0.5 * p.rho * p.A;
        const double f_bar = q * cx * vr[k] * vr[k];
        const double f_v = 2.0 * q * cx * vr[k];
        const double f_d = dr[k] > 0.0 ? q * drag_coefficient_slope(p, g) * vr[k] * vr[k] : 0.0;
        const double a_vv = 1.0 - t_s / p.M * (p.C_v + f_v);
        const double a_vd = -t_s / p.M * f_d;
        const double c_v = t_s / p.M * (-G - f_bar + f_v * vr[k] + f_d * dr[k]);

        P.cd(k + 1) = P.cd(k) - t_s * P.cv(k) + t_s * vf[k];
        P.Sd.row(k + 1) = P.Sd.row(k) - t_s * P.Sv.row(k);
        P.cv(k + 1) = a_vv * P.cv(k) + a_vd * P.cd(k) + c_v;
        P.Sv.row(k + 1) = a_vv * P.Sv.row(k) + a_vd * P.Sd.row(k);
        P.Sv(k + 1, k) += k_in;
    }
    return P;
}

struct QpData {
    Eigen::MatrixXd H, C;
    Eigen::VectorXd f, d;
    bool trivially_infeasible = false;
};

QpData build_qp(const Prediction& P, const Polytope& terminal, const MpcConfig& cfg, double prev_input) {
    const int N = cfg.N_p;
    const auto& b = cfg.bounds;
    const double s = cfg.torque_scale;
    QpData q;

    // cost: Q sum_{k>=1} (d_k - d_min)^2 + R sum u_k^2 + D sum (u_k - u_{k-1})^2, u in kN m
    Eigen::MatrixXd Diff = Eigen::MatrixXd::Zero(N, N);
    for (int k = 0; k < N; ++k) {
        Diff(k, k) = 1.0;
        if (k > 0) Diff(k, k - 1) = -1.0;
    }
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(N);
    e0(0) = prev_input / s;
    const Eigen::MatrixXd Sd = P.Sd.bottomRows(N);
    const Eigen::VectorXd rd = P.cd.tail(N).array() - b.d_min;
    q.H = 2.0 * (cfg.Q * Sd.transpose() * Sd + cfg.R * Eigen::MatrixXd::Identity(N, N) + cfg.D * Diff.transpose() * Diff);
    q.f = 2.0 * (cfg.Q * Sd.transpose() * rd - cfg.D * Diff.transpose() * e0);

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    auto add = [&](const Eigen::RowVectorXd& row, double r) {
        if (row.norm() < 1e-14) {
            if (r < -cfg.qp_tol) q.trivially_infeasible = true;
            return;
        }
        rows.push_back(row);
        rhs.push_back(r);
    };
    for (int k = 0; k < N; ++k) {
        Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(N);
        e(k) = 1.0;
        add(e, b.T_max / s);
        add(-e, -b.T_min / s);
    }
    for (int k = 1; k <= N; ++k) {
        add(-P.Sd.row(k), P.cd(k) - b.d_min);
        add(-P.Sv.row(k), P.cv(k));
        add(P.Sv.row(k), b.v_max - P.cv(k));
    }
    for (Eigen::Index i = 0; i < terminal.rows(); ++i) {
        const double a_d = terminal.A()(i, 0), a_v = terminal.A()(i, 1);
        add(a_d * P.Sd.row(N) + a_v * P.Sv.row(N), terminal.b()(i) - a_d * P.cd(N) - a_v * P.cv(N));
    }
    q.C.resize(static_cast<Eigen::Index>(rows.size()), N);
    q.d.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        q.C.row(static_cast<Eigen::Index>(i)) = rows[i];
        q.d(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    return q;
}

}  // namespace

MpcSolution solve_mpc(const VehicleParams& params, const RoadProfile& road, const PlatoonState& x_est, long t,
                      const FrontPredictor& pred, const InvariantFamily& family, const MpcConfig& cfg,
                      double prev_input, const std::vector<double>* warm_start) {
    const int N = cfg.N_p;
    const auto& b = cfg.bounds;
    MpcSolution sol;
    sol.front_speed.resize(N + 1);
    sol.front_speed[0] = x_est.v_f;
    for (int k = 0; k < N; ++k)
        sol.front_speed[k + 1] = positive_part(sol.front_speed[k] + b.t_s * pred.accel(t + k));
    sol.terminal_node = family.node_index(std::clamp(sol.front_speed[N], 0.0, b.v_max));
    const Polytope& terminal = family.slices[sol.terminal_node];

    auto fallback = [&] {
        sol.status = SolveStatus::InfeasibleFallback;
        sol.inputs.assign(N, b.T_min);
        sol.states.clear();
        PlatoonState x = x_est;
        sol.states.push_back(x);
        for (int k = 0; k < N; ++k) {
            x = step(params, road, x, b.T_min, 0.0, b.t_s, drag_gap(x.d));
            x.v_f = sol.front_speed[k + 1];
            sol.states.push_back(x);
        }
        return sol;
    };
    if (x_est.d < b.d_min - cfg.qp_tol) return fallback();

    std::vector<double> iterate;
    if (warm_start && static_cast<int>(warm_start->size()) == N) {
        iterate = *warm_start;
    } else {
        iterate.assign(N, std::clamp(steady_torque(params, road, x_est.v, drag_gap(x_est.d)), b.T_min, b.T_max));
    }

    bool any = false, hit_limit = false;
    Prediction best_pred;
    Eigen::VectorXd best_x;
    double best_cost = 0.0;
    for (int pass = 0; pass < cfg.sqp_iters; ++pass) {
        Prediction P = condense(params, road, x_est, sol.front_speed, iterate, cfg);
        QpData q = build_qp(P, terminal, cfg, prev_input);
        if (q.trivially_infeasible) break;
        qp::Options o;
        o.feasibility_tol = cfg.qp_tol;
        const auto r = qp::solve(q.H, q.f, q.C, q.d, o);
        if (r.status == qp::Status::MaxIter) {
            hit_limit = true;
            break;
        }
        if (r.status != qp::Status::Optimal) break;
        any = true;
        sol.passes = pass + 1;
        best_pred = std::move(P);
        best_x = r.x;
        const Eigen::VectorXd rd = best_pred.cd.tail(N) + best_pred.Sd.bottomRows(N) * r.x;
        double jerk = 0.0, prev = prev_input / cfg.torque_scale;
        for (int k = 0; k < N; ++k) {
            jerk += (r.x(k) - prev) * (r.x(k) - prev);
            prev = r.x(k);
        }
        best_cost = cfg.Q * (rd.array() - b.d_min).square().sum() + cfg.R * r.x.squaredNorm() + cfg.D * jerk;
        for (int k = 0; k < N; ++k) iterate[k] = std::clamp(r.x(k) * cfg.torque_scale, b.T_min, b.T_max);
    }
    if (!any) return fallback();

    sol.status = hit_limit ? SolveStatus::MaxIter : SolveStatus::Optimal;
    sol.cost = best_cost;
    sol.inputs.resize(N);
    for (int k = 0; k < N; ++k) sol.inputs[k] = std::clamp(best_x(k) * cfg.torque_scale, b.T_min, b.T_max);
    sol.states.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
        sol.states[k].d = best_pred.cd(k) + best_pred.Sd.row(k).dot(best_x);
        sol.states[k].v = best_pred.cv(k) + best_pred.Sv.row(k).dot(best_x);
        sol.states[k].v_f = sol.front_speed[k];
    }
    return sol;
}

CaccController::CaccController(VehicleParams params, MpcConfig cfg, std::shared_ptr<const InvariantFamily> family,
                               double initial_input)
    : params_(std::move(params)), cfg_(std::move(cfg)), family_(std::move(family)), prev_input_(initial_input) {
    cfg_.validate();
    if (!family_) throw ConfigError("controller needs an invariant family");
}

double CaccController::step(const RoadProfile& road, long t, const Observation& obs,
                            const std::optional<V2VMessage>& msg, const std::vector<double>& ego_speeds) {
    FrontPredictor pred(msg, cfg_.bounds.a_min);
    if (static_cast<long>(ego_speeds.size()) != t - obs.stamp + 1)
        throw InsufficientHistory("ego speed history does not span the delay window");
    x_est_ = shift_state(obs, ego_speeds, pred, cfg_.bounds.t_s);
    last_ = solve_mpc(params_, road, x_est_, t, pred, *family_, cfg_, prev_input_, warm_.empty() ? nullptr : &warm_);
    const double T = last_.inputs.front();
    prev_input_ = T;
    if (last_.status == SolveStatus::InfeasibleFallback) {
        warm_.clear();
    } else {
        warm_.assign(last_.inputs.begin() + 1, last_.inputs.end());
        warm_.push_back(last_.inputs.back());
    }
    return T;
}

ClosedLoopWorld::ClosedLoopWorld(VehicleParams p, RoadProfile r, FrontTrack f, PlatoonState x0)
    : params(std::move(p)), road(r), t_s(f.t_s()), front(std::move(f)), first_step(front.first_step()), x(x0) {
    x.v_f = front.speed(0);
    for (long k = first_step; k <= 0; ++k) {
        gap_history.push_back(x.d + static_cast<double>(k) * t_s * (x.v_f - x.v));
        speed_history.push_back(x.v);
    }
}

double step_closed_loop(ClosedLoopWorld& w, const ChannelConfig& channel, CaccController& ctrl, TrajectoryLog& log) {
    const auto& bounds = ctrl.config().bounds;
    std::optional<V2VMessage> msg;
    try {
        msg = emit(w.front, w.t, channel, {bounds.a_min, bounds.a_max});
    } catch (const InsufficientHistory&) {
        ChannelConfig radar = channel;
        radar.connected = false;
        msg = emit(w.front, w.t, radar, {bounds.a_min, bounds.a_max});
    }
    const auto idx = [&](long k) { return static_cast<std::size_t>(k - w.first_step); };
    const double ego_pos = msg->s_f - w.gap_history.at(idx(msg->stamp));
    const Observation obs = receive(*msg, ego_pos, channel);
    std::vector<double> speeds(w.speed_history.begin() + static_cast<std::ptrdiff_t>(idx(msg->stamp)),
                               w.speed_history.end());
    std::optional<V2VMessage> forecast_msg = channel.connected ? msg : std::nullopt;
    const double T = std::clamp(ctrl.step(w.road, w.t, obs, forecast_msg, speeds), bounds.T_min, bounds.T_max);

    log.append(w.x.d, w.x.v, w.x.v_f, T, ctrl.last_solution().status);
    PlatoonState next = step(w.params, w.road, w.x, T, w.front.accel(w.t), w.t_s);
    next.v_f = w.front.speed(w.t + 1);
    w.x = next;
    ++w.t;
    w.gap_history.push_back(w.x.d);
    w.speed_history.push_back(w.x.v);
    return T;
}

}  // namespace cacc
