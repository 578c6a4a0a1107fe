#include "alip/ankle_mpc.hpp"

#include <chrono>
#include <cmath>

#include "alip/errors.hpp"
#include "alip/impact_map.hpp"

namespace alip {

namespace {

void check_config(const MpcConfig& cfg) {
    if (cfg.horizon_steps < 1) throw ParameterError("MPC horizon must be >= 1");
    if (!(cfg.dt_mpc > 0.0)) throw ParameterError("MPC substep must be positive");
    if (!(cfg.torque_limit > 0.0)) throw ParameterError("torque limit must be positive");
    if (!(cfg.R > 0.0)) throw ParameterError("torque weight R must be positive");
    if ((cfg.Q - cfg.Q.transpose()).cwiseAbs().maxCoeff() > 0.0 ||
        (cfg.Qf - cfg.Qf.transpose()).cwiseAbs().maxCoeff() > 0.0)
        throw ParameterError("state weights must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> esQ(cfg.Q), esQf(cfg.Qf);
    if (esQ.eigenvalues().minCoeff() < 0.0 || esQf.eigenvalues().minCoeff() < 0.0)
        throw ParameterError("state weights must be positive semidefinite");
}

Eigen::Vector2d to_vec(const AlipState& x) { return {x.theta_c, x.L}; }

AlipState exact_impact(const AlipState& x, const NominalTrajectory& traj,
                       const RobotParams& params) {
    const PendulumProfile& prof = traj.profile();
    const auto pre = PreImpactState::from_state(x, prof.r(1.0), prof.r_dot(1.0, traj.T), params);
    return post_impact_state(pre, traj.sagittal_step(), prof.r(0.0), params);
}

}  // namespace

LinearizedStep linearize_dynamics(const NominalTrajectory& traj, double t, double dt_mpc,
                                  const RobotParams& params) {
    const double s = std::min(std::max(t / traj.T, 0.0), 1.0);
    const double r = traj.profile().r(s);
    const AlipState xn = traj.nominal_state(t);
    LinearizedStep st;
    st.A << 1.0, dt_mpc / (params.m * r * r),
        dt_mpc * params.m * params.g * r * std::cos(xn.theta_c), 1.0;
    st.B << 0.0, dt_mpc;
    const AlipState xn2 = traj.nominal_state(std::min(t + dt_mpc, traj.T));
    st.c = to_vec(xn2) - st.A * to_vec(xn);
    return st;
}

std::pair<Eigen::Matrix2d, Eigen::Vector2d> linearize_impact(const NominalTrajectory& traj,
                                                             const RobotParams& params) {
    const AlipState xm = traj.nominal_state(traj.T);
    const double h = 1e-6;
    Eigen::Matrix2d A;
    for (int j = 0; j < 2; ++j) {
        AlipState xp = xm, xn = xm;
        (j == 0 ? xp.theta_c : xp.L) += h;
        (j == 0 ? xn.theta_c : xn.L) -= h;
        const AlipState fp = exact_impact(xp, traj, params);
        const AlipState fm = exact_impact(xn, traj, params);
        A.col(j) = (to_vec(fp) - to_vec(fm)) / (2.0 * h);
    }
    const Eigen::Vector2d c = to_vec(exact_impact(xm, traj, params)) - A * to_vec(xm);
    return {A, c};
}

AnkleMpc::AnkleMpc(const MpcConfig& cfg, const RobotParams& params)
    : cfg_(cfg), params_(params) {
    check_config(cfg_);
    const int N = cfg_.horizon_steps;
    steps_.resize(static_cast<size_t>(N));
    refs_.resize(static_cast<size_t>(N));
    G_.assign(static_cast<size_t>(N), Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, N));
    dvec_.resize(static_cast<size_t>(N));
    P_.resize(static_cast<size_t>(N));
    H_.resize(N, N);
    g_.resize(N);
    u_.resize(N);
    grad_.resize(N);
    u_trial_.resize(N);
    u_newton_.resize(N);
}

MpcResult AnkleMpc::solve(const AlipState& x, double phase_time, const NominalTrajectory& traj,
                          double world_incline_deg) {
    const auto t_begin = std::chrono::steady_clock::now();
    const int N = cfg_.horizon_steps;
    const double lim = cfg_.torque_limit;
    const double winc = std::isnan(world_incline_deg) ? traj.incline_deg : world_incline_deg;

    const auto [A_imp, c_imp] = linearize_impact(traj, params_);

    // Build the substep chain; an impact inside the horizon is folded into the
    // substep that crosses it so no extra decision variable appears.
    double tau = phase_time;
    for (int k = 0; k < N; ++k) {
        double hk = std::min(cfg_.dt_mpc, traj.T - tau);
        if (hk < 1e-9) {  // called at the very boundary: next substep is post-swap
            hk = cfg_.dt_mpc;
            tau = 0.0;
        }
        LinearizedStep st = linearize_dynamics(traj, tau, hk, params_);
        double tau2 = tau + hk;
        if (tau2 >= traj.T - 1e-9) {
            st.A = A_imp * st.A;
            st.B = A_imp * st.B;
            st.c = A_imp * st.c + c_imp;
            tau2 = 0.0;
        }
        steps_[static_cast<size_t>(k)] = st;
        refs_[static_cast<size_t>(k)] = to_vec(traj.reference_state(tau2, winc));
        tau = tau2;
    }

    // Condense: x_k = P_k x0 + G_k u + d_k.
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    Eigen::Matrix<double, 2, Eigen::Dynamic> G =
        Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, N);
    for (int k = 0; k < N; ++k) {
        const auto& st = steps_[static_cast<size_t>(k)];
        d = st.A * d + st.c;
        G = st.A * G;
        G.col(k) += st.B;
        P = st.A * P;
        G_[static_cast<size_t>(k)] = G;
        dvec_[static_cast<size_t>(k)] = d;
        P_[static_cast<size_t>(k)] = P;
    }

    const Eigen::Vector2d x0 = to_vec(x);
    H_.setZero();
    H_.diagonal().setConstant(2.0 * cfg_.R);
    g_.setZero();
    for (int k = 0; k < N; ++k) {
        const Eigen::Matrix2d& W = (k == N - 1) ? cfg_.Qf : cfg_.Q;
        const Eigen::Vector2d e0 =
            P_[static_cast<size_t>(k)] * x0 + dvec_[static_cast<size_t>(k)] -
            refs_[static_cast<size_t>(k)];
        const auto& Gk = G_[static_cast<size_t>(k)];
        H_.noalias() += 2.0 * Gk.transpose() * W * Gk;
        g_.noalias() += 2.0 * Gk.transpose() * (W * e0);
    }
    H_ = 0.5 * (H_ + H_.transpose()).eval();

    // Projected gradient with exact line search + free-set Newton refinement.
    const auto clamp_vec = [lim](Eigen::VectorXd& v) {
        v = v.cwiseMax(-lim).cwiseMin(lim);
    };
    const auto cost = [&](const Eigen::VectorXd& v) {
        return 0.5 * v.dot(H_ * v) + g_.dot(v);
    };

    u_ = -g_.cwiseQuotient(H_.diagonal().cwiseMax(1e-12));
    clamp_vec(u_);

    int iterations = cfg_.max_iterations;
    double kkt = 0.0;
    bool converged = false;
    for (int it = 0; it < cfg_.max_iterations; ++it) {
        grad_.noalias() = H_ * u_ + g_;
        kkt = (u_ - (u_ - grad_).cwiseMax(-lim).cwiseMin(lim)).cwiseAbs().maxCoeff();
        if (kkt <= cfg_.kkt_tolerance) {
            iterations = it;
            converged = true;
            break;
        }
        const double denom = grad_.dot(H_ * grad_);
        const double alpha = denom > 0.0 ? grad_.squaredNorm() / denom : 1.0;
        u_trial_ = u_ - alpha * grad_;
        clamp_vec(u_trial_);

        std::vector<int> free_idx;
        free_idx.reserve(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i)
            if (std::fabs(u_trial_(i)) < lim - 1e-14) free_idx.push_back(i);
        u_newton_ = u_trial_;
        if (!free_idx.empty()) {
            const int nf = static_cast<int>(free_idx.size());
            Eigen::MatrixXd Hf(nf, nf);
            Eigen::VectorXd gf(nf);
            for (int a = 0; a < nf; ++a) {
                gf(a) = g_(free_idx[static_cast<size_t>(a)]);
                for (int b = 0; b < nf; ++b)
                    Hf(a, b) = H_(free_idx[static_cast<size_t>(a)],
                                  free_idx[static_cast<size_t>(b)]);
                for (int i = 0; i < N; ++i)
                    if (std::fabs(u_trial_(i)) >= lim - 1e-14)
                        gf(a) += H_(free_idx[static_cast<size_t>(a)], i) * u_trial_(i);
            }
            const Eigen::LLT<Eigen::MatrixXd> llt(Hf);
            if (llt.info() == Eigen::Success) {
                const Eigen::VectorXd sol = llt.solve(-gf);
                for (int a = 0; a < nf; ++a) u_newton_(free_idx[static_cast<size_t>(a)]) = sol(a);
                clamp_vec(u_newton_);
            }
        }
        u_ = cost(u_trial_) <= cost(u_newton_) ? u_trial_ : u_newton_;
    }
    if (!converged) {
        grad_.noalias() = H_ * u_ + g_;
        kkt = (u_ - (u_ - grad_).cwiseMax(-lim).cwiseMin(lim)).cwiseAbs().maxCoeff();
        converged = kkt <= cfg_.kkt_tolerance;
    }

    MpcResult res;
    res.u0 = u_(0);
    res.iterations = iterations;
    res.kkt_residual = kkt;
    res.converged = converged;
    res.predicted.resize(static_cast<size_t>(N));
    for (int k = 0; k < N; ++k) {
        const Eigen::Vector2d xk =
            P_[static_cast<size_t>(k)] * x0 + G_[static_cast<size_t>(k)] * u_ +
            dvec_[static_cast<size_t>(k)];
        res.predicted[static_cast<size_t>(k)] = {xk(0), xk(1)};
    }
    res.solve_time_us =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t_begin)
            .count();
    return res;
}

MpcResult solve_ankle_mpc(const AlipState& x, double phase_time, const NominalTrajectory& traj,
                          const MpcConfig& cfg, const RobotParams& params,
                          double world_incline_deg) {
    AnkleMpc mpc(cfg, params);
    return mpc.solve(x, phase_time, traj, world_incline_deg);
}

}  // namespace alip
