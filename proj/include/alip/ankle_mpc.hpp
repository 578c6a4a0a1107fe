#pragma once

#include <Eigen/Dense>
#include <limits>
#include <utility>
#include <vector>

#include "alip/alip_core.hpp"
#include "alip/traj_store.hpp"

namespace alip {

struct MpcConfig {
    int horizon_steps = 20;      // substeps N
    double dt_mpc = 0.02;        // substep length (s)
    double torque_limit = 23.0;  // box bound on each torque
    Eigen::Matrix2d Q = (Eigen::Matrix2d() << 10.0, 0.0, 0.0, 1.0).finished();
    double R = 0.1;
    Eigen::Matrix2d Qf = (Eigen::Matrix2d() << 100.0, 0.0, 0.0, 10.0).finished();
    int max_iterations = 200;
    double kkt_tolerance = 1e-8;
};

// One-substep affine model x_{k+1} = A x_k + B u_k + c about the nominal;
// impact boundaries carry their own (A_imp, c_imp) pair.
struct LinearizedStep {
    Eigen::Matrix2d A;
    Eigen::Vector2d B;
    Eigen::Vector2d c;
};

// Euler-map Jacobians about (theta_nom(t), L_nom(t), u=0):
// A = I + dt*df/dx, B = [0, dt], c makes the nominal exact.
LinearizedStep linearize_dynamics(const NominalTrajectory& traj, double t, double dt_mpc,
                                  const RobotParams& params);

// Central-difference Jacobian of the impact map about the nominal pre-impact
// state and nominal foot displacement; c_imp makes the nominal pair exact.
std::pair<Eigen::Matrix2d, Eigen::Vector2d> linearize_impact(const NominalTrajectory& traj,
                                                             const RobotParams& params);

struct MpcResult {
    double u0 = 0.0;
    std::vector<AlipState> predicted;  // states after each substep
    int iterations = 0;
    double kkt_residual = 0.0;
    double solve_time_us = 0.0;
    bool converged = false;
};

// Box-constrained condensed QP over the torque sequence, solved by a
// deterministic projected-gradient method with exact line search plus a
// free-set Newton refinement per iteration (the better iterate by cost wins,
// so the cost is monotone).  `world_incline_deg` selects the reference shift
// via the trajectory's incline-sensitivity curves; NaN means the design
// incline (references = stored nominal).
class AnkleMpc {
public:
    AnkleMpc(const MpcConfig& cfg, const RobotParams& params);

    MpcResult solve(const AlipState& x, double phase_time, const NominalTrajectory& traj,
                    double world_incline_deg = std::numeric_limits<double>::quiet_NaN());

    const MpcConfig& config() const { return cfg_; }

private:
    MpcConfig cfg_;
    RobotParams params_;
    // Workspace, sized once in the constructor.
    std::vector<LinearizedStep> steps_;
    std::vector<Eigen::Vector2d> refs_;
    std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> G_;
    std::vector<Eigen::Vector2d> dvec_;
    std::vector<Eigen::Matrix2d> P_;
    Eigen::MatrixXd H_;
    Eigen::VectorXd g_, u_, grad_, u_trial_, u_newton_;
};

// Convenience single-call form.
MpcResult solve_ankle_mpc(const AlipState& x, double phase_time, const NominalTrajectory& traj,
                          const MpcConfig& cfg, const RobotParams& params,
                          double world_incline_deg = std::numeric_limits<double>::quiet_NaN());

}  // namespace alip
