#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "alip/bezier.hpp"

namespace alip {

// Reduced-order pendulum state: CoM angle from vertical about the stance
// contact (rad) and angular momentum about the contact (kg m^2/s).
struct AlipState {
    double theta_c = 0.0;
    double L = 0.0;
};

struct RobotParams {
    double m = 0.0;   // total mass, kg
    double g = 9.81;  // m/s^2
};

// Pendulum length r_c as a Bezier curve over normalized phase s = t/T,
// with the rate curve held alongside so ṙ_c never needs numerical
// differentiation.  r_c must be strictly positive, which is enforced via
// control-point positivity (sufficient by the convex-hull property).
class PendulumProfile {
public:
    explicit PendulumProfile(BezierCurve r_c);

    double r(double s) const { return r_c_.evaluate(s); }
    // dr/dt at phase s for a step of duration T.
    double r_dot(double s, double T) const { return r_c_ds_.evaluate(s) / T; }

    const BezierCurve& r_curve() const { return r_c_; }

private:
    BezierCurve r_c_;
    BezierCurve r_c_ds_;
};

// Continuous-phase dynamics: [theta_dot, L_dot] =
// [L/(m r_c^2), m g r_c sin(theta_c) + u].
AlipState dynamics(double t, const AlipState& x, const RobotParams& params,
                   const PendulumProfile& profile, double T, double u);

// CoM position (x, z) = (r_c sin th, r_c cos th).
std::pair<double, double> com_position(double r_c, double theta_c);

// CoM velocity (vx, vz) = (r cos(th) th_dot + r_dot sin th,
//                          -r sin(th) th_dot + r_dot cos th).
std::pair<double, double> com_velocity(double r_c, double r_dot, double theta_c,
                                       double theta_dot);

using DynamicsFn = std::function<AlipState(double t, const AlipState& x)>;

// One explicit Euler step x + dt*f(t, x).
AlipState euler_step(const DynamicsFn& f, double t_n, const AlipState& x_n, double dt);

struct TimedState {
    double t;
    AlipState x;
};

// Repeated Euler steps from t0 to t_end; the last substep is truncated so the
// final sample lands exactly on t_end.  Returns every sample including x0.
std::vector<TimedState> integrate_phase(const AlipState& x0, double t0, double t_end,
                                        double dt, const RobotParams& params,
                                        const PendulumProfile& profile, double T,
                                        const std::function<double(double)>& torque_schedule);

// Final-state-only variant of integrate_phase with constant torque; produces
// exactly the same step sequence (prediction and simulation hot path).
AlipState integrate_final(AlipState x, double t0, double t_end, double dt,
                          const RobotParams& params, const PendulumProfile& profile,
                          double T, double u = 0.0);

}  // namespace alip
