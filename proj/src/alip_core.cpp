#include "alip/alip_core.hpp"

#include <cmath>
#include <string>

#include "alip/errors.hpp"

namespace alip {

PendulumProfile::PendulumProfile(BezierCurve r_c)
    : r_c_(std::move(r_c)), r_c_ds_(r_c_.derivative()) {
    for (double c : r_c_.coefficients())
        if (c <= 0.0)
            throw GeometryError("pendulum length control point not positive", c);
}

namespace {

// Phase for curve evaluation; tolerates sub-nanosecond overshoot from float
// accumulation, everything further out is a genuine domain violation.
double curve_phase(double t, double T) {
    double s = t / T;
    if (s < 0.0 && s > -1e-9) s = 0.0;
    if (s > 1.0 && s < 1.0 + 1e-9) s = 1.0;
    return s;
}

}  // namespace

AlipState dynamics(double t, const AlipState& x, const RobotParams& params,
                   const PendulumProfile& profile, double T, double u) {
    if (!(std::isfinite(x.theta_c) && std::isfinite(x.L) && std::isfinite(u)))
        throw InvalidStateError("dynamics: non-finite state or torque");
    if (params.m <= 0.0)
        throw ParameterError("dynamics: mass must be positive");
    const double r = profile.r(curve_phase(t, T));
    if (r <= 0.0)
        throw GeometryError("dynamics: pendulum length not positive", r);
    return {x.L / (params.m * r * r), params.m * params.g * r * std::sin(x.theta_c) + u};
}

std::pair<double, double> com_position(double r_c, double theta_c) {
    if (r_c <= 0.0)
        throw GeometryError("com_position: pendulum length not positive", r_c);
    return {r_c * std::sin(theta_c), r_c * std::cos(theta_c)};
}

std::pair<double, double> com_velocity(double r_c, double r_dot, double theta_c,
                                       double theta_dot) {
    if (r_c <= 0.0)
        throw GeometryError("com_velocity: pendulum length not positive", r_c);
    return {r_c * std::cos(theta_c) * theta_dot + r_dot * std::sin(theta_c),
            -r_c * std::sin(theta_c) * theta_dot + r_dot * std::cos(theta_c)};
}

AlipState euler_step(const DynamicsFn& f, double t_n, const AlipState& x_n, double dt) {
    if (!(dt > 0.0))
        throw ParameterError("euler_step: dt must be positive");
    const AlipState k = f(t_n, x_n);
    if (!(std::isfinite(k.theta_c) && std::isfinite(k.L)))
        throw PropagationError("euler_step: dynamics returned non-finite derivative at t=" +
                                   std::to_string(t_n),
                               t_n);
    return {x_n.theta_c + dt * k.theta_c, x_n.L + dt * k.L};
}

std::vector<TimedState> integrate_phase(const AlipState& x0, double t0, double t_end,
                                        double dt, const RobotParams& params,
                                        const PendulumProfile& profile, double T,
                                        const std::function<double(double)>& torque_schedule) {
    if (!(t_end >= t0))
        throw ParameterError("integrate_phase: t_end before t0");
    if (!(dt > 0.0))
        throw ParameterError("integrate_phase: dt must be positive");
    const DynamicsFn f = [&](double t, const AlipState& x) {
        return dynamics(t, x, params, profile, T, torque_schedule ? torque_schedule(t) : 0.0);
    };
    std::vector<TimedState> out;
    out.reserve(static_cast<size_t>((t_end - t0) / dt) + 2);
    out.push_back({t0, x0});
    double t = t0;
    AlipState x = x0;
    while (t < t_end - 1e-15) {
        const double h = std::min(dt, t_end - t);
        x = euler_step(f, t, x, h);
        t += h;
        out.push_back({t, x});
    }
    return out;
}

AlipState integrate_final(AlipState x, double t0, double t_end, double dt,
                          const RobotParams& params, const PendulumProfile& profile,
                          double T, double u) {
    double t = t0;
    while (t < t_end - 1e-15) {
        const double h = std::min(dt, t_end - t);
        const AlipState k = dynamics(t, x, params, profile, T, u);
        x = {x.theta_c + h * k.theta_c, x.L + h * k.L};
        t += h;
    }
    return x;
}

}  // namespace alip
