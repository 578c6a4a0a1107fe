#include "alip/impact_map.hpp"

#include <cmath>

#include "alip/errors.hpp"

namespace alip {

PreImpactState PreImpactState::from_state(const AlipState& x, double r_c, double r_dot,
                                          const RobotParams& params) {
    if (r_c <= 0.0)
        throw GeometryError("pre-impact pendulum length not positive", r_c);
    if (params.m <= 0.0)
        throw ParameterError("pre-impact state: mass must be positive");
    return {x.theta_c, x.L / (params.m * r_c * r_c), r_c, r_dot, x.L};
}

AlipState post_impact_state(const PreImpactState& pre, const FootDisplacement& P,
                            double r_c_plus, const RobotParams& params) {
    if (r_c_plus <= 0.0)
        throw ParameterError("post_impact_state: new pendulum length not positive");
    if (!(std::isfinite(P.horizontal) && std::isfinite(P.vertical)))
        throw InvalidStateError("post_impact_state: non-finite foot displacement");

    const double c = std::cos(pre.theta_c_minus);
    const double s = std::sin(pre.theta_c_minus);
    const double arg = (pre.r_c_minus * c - P.vertical) / r_c_plus;
    if (std::fabs(arg) > 1.0)
        throw GeometryError("post_impact_state: new CoM angle has no solution, cos=" +
                                std::to_string(arg),
                            arg);
    const double theta_plus = std::acos(arg);

    // Momentum transfer to the new contact, expanded component form.
    const double L_plus =
        pre.L_B_minus +
        params.m * (P.vertical * (pre.r_c_minus * c * pre.theta_dot_minus +
                                  pre.r_dot_minus * s) -
                    P.horizontal * (-pre.r_c_minus * s * pre.theta_dot_minus +
                                    pre.r_dot_minus * c));
    return {theta_plus, L_plus};
}

}  // namespace alip
