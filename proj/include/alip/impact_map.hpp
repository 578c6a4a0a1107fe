#pragma once

#include "alip/alip_core.hpp"

namespace alip {

// State just before foot swap.  theta_dot is redundant with L (the hybrid
// state stays two-dimensional); from_state derives it so the two can never
// disagree.
struct PreImpactState {
    double theta_c_minus;
    double theta_dot_minus;
    double r_c_minus;
    double r_dot_minus;
    double L_B_minus;

    static PreImpactState from_state(const AlipState& x, double r_c, double r_dot,
                                     const RobotParams& params);
};

// Stance-to-swing foot vector in the working plane: x sagittally, y frontally,
// plus the vertical component.
struct FootDisplacement {
    double horizontal = 0.0;
    double vertical = 0.0;
};

// Foot-swap map: the CoM angle about the new contact comes from the triangle
// geometry, theta_c_plus = arccos((r_c_minus cos(theta_minus) - P_z)/r_c_plus),
// and the angular momentum transfers as L_plus = L_B_minus + m*(P_z vx - P_x vz).
// Geometry infeasibility (|arccos argument| > 1) is a hard error, never a clamp.
AlipState post_impact_state(const PreImpactState& pre, const FootDisplacement& P,
                            double r_c_plus, const RobotParams& params);

}  // namespace alip
