#pragma once

#include "alip/traj_store.hpp"

namespace alip::testing {

inline RobotParams robot32() {
    RobotParams p;
    p.m = 32.0;
    return p;
}

inline const BezierCurve& default_rc() {
    static const BezierCurve rc({0.90, 0.86, 0.84, 0.84, 0.86, 0.90});
    return rc;
}

inline const NominalTrajectory& flat_traj() {
    static const NominalTrajectory traj =
        synthesize_nominal(0.0, 0.5, 0.4, robot32(), default_rc());
    return traj;
}

inline const NominalTrajectory& incline8_traj() {
    static const NominalTrajectory traj =
        synthesize_nominal(8.0, 0.5, 0.4, robot32(), default_rc());
    return traj;
}

inline const NominalTrajectory& marching_traj() {
    static const NominalTrajectory traj =
        synthesize_nominal(0.0, 0.0, 0.4, robot32(), default_rc());
    return traj;
}

// Three-incline library with breakpoints and sensitivity curves, as shipped.
inline const TrajectoryLibrary& small_library() {
    static const TrajectoryLibrary lib = [] {
        TrajectoryLibrary l;
        const RobotParams params = robot32();
        for (const double inc : {0.0, 8.0, 15.0})
            l.trajectories.push_back(synthesize_nominal(inc, 0.5, 0.4, params, default_rc()));
        l.breakpoints = {8.0, 15.0};
        const NominalTrajectory edge20 =
            synthesize_nominal(20.0, 0.5, 0.4, params, default_rc());
        attach_incline_sensitivity(l.trajectories[0], l.trajectories[1], params);
        attach_incline_sensitivity(l.trajectories[1], l.trajectories[2], params);
        attach_incline_sensitivity(l.trajectories[2], edge20, params);
        return l;
    }();
    return lib;
}

}  // namespace alip::testing
