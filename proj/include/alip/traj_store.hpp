#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alip/alip_core.hpp"
#include "alip/bezier.hpp"
#include "alip/impact_map.hpp"

namespace alip {

// One periodic single-step gait: named Bezier curves over normalized phase
// plus step metadata.  Required curves: "L_nom", "theta_c_nom", "r_c".
// Auxiliary curves carried by synthesized trajectories:
//   "theta_c_nom_frontal", "L_nom_frontal"  — frontal-plane nominal,
//   "theta_inc_sens", "L_inc_sens"          — per-degree reference shift
//                                             toward the next incline band.
// Numeric parameters (params map): step_dx, step_dz (sagittal stance-to-swing
// displacement), step_dy (lateral step width), step_dz_frontal (vertical
// displacement seen by the frontal plane; zero for incline walking since
// laterally separated footholds on a pitched surface are level), com_height,
// synth_dt, periodic, periodic_tol, band_span_deg.
struct NominalTrajectory {
    std::string name;
    double incline_deg = 0.0;
    double nominal_speed = 0.0;
    double T = 0.0;
    double mass = 0.0;
    std::map<std::string, BezierCurve> curves;
    std::map<std::string, double> params;

    const BezierCurve& curve(const std::string& key) const;
    bool has_curve(const std::string& key) const { return curves.count(key) != 0; }
    double param(const std::string& key) const;
    double param_or(const std::string& key, double fallback) const;

    // Cached pendulum profile built from the "r_c" curve.  First call is not
    // thread-safe; load_library/synthesize_nominal pre-warm it.
    const PendulumProfile& profile() const;

    // Sagittal nominal state at a phase time in [0, T] (clamped).
    AlipState nominal_state(double phase_time) const;
    // Frontal nominal state (requires the frontal curves).
    AlipState frontal_nominal_state(double phase_time) const;
    // Sagittal reference at the given world incline: the nominal shifted by
    // the incline-sensitivity curves, with the incline offset clamped to the
    // trajectory's band span.  Without sensitivity curves this is the nominal.
    AlipState reference_state(double phase_time, double world_incline_deg) const;

    // Frontal-plane desired pre-impact angular momentum (end of step).
    double l_des_frontal() const;

    FootDisplacement sagittal_step() const;
    // Frontal-plane displacement for a lateral foot position y.
    FootDisplacement frontal_step(double y) const;

private:
    mutable std::optional<PendulumProfile> profile_cache_;
};

struct TrajectoryLibrary {
    std::vector<NominalTrajectory> trajectories;
    std::vector<double> breakpoints;  // strictly increasing, size = count-1

    // Trajectory whose breakpoint interval contains the incline; inclines
    // beyond the last breakpoint use the last trajectory.
    const NominalTrajectory& select_by_incline(double incline_deg) const;
    int index_by_incline(double incline_deg) const;
};

TrajectoryLibrary load_library(const std::string& path);
void save_library(const TrajectoryLibrary& lib, const std::string& path);

struct PeriodicityReport {
    double residual = 0.0;
    bool pass = false;
    AlipState initial;
    AlipState after_pair;
};

// Integrates the torque-free step, applies the impact map with the
// trajectory's stored displacement, repeats for the second step of the pair,
// and reports the inf-norm defect against the initial state.
PeriodicityReport check_periodicity(const NominalTrajectory& traj, const RobotParams& params,
                                    double tol);

struct SynthesisOptions {
    double dt = 1e-3;              // Euler step for shooting and sampling
    int fit_order = 7;
    double fit_tol = 1e-4;         // max Bezier fit error against samples
    double shoot_tol = 1e-11;      // step-map fixed-point residual target
    int max_shoot_iterations = 100;
    double step_width = 0.25;      // lateral step width (m)
    double periodic_tol = 1e-6;    // stored pass tolerance for check_periodicity
};

// Finds the torque-free period-one orbit of the step map by damped-Newton
// single shooting (step displacement = (-speed*T, speed*T*tan(incline)) so the
// average CoM horizontal speed equals `speed`), fits pinned-endpoint Bezier
// curves to the orbit, and does the same for the frontal plane at the lateral
// step width with zero vertical displacement.
NominalTrajectory synthesize_nominal(double incline_deg, double speed, double T,
                                     const RobotParams& params, const BezierCurve& r_c_profile,
                                     const SynthesisOptions& opts = {});

// Attaches incline-sensitivity curves to `traj`: the per-degree secant between
// its orbit and `band_edge`'s orbit (same speed and duration), fitted like the
// nominals.  Makes reference_state continuous across trajectory switches.
void attach_incline_sensitivity(NominalTrajectory& traj, const NominalTrajectory& band_edge,
                                const RobotParams& params);

}  // namespace alip
