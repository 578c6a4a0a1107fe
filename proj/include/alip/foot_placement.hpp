#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "alip/alip_core.hpp"
#include "alip/traj_store.hpp"

namespace alip {

// Frontal-plane query: current state, time since step start, and the desired
// end-of-next-step (pre-impact) angular momentum.
struct PlacementQuery {
    AlipState state;
    double phase_time = 0.0;
    double L_des = 0.0;
};

struct PlacementConfig {
    double delta = 0.02;  // candidate spacing (m)
    // Kinematic clamp for the returned placement.  NaN means "derive from the
    // trajectory": step width +/- 3 m, wide enough that the secant's linear
    // extrapolation stays smooth across the whole lookup-table grid; callers
    // with a real reachability window clamp again at application time.
    double y_min = std::numeric_limits<double>::quiet_NaN();
    double y_max = std::numeric_limits<double>::quiet_NaN();
    double dt = 1e-3;  // prediction Euler step
};

// Integrates the frontal ALIP to the end of the current step, applies the
// impact map with lateral displacement y_candidate and the trajectory's
// frontal vertical displacement, integrates the full next step, and returns
// the final (pre-impact) angular momentum.
double predict_next_step_end_L(const AlipState& x0, double t0, double y_candidate,
                               const NominalTrajectory& traj, const RobotParams& params,
                               double dt);

// Secant through two (placement, momentum) samples solved for L_des.
double interpolate_lateral(double y1, double L1, double y2, double L2, double L_des);
// Same formula with CoM angle as the regulated quantity.
double interpolate_lateral_theta(double y1, double theta1, double y2, double theta2,
                                 double theta_des);

struct PlacementDiagnostics {
    bool fallback = false;      // returned the nominal width because prediction failed
    bool clamped = false;       // secant result hit the kinematic clamp
    std::string reason;
};

// Two-candidate prediction + secant interpolation, clamped to the kinematic
// range.  Falls back to the nominal width when both predictions are
// geometrically infeasible or the secant is degenerate.
double plan_placement(const PlacementQuery& q, const NominalTrajectory& traj,
                      const RobotParams& params, double dt,
                      const PlacementConfig& cfg = {},
                      PlacementDiagnostics* diag = nullptr);

struct LutAxis {
    double start = 0.0;
    double step = 0.0;
    std::uint32_t count = 0;
};

// Dense (theta_c, L, phase_time) -> y_des grid with multilinear interpolation.
// Queries clamp to the axis ranges, never allocate, and are branch-free apart
// from the clamps.
class LookupTable {
public:
    LookupTable() = default;
    LookupTable(LutAxis theta, LutAxis L, LutAxis phase, std::vector<double> values);

    double query(const AlipState& state, double phase_time) const noexcept;

    const LutAxis& theta_axis() const { return theta_; }
    const LutAxis& l_axis() const { return l_; }
    const LutAxis& phase_axis() const { return phase_; }
    const std::vector<double>& values() const { return values_; }
    double value_at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return values_[(static_cast<size_t>(i) * l_.count + j) * phase_.count + k];
    }

    void save(const std::string& path) const;
    static LookupTable load(const std::string& path);

private:
    LutAxis theta_, l_, phase_;
    std::vector<double> values_;
};

struct LutAxesSpec {
    LutAxis theta, L, phase;
    // Default grid for a trajectory: theta nominal range +/- 0.3 rad (41),
    // L nominal range +/- 50% of the peak magnitude (41), phase [0, T] (21).
    static LutAxesSpec defaults_for(const NominalTrajectory& traj);
    // Operating-envelope grid, same node count: theta nominal range +/- 0.015
    // rad, L and phase as in defaults_for.  Closed-loop states under +/-20%
    // momentum kicks stay within about 0.009 rad and 41% of these spans, so the
    // planner is smooth across every cell and multilinear queries track direct
    // planning to a few 1e-4 m.  The wide defaults_for box also contains states
    // whose predicted impact angle crosses zero, where the planner's output
    // jumps between the kinematic clamps and no 41-node grid can interpolate it;
    // prefer this grid for tables that are queried in closed loop.
    static LutAxesSpec envelope_for(const NominalTrajectory& traj);
};

using LdesPolicy = std::function<double(const AlipState& node_state, double phase_time)>;

struct LutBuildReport {
    std::size_t total_nodes = 0;
    std::size_t infeasible_nodes = 0;  // filled from the nearest feasible neighbor
};

// Dense evaluation of plan_placement at every grid node in deterministic
// row-major (theta, L, phase) order.  A null policy means the trajectory's
// frontal pre-impact momentum.
LookupTable build_lookup_table(const NominalTrajectory& traj, const RobotParams& params,
                               const LutAxesSpec& axes, const LdesPolicy& l_des_policy,
                               double dt, LutBuildReport* report = nullptr);

double lut_query(const LookupTable& lut, const AlipState& state, double phase_time);

}  // namespace alip
