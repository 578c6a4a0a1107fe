#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "alip/alip_core.hpp"
#include "alip/ankle_mpc.hpp"
#include "alip/foot_placement.hpp"
#include "alip/traj_store.hpp"

namespace alip {

struct ProfilePoint {
    double t = 0.0;
    double value = 0.0;
};

// Piecewise-linear lookup; constant extrapolation beyond either end, empty
// profiles evaluate to `fallback`.
double eval_profile(const std::vector<ProfilePoint>& profile, double t, double fallback = 0.0);

struct Disturbance {
    double t = 0.0;
    bool frontal = false;  // false: applied to the sagittal angular momentum
    double delta_L = 0.0;
};

struct Scenario {
    std::string name = "scenario";
    double duration = 0.0;  // required in files
    unsigned seed = 1;
    std::string control = "in_process";  // or "udp"
    double placement_window = 0.6;       // executable lateral window around the nominal step
    double lean_cap = 4.0;               // angular-momentum offset bound for speed tracking
    double lean_slew = 0.2;              // per-solve change bound on that offset
    double dt = 5e-4;
    int mpc_every_ticks = 40;
    std::vector<ProfilePoint> incline;  // degrees
    std::vector<ProfilePoint> belt;     // m/s
    std::vector<ProfilePoint> command;  // m/s
    std::vector<Disturbance> disturbances;
};

// Text format "ALIPSCEN 1": param/control/profile/disturb directives.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& name);

inline constexpr unsigned kEventImpact = 1u;
inline constexpr unsigned kEventSwitch = 2u;
inline constexpr unsigned kEventFallback = 4u;

struct LogRow {
    double t = 0.0;
    AlipState sagittal;
    AlipState frontal;
    double torque = 0.0;
    double y_des = 0.0;
    int traj_index = 0;
    int leg = 0;  // 0 = left stance, 1 = right stance
    double latency_us = 0.0;
    unsigned events = 0;
};

struct StepSummary {
    int index = 0;
    double t_end = 0.0;
    double u_max = 0.0;  // max |torque| commanded during the step
    AlipState sagittal_end;
    AlipState frontal_end;
    double y_applied = 0.0;
    int traj_index = 0;
};

struct RunResult {
    std::vector<LogRow> rows;
    std::vector<StepSummary> steps;
    bool fell = false;
    double fall_time = std::numeric_limits<double>::quiet_NaN();
    uint64_t mpc_solves = 0;
    double mean_solve_us = 0.0;
};

struct HarnessOptions {
    MpcConfig mpc{};
    RobotParams params{};
    std::string udp_host = "127.0.0.1";
    int udp_port = 47801;
    int udp_timeout_us = 20000;  // generous so loopback offload stays lossless
};

// Runs both pendulum planes against the scenario profiles: ankle torque from
// the MPC on the sagittal plane, lateral foot placement on the frontal plane.
// `lut` may be null, in which case placements are planned directly.
RunResult run_closed_loop(const Scenario& scenario, const TrajectoryLibrary& library,
                          const LookupTable* lut, const HarnessOptions& opts = {});

// Columns: time,theta_sag,L_sag,theta_fro,L_fro,torque,y_des,traj,leg,latency_us,events
void export_csv(const RunResult& result, const TrajectoryLibrary& library,
                const std::string& path);

// Self-contained SVG: torque trace with the saturation band, plus both
// angular-momentum traces.
void emit_plot(const RunResult& result, const std::string& path, double torque_limit);

}  // namespace alip
