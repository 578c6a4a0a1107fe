#include "alip/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "alip/ankle_mpc.hpp"
#include "alip/errors.hpp"
#include "alip/foot_placement.hpp"
#include "alip/mpc_service.hpp"
#include "alip/sim_harness.hpp"
#include "alip/traj_store.hpp"

namespace alip {

namespace {

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop.store(true); }

const std::vector<double> kDefaultRc = {0.90, 0.86, 0.84, 0.84, 0.86, 0.90};

void split_host_port(const std::string& s, std::string& host, uint16_t& port) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) {
        host = s;
        return;
    }
    host = s.substr(0, colon);
    const int p = std::stoi(s.substr(colon + 1));
    if (p < 1 || p > 65535) throw ParameterError("port out of range in: " + s);
    port = static_cast<uint16_t>(p);
}

void load_solver_config(const std::string& path, MpcConfig& cfg, RobotParams& params) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("horizon_steps")) cfg.horizon_steps = j["horizon_steps"].get<int>();
    if (j.contains("dt_mpc")) cfg.dt_mpc = j["dt_mpc"].get<double>();
    if (j.contains("torque_limit")) cfg.torque_limit = j["torque_limit"].get<double>();
    if (j.contains("r")) cfg.R = j["r"].get<double>();
    if (j.contains("max_iterations")) cfg.max_iterations = j["max_iterations"].get<int>();
    if (j.contains("kkt_tolerance")) cfg.kkt_tolerance = j["kkt_tolerance"].get<double>();
    if (j.contains("q")) {
        const auto q = j["q"].get<std::vector<double>>();
        if (q.size() != 2) throw ParameterError("config q must have 2 diagonal entries");
        cfg.Q = Eigen::Vector2d(q[0], q[1]).asDiagonal();
    }
    if (j.contains("qf")) {
        const auto qf = j["qf"].get<std::vector<double>>();
        if (qf.size() != 2) throw ParameterError("config qf must have 2 diagonal entries");
        cfg.Qf = Eigen::Vector2d(qf[0], qf[1]).asDiagonal();
    }
    if (j.contains("mass")) params.m = j["mass"].get<double>();
    if (j.contains("gravity")) params.g = j["gravity"].get<double>();
}

int cmd_trajgen(const std::string& out, double speed, std::vector<double> inclines,
                double T, double step_width, const std::vector<double>& rc, bool sens,
                double band_last) {
    RobotParams params;
    params.m = 32.0;
    SynthesisOptions sopts;
    sopts.step_width = step_width;
    const BezierCurve rc_curve(rc);

    TrajectoryLibrary lib;
    for (const double inc : inclines)
        lib.trajectories.push_back(synthesize_nominal(inc, speed, T, params, rc_curve, sopts));
    for (size_t i = 1; i < inclines.size(); ++i) lib.breakpoints.push_back(inclines[i]);

    if (sens && speed != 0.0) {
        for (size_t i = 0; i < lib.trajectories.size(); ++i) {
            if (i + 1 < lib.trajectories.size()) {
                attach_incline_sensitivity(lib.trajectories[i], lib.trajectories[i + 1],
                                           params);
            } else {
                const NominalTrajectory edge = synthesize_nominal(
                    inclines[i] + band_last, speed, T, params, rc_curve, sopts);
                attach_incline_sensitivity(lib.trajectories[i], edge, params);
            }
        }
    }

    save_library(lib, out);
    for (const NominalTrajectory& traj : lib.trajectories) {
        const PeriodicityReport rep = check_periodicity(traj, params, sopts.periodic_tol);
        std::printf("%-12s incline=%5.1f deg  speed=%.2f m/s  periodicity=%.3e %s\n",
                    traj.name.c_str(), traj.incline_deg, traj.nominal_speed, rep.residual,
                    rep.pass ? "ok" : "FAIL");
    }
    std::printf("wrote %zu trajectories to %s\n", lib.trajectories.size(), out.c_str());
    return 0;
}

int cmd_lut(const std::string& traj_path, const std::string& out, int index, double dt,
            bool wide) {
    const TrajectoryLibrary lib = load_library(traj_path);
    if (index < 0 || static_cast<size_t>(index) >= lib.trajectories.size())
        throw ParameterError("trajectory index out of range");
    const NominalTrajectory& traj = lib.trajectories[static_cast<size_t>(index)];
    RobotParams params;
    params.m = traj.mass;

    const LutAxesSpec axes =
        wide ? LutAxesSpec::defaults_for(traj) : LutAxesSpec::envelope_for(traj);
    LutBuildReport report;
    const LookupTable lut =
        build_lookup_table(traj, params, axes, nullptr, dt, &report);
    lut.save(out);
    std::printf("grid %u x %u x %u, %zu nodes (%zu filled from neighbors)\n",
                axes.theta.count, axes.L.count, axes.phase.count, report.total_nodes,
                report.infeasible_nodes);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_run(const std::string& scenario_path, const std::string& traj_path,
            const std::string& lut_path, const std::string& csv_path,
            const std::string& plot_path, const std::string& config_path,
            const std::string& udp_target) {
    const Scenario scenario = load_scenario(scenario_path);
    const TrajectoryLibrary lib = load_library(traj_path);
    LookupTable lut;
    const bool have_lut = !lut_path.empty();
    if (have_lut) lut = LookupTable::load(lut_path);

    HarnessOptions opts;
    if (!config_path.empty()) load_solver_config(config_path, opts.mpc, opts.params);
    if (!udp_target.empty()) {
        uint16_t port = static_cast<uint16_t>(opts.udp_port);
        split_host_port(udp_target, opts.udp_host, port);
        opts.udp_port = port;
    }

    const RunResult result =
        run_closed_loop(scenario, lib, have_lut ? &lut : nullptr, opts);

    double u_max = 0.0;
    for (const LogRow& row : result.rows) u_max = std::max(u_max, std::fabs(row.torque));
    std::printf("scenario %-18s steps=%zu  max|u|=%.3f  mean solve=%.1f us  %s\n",
                scenario.name.c_str(), result.steps.size(), u_max, result.mean_solve_us,
                result.fell ? "FELL" : "completed");
    if (result.fell) std::printf("fall at t=%.4f s\n", result.fall_time);

    if (!csv_path.empty()) {
        export_csv(result, lib, csv_path);
        std::printf("wrote %s\n", csv_path.c_str());
    }
    if (!plot_path.empty()) {
        emit_plot(result, plot_path, opts.mpc.torque_limit);
        std::printf("wrote %s\n", plot_path.c_str());
    }
    return result.fell ? 1 : 0;
}

int cmd_serve(const std::string& bind, const std::string& traj_path,
              const std::string& config_path) {
    const TrajectoryLibrary lib = load_library(traj_path);
    MpcConfig cfg;
    RobotParams params;
    params.m = lib.trajectories.front().mass;
    if (!config_path.empty()) load_solver_config(config_path, cfg, params);

    ServerOptions sopts;
    split_host_port(bind, sopts.bind_address, sopts.port);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("serving %zu trajectories on %s:%u (ctrl-c to stop)\n",
                lib.trajectories.size(), sopts.bind_address.c_str(), sopts.port);
    std::fflush(stdout);
    serve(lib, cfg, params, sopts, &g_stop);
    return 0;
}

int cmd_probe(const std::string& target, double rate, double duration,
              const std::string& traj_path, int traj_id, int timeout_us) {
    const TrajectoryLibrary lib = load_library(traj_path);
    std::string host = "127.0.0.1";
    uint16_t port = 47801;
    split_host_port(target, host, port);

    ProbeOptions popts;
    popts.rate_hz = rate;
    popts.duration_s = duration;
    popts.timeout_us = timeout_us;
    const ProbeReport report =
        latency_probe(host, port, lib, static_cast<uint16_t>(traj_id), popts);
    std::fputs(format_probe_report(report).c_str(), stdout);
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"reduced-order gait planning and ankle-torque control toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    auto* trajgen = app.add_subcommand("trajgen", "synthesize a periodic trajectory library");
    std::string tg_out;
    double tg_speed = 0.5, tg_T = 0.4, tg_width = 0.25, tg_band_last = 5.0;
    std::vector<double> tg_inclines = {0.0, 8.0, 15.0};
    std::vector<double> tg_rc = kDefaultRc;
    bool tg_no_sens = false;
    trajgen->add_option("--out", tg_out, "output library file")->required();
    trajgen->add_option("--speed", tg_speed, "design walking speed (m/s)");
    trajgen->add_option("--inclines", tg_inclines, "design inclines (deg, increasing)");
    trajgen->add_option("--step-duration", tg_T, "step duration (s)");
    trajgen->add_option("--step-width", tg_width, "lateral step width (m)");
    trajgen->add_option("--rc", tg_rc, "pendulum length Bezier control points");
    trajgen->add_flag("--no-sens", tg_no_sens, "skip incline-sensitivity curves");
    trajgen->add_option("--band-last", tg_band_last,
                        "sensitivity band past the last incline (deg)");
    trajgen->callback([&] {
        rc = cmd_trajgen(tg_out, tg_speed, tg_inclines, tg_T, tg_width, tg_rc, !tg_no_sens,
                         tg_band_last);
    });

    auto* lut = app.add_subcommand("lut", "precompute the lateral-placement lookup table");
    std::string lut_traj, lut_out;
    int lut_index = 0;
    double lut_dt = 1e-3;
    bool lut_wide = false;
    lut->add_option("--traj", lut_traj, "trajectory library file")->required();
    lut->add_option("--out", lut_out, "output table file")->required();
    lut->add_option("--index", lut_index, "trajectory index for the frontal nominal");
    lut->add_option("--dt", lut_dt, "prediction integration step (s)");
    lut->add_flag("--wide", lut_wide,
                  "wide-coverage axis box instead of the operating-envelope default");
    lut->callback([&] { rc = cmd_lut(lut_traj, lut_out, lut_index, lut_dt, lut_wide); });

    auto* run = app.add_subcommand("run", "run a closed-loop scenario");
    std::string run_scenario, run_traj, run_lut, run_csv, run_plot, run_config, run_udp;
    run->add_option("--scenario", run_scenario, "scenario file")->required();
    run->add_option("--traj", run_traj, "trajectory library file")->required();
    run->add_option("--lut", run_lut, "placement lookup table file");
    run->add_option("--csv", run_csv, "write the tick log to this CSV file");
    run->add_option("--plot", run_plot, "write an SVG summary plot");
    run->add_option("--config", run_config, "solver config JSON");
    run->add_option("--udp", run_udp, "solver endpoint host:port for udp scenarios");
    run->callback([&] {
        rc = cmd_run(run_scenario, run_traj, run_lut, run_csv, run_plot, run_config, run_udp);
    });

    auto* srv = app.add_subcommand("serve", "run the UDP solver endpoint");
    std::string srv_bind = "127.0.0.1:47801", srv_traj, srv_config;
    srv->add_option("--bind", srv_bind, "bind address host[:port]");
    srv->add_option("--traj", srv_traj, "trajectory library file")->required();
    srv->add_option("--config", srv_config, "solver config JSON");
    srv->callback([&] { rc = cmd_serve(srv_bind, srv_traj, srv_config); });

    auto* probe = app.add_subcommand("probe", "measure round-trip latency of an endpoint");
    std::string pr_target, pr_traj;
    double pr_rate = 100.0, pr_duration = 10.0;
    int pr_id = 0, pr_timeout = 50000;
    probe->add_option("--target", pr_target, "endpoint host:port")->required();
    probe->add_option("--rate", pr_rate, "queries per second");
    probe->add_option("--duration", pr_duration, "probe length (s)");
    probe->add_option("--traj", pr_traj, "trajectory library file")->required();
    probe->add_option("--id", pr_id, "trajectory index for the query payload");
    probe->add_option("--timeout-us", pr_timeout, "per-query wait (us)");
    probe->callback([&] {
        rc = cmd_probe(pr_target, pr_rate, pr_duration, pr_traj, pr_id, pr_timeout);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return rc;
}

}  // namespace alip
