#include "alip/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "alip/errors.hpp"
#include "alip/impact_map.hpp"
#include "alip/mpc_service.hpp"

namespace alip {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

double eval_profile(const std::vector<ProfilePoint>& profile, double t, double fallback) {
    if (profile.empty()) return fallback;
    if (t <= profile.front().t) return profile.front().value;
    if (t >= profile.back().t) return profile.back().value;
    for (size_t i = 1; i < profile.size(); ++i) {
        if (t <= profile[i].t) {
            const double t0 = profile[i - 1].t, t1 = profile[i].t;
            const double v0 = profile[i - 1].value, v1 = profile[i].value;
            if (t1 - t0 <= 0.0) return v1;
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        }
    }
    return profile.back().value;
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
    Scenario sc;
    sc.name = name;
    bool have_duration = false;
    bool have_header = false;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok) || tok[0] == '#') continue;

        if (!have_header) {
            int version = 0;
            if (tok != "ALIPSCEN" || !(ls >> version) || version != 1)
                throw ParseError("expected scenario header 'ALIPSCEN 1'", lineno);
            have_header = true;
            continue;
        }

        if (tok == "param") {
            std::string key;
            double value = 0.0;
            if (!(ls >> key >> value) || !std::isfinite(value))
                throw ParseError("malformed param directive", lineno);
            if (key == "duration") {
                sc.duration = value;
                have_duration = true;
            } else if (key == "seed") {
                sc.seed = static_cast<unsigned>(value);
            } else if (key == "placement_window") {
                sc.placement_window = value;
            } else if (key == "lean_cap") {
                sc.lean_cap = value;
            } else if (key == "lean_slew") {
                sc.lean_slew = value;
            } else if (key == "dt") {
                sc.dt = value;
            } else if (key == "mpc_every_ticks") {
                sc.mpc_every_ticks = static_cast<int>(value);
            } else {
                throw ParseError("unknown scenario param: " + key, lineno);
            }
        } else if (tok == "control") {
            std::string mode;
            if (!(ls >> mode) || (mode != "in_process" && mode != "udp"))
                throw ParseError("control mode must be in_process or udp", lineno);
            sc.control = mode;
        } else if (tok == "profile") {
            std::string which;
            double t = 0.0, value = 0.0;
            if (!(ls >> which >> t >> value) || !std::isfinite(t) || !std::isfinite(value))
                throw ParseError("malformed profile directive", lineno);
            std::vector<ProfilePoint>* target = nullptr;
            if (which == "incline")
                target = &sc.incline;
            else if (which == "belt")
                target = &sc.belt;
            else if (which == "command")
                target = &sc.command;
            else
                throw ParseError("unknown profile channel: " + which, lineno);
            if (!target->empty() && t < target->back().t)
                throw ParseError("profile times must be nondecreasing", lineno);
            target->push_back({t, value});
        } else if (tok == "disturb") {
            double t = 0.0, dL = 0.0;
            std::string plane;
            if (!(ls >> t >> plane >> dL) || !std::isfinite(t) || !std::isfinite(dL))
                throw ParseError("malformed disturb directive", lineno);
            if (plane != "sagittal" && plane != "frontal")
                throw ParseError("disturb plane must be sagittal or frontal", lineno);
            sc.disturbances.push_back({t, plane == "frontal", dL});
        } else {
            throw ParseError("unknown scenario directive: " + tok, lineno);
        }
    }
    if (!have_header) throw ParseError("expected scenario header 'ALIPSCEN 1'", 1);
    if (!have_duration || !(sc.duration > 0.0))
        throw ParseError("scenario requires a positive duration param", lineno);
    if (!(sc.dt > 0.0)) throw ParseError("scenario dt must be positive", lineno);
    if (sc.mpc_every_ticks < 1) throw ParseError("mpc_every_ticks must be >= 1", lineno);
    if (sc.placement_window < 0.0) throw ParseError("placement_window must be >= 0", lineno);
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), std::filesystem::path(path).stem().string());
}

RunResult run_closed_loop(const Scenario& scenario, const TrajectoryLibrary& library,
                          const LookupTable* lut, const HarnessOptions& opts_in) {
    if (library.trajectories.empty()) throw ParameterError("empty trajectory library");
    if (!(scenario.duration > 0.0) || !(scenario.dt > 0.0) || scenario.mpc_every_ticks < 1)
        throw ParameterError("invalid scenario timing");
    const bool use_udp = scenario.control == "udp";
    if (!use_udp && scenario.control != "in_process")
        throw ParameterError("unknown control mode: " + scenario.control);

    HarnessOptions opts = opts_in;
    if (opts.params.m <= 0.0) opts.params.m = library.trajectories.front().mass;

    const double dt = scenario.dt;
    const auto n_ticks = static_cast<long>(std::llround(scenario.duration / dt));
    const double fall_angle = std::numbers::pi / 3.0;

    int traj_idx = library.index_by_incline(eval_profile(scenario.incline, 0.0));
    const NominalTrajectory* traj = &library.trajectories[static_cast<size_t>(traj_idx)];
    AlipState sag = traj->nominal_state(0.0);
    AlipState fro = traj->frontal_nominal_state(0.0);
    double phase = 0.0;
    double u = 0.0;
    double lean = 0.0;
    double y_des = traj->param("step_dy");
    double latency = 0.0;
    int leg = 0;

    AnkleMpc mpc(opts.mpc, opts.params);
    std::unique_ptr<MpcClient> client;
    if (use_udp) {
        ClientOptions copts;
        copts.host = opts.udp_host;
        copts.port = static_cast<uint16_t>(opts.udp_port);
        copts.timeout_us = opts.udp_timeout_us;
        client = std::make_unique<MpcClient>(copts);
    }
    PlacementConfig pcfg;

    std::vector<char> applied(scenario.disturbances.size(), 0);
    RunResult result;
    result.rows.reserve(static_cast<size_t>(n_ticks));
    double solve_us_total = 0.0;
    double step_u_max = 0.0;
    int step_index = 0;

    for (long i = 0; i < n_ticks; ++i) {
        const double t = static_cast<double>(i) * dt;
        unsigned events = 0;

        if (i % scenario.mpc_every_ticks == 0) {
            // Lateral placement target for the upcoming swap.
            double y_raw;
            if (lut != nullptr) {
                y_raw = lut->query(fro, phase);
            } else {
                const PlacementQuery q{fro, phase, traj->l_des_frontal()};
                PlacementDiagnostics diag;
                y_raw = plan_placement(q, *traj, opts.params, pcfg.dt, pcfg, &diag);
                if (diag.fallback) events |= kEventFallback;
            }
            const double y0 = traj->param("step_dy");
            y_des = clamp(y_raw, y0 - scenario.placement_window, y0 + scenario.placement_window);

            // Speed tracking enters as a bounded, slew-limited momentum offset
            // on the state handed to the solver.
            const double v_cmd =
                eval_profile(scenario.belt, t) + eval_profile(scenario.command, t);
            const double height = traj->param("com_height");
            const double lean_target = clamp(
                -opts.params.m * height * (v_cmd - traj->nominal_speed), -scenario.lean_cap,
                scenario.lean_cap);
            lean += clamp(lean_target - lean, -scenario.lean_slew, scenario.lean_slew);

            const double winc = eval_profile(scenario.incline, t);
            const AlipState x_solver{sag.theta_c, sag.L - lean};
            if (use_udp) {
                const ClientQueryResult r = client->client_query(
                    x_solver, phase, static_cast<uint16_t>(static_cast<unsigned>(traj_idx)),
                    winc);
                u = r.torque;
                latency = r.rtt_us;
                solve_us_total += static_cast<double>(r.compute_time_us);
            } else {
                const MpcResult r = mpc.solve(x_solver, phase, *traj, winc);
                u = r.u0;
                latency = 0.0;
                solve_us_total += r.solve_time_us;
            }
            ++result.mpc_solves;
        }

        for (size_t d = 0; d < scenario.disturbances.size(); ++d) {
            if (!applied[d] && t >= scenario.disturbances[d].t) {
                applied[d] = 1;
                (scenario.disturbances[d].frontal ? fro.L : sag.L) +=
                    scenario.disturbances[d].delta_L;
            }
        }

        result.rows.push_back({t, sag, fro, u, y_des, traj_idx, leg, latency, events});
        step_u_max = std::max(step_u_max, std::fabs(u));

        const PendulumProfile& prof = traj->profile();
        const AlipState dsag = dynamics(phase, sag, opts.params, prof, traj->T, u);
        const AlipState dfro = dynamics(phase, fro, opts.params, prof, traj->T, 0.0);
        sag.theta_c += dt * dsag.theta_c;
        sag.L += dt * dsag.L;
        fro.theta_c += dt * dfro.theta_c;
        fro.L += dt * dfro.L;
        phase += dt;

        if (phase >= traj->T - 1e-12) {
            const double t_next = static_cast<double>(i + 1) * dt;
            const double winc_now = eval_profile(scenario.incline, t_next);
            const double r1 = prof.r(1.0);
            const double rd1 = prof.r_dot(1.0, traj->T);
            const double r0 = prof.r(0.0);

            const AlipState sag_end = sag;
            const AlipState fro_end = fro;

            // The plant's actual foothold height follows the world incline;
            // the planner's stored rise is whatever the trajectory assumed.
            const double step_dx = traj->param("step_dx");
            const double world_pz =
                std::fabs(step_dx) * std::tan(winc_now * std::numbers::pi / 180.0);
            sag = post_impact_state(PreImpactState::from_state(sag, r1, rd1, opts.params),
                                    {step_dx, world_pz}, r0, opts.params);
            fro = post_impact_state(PreImpactState::from_state(fro, r1, rd1, opts.params),
                                    traj->frontal_step(y_des), r0, opts.params);

            result.rows.back().events |= kEventImpact;
            result.steps.push_back(
                {step_index, t_next, step_u_max, sag_end, fro_end, y_des, traj_idx});
            ++step_index;
            step_u_max = 0.0;
            leg ^= 1;
            phase = 0.0;

            const int new_idx = library.index_by_incline(winc_now);
            if (new_idx != traj_idx) {
                traj_idx = new_idx;
                traj = &library.trajectories[static_cast<size_t>(traj_idx)];
                result.rows.back().events |= kEventSwitch;
            }
        }

        if (std::fabs(sag.theta_c) >= fall_angle || std::fabs(fro.theta_c) >= fall_angle) {
            result.fell = true;
            result.fall_time = static_cast<double>(i + 1) * dt;
            break;
        }
    }

    result.mean_solve_us =
        result.mpc_solves == 0 ? 0.0 : solve_us_total / static_cast<double>(result.mpc_solves);
    return result;
}

void export_csv(const RunResult& result, const TrajectoryLibrary& library,
                const std::string& path) {
    if (result.rows.empty()) throw InvalidStateError("nothing to export: run log is empty");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file: " + path);
    out << "time,theta_sag,L_sag,theta_fro,L_fro,torque,y_des,traj,leg,latency_us,events\n";
    for (const LogRow& row : result.rows) {
        const auto idx = static_cast<size_t>(row.traj_index);
        const std::string& traj_name =
            idx < library.trajectories.size() ? library.trajectories[idx].name : "?";
        out << g17(row.t) << ',' << g17(row.sagittal.theta_c) << ',' << g17(row.sagittal.L)
            << ',' << g17(row.frontal.theta_c) << ',' << g17(row.frontal.L) << ','
            << g17(row.torque) << ',' << g17(row.y_des) << ',' << traj_name << ','
            << (row.leg == 0 ? 'L' : 'R') << ',' << g17(row.latency_us) << ',' << row.events
            << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

struct Pane {
    double x0, y0, w, h;       // pixel rect
    double tmin, tmax;         // data ranges
    double vmin, vmax;

    double px(double t) const { return x0 + (t - tmin) / (tmax - tmin) * w; }
    double py(double v) const { return y0 + h - (v - vmin) / (vmax - vmin) * h; }
};

void polyline(std::ostream& os, const Pane& p, const std::vector<LogRow>& rows, size_t stride,
              double (*pick)(const LogRow&), const char* color) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
    for (size_t i = 0; i < rows.size(); i += stride) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", p.px(rows[i].t), p.py(pick(rows[i])));
        os << buf;
    }
    os << "\"/>\n";
}

}  // namespace

void emit_plot(const RunResult& result, const std::string& path, double torque_limit) {
    if (result.rows.empty()) throw InvalidStateError("nothing to plot: run log is empty");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file: " + path);

    const auto& rows = result.rows;
    const size_t stride = std::max<size_t>(1, rows.size() / 4000);
    const double tmin = rows.front().t, tmax = std::max(rows.back().t, tmin + 1e-9);

    double umin = -torque_limit * 1.15, umax = torque_limit * 1.15;
    for (const auto& r : rows) {
        umin = std::min(umin, r.torque);
        umax = std::max(umax, r.torque);
    }
    double lmin = 0.0, lmax = 0.0;
    for (const auto& r : rows) {
        lmin = std::min({lmin, r.sagittal.L, r.frontal.L});
        lmax = std::max({lmax, r.sagittal.L, r.frontal.L});
    }
    const double lpad = 0.05 * std::max(lmax - lmin, 1e-6);
    lmin -= lpad;
    lmax += lpad;

    const Pane torque_pane{60, 30, 800, 220, tmin, tmax, umin, umax};
    const Pane mom_pane{60, 310, 800, 220, tmin, tmax, lmin, lmax};

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"570\" "
           "font-family=\"monospace\" font-size=\"11\">\n";
    out << "<rect width=\"900\" height=\"570\" fill=\"white\"/>\n";

    for (const Pane& p : {torque_pane, mom_pane})
        out << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\"" << p.w
            << "\" height=\"" << p.h << "\" fill=\"none\" stroke=\"#999\"/>\n";

    // Saturation band on the torque pane.
    const double band_top = torque_pane.py(torque_limit);
    const double band_bot = torque_pane.py(-torque_limit);
    out << "<rect x=\"" << torque_pane.x0 << "\" y=\"" << band_top << "\" width=\""
        << torque_pane.w << "\" height=\"" << band_bot - band_top
        << "\" fill=\"#eef5ee\" stroke=\"#9c9\" stroke-dasharray=\"4 3\"/>\n";

    polyline(out, torque_pane, rows, stride, [](const LogRow& r) { return r.torque; }, "#c0392b");
    polyline(out, mom_pane, rows, stride, [](const LogRow& r) { return r.sagittal.L; },
             "#2e6bc0");
    polyline(out, mom_pane, rows, stride, [](const LogRow& r) { return r.frontal.L; },
             "#2c8a4b");

    char label[160];
    std::snprintf(label, sizeof(label),
                  "<text x=\"60\" y=\"20\">ankle torque [N m]  (band = +/-%.1f)</text>\n",
                  torque_limit);
    out << label;
    out << "<text x=\"60\" y=\"300\">angular momentum [N m s]  "
           "<tspan fill=\"#2e6bc0\">sagittal</tspan>  <tspan fill=\"#2c8a4b\">frontal</tspan>"
           "</text>\n";
    std::snprintf(label, sizeof(label),
                  "<text x=\"60\" y=\"556\">time [s]: %.2f .. %.2f%s</text>\n", tmin, tmax,
                  result.fell ? "  (FELL)" : "");
    out << label;
    out << "</svg>\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace alip
