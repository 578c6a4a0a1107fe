#include "alip/traj_store.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "alip/errors.hpp"

namespace alip {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double deg2rad(double d) { return d * M_PI / 180.0; }

}  // namespace

const BezierCurve& NominalTrajectory::curve(const std::string& key) const {
    auto it = curves.find(key);
    if (it == curves.end())
        throw ParameterError("trajectory '" + name + "' has no curve '" + key + "'");
    return it->second;
}

double NominalTrajectory::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
        throw ParameterError("trajectory '" + name + "' has no param '" + key + "'");
    return it->second;
}

double NominalTrajectory::param_or(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

const PendulumProfile& NominalTrajectory::profile() const {
    if (!profile_cache_) profile_cache_.emplace(curve("r_c"));
    return *profile_cache_;
}

AlipState NominalTrajectory::nominal_state(double phase_time) const {
    const double s = clamp(phase_time / T, 0.0, 1.0);
    return {curve("theta_c_nom").evaluate(s), curve("L_nom").evaluate(s)};
}

AlipState NominalTrajectory::frontal_nominal_state(double phase_time) const {
    const double s = clamp(phase_time / T, 0.0, 1.0);
    return {curve("theta_c_nom_frontal").evaluate(s), curve("L_nom_frontal").evaluate(s)};
}

AlipState NominalTrajectory::reference_state(double phase_time, double world_incline_deg) const {
    AlipState x = nominal_state(phase_time);
    const double band = param_or("band_span_deg", 0.0);
    if (band > 0.0 && has_curve("theta_inc_sens") && has_curve("L_inc_sens")) {
        const double di = clamp(world_incline_deg - incline_deg, -band, band);
        const double s = clamp(phase_time / T, 0.0, 1.0);
        x.theta_c += di * curve("theta_inc_sens").evaluate(s);
        x.L += di * curve("L_inc_sens").evaluate(s);
    }
    return x;
}

double NominalTrajectory::l_des_frontal() const { return curve("L_nom_frontal").evaluate(1.0); }

FootDisplacement NominalTrajectory::sagittal_step() const {
    return {param("step_dx"), param("step_dz")};
}

FootDisplacement NominalTrajectory::frontal_step(double y) const {
    return {y, param_or("step_dz_frontal", 0.0)};
}

int TrajectoryLibrary::index_by_incline(double incline_deg) const {
    if (trajectories.empty()) throw ParameterError("empty trajectory library");
    int idx = 0;
    for (double b : breakpoints)
        if (incline_deg >= b) ++idx;
    return std::min(idx, static_cast<int>(trajectories.size()) - 1);
}

const NominalTrajectory& TrajectoryLibrary::select_by_incline(double incline_deg) const {
    return trajectories[static_cast<size_t>(index_by_incline(incline_deg))];
}

// ---------------------------------------------------------------------------
// File format

namespace {

void validate_library(TrajectoryLibrary& lib) {
    if (lib.trajectories.empty()) throw ParameterError("library has no trajectories");
    if (lib.breakpoints.size() + 1 != lib.trajectories.size())
        throw ParameterError("library needs exactly one breakpoint between adjacent trajectories");
    for (size_t i = 1; i < lib.breakpoints.size(); ++i)
        if (!(lib.breakpoints[i] > lib.breakpoints[i - 1]))
            throw ParameterError("library breakpoints must be strictly increasing");
    double last_inc = -1e300;
    for (auto& traj : lib.trajectories) {
        if (!(traj.T > 0.0)) throw ParameterError("trajectory '" + traj.name + "' has T <= 0");
        for (const char* key : {"L_nom", "theta_c_nom", "r_c"})
            if (!traj.has_curve(key))
                throw ParameterError("trajectory '" + traj.name + "' missing required curve '" +
                                     std::string(key) + "'");
        traj.profile();  // throws GeometryError on bad r_c; also pre-warms the cache
        if (lib.trajectories.size() > 1) {
            if (!(traj.incline_deg > last_inc))
                throw ParameterError("trajectory design inclines must be strictly increasing");
            last_inc = traj.incline_deg;
        }
    }
}

}  // namespace

TrajectoryLibrary load_library(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory file: " + path);

    TrajectoryLibrary lib;
    std::map<std::string, double>* cur_params = nullptr;
    NominalTrajectory* cur = nullptr;
    bool header_seen = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string tok;
        if (!(ss >> tok)) continue;  // blank line

        if (!header_seen) {
            std::string version;
            if (tok != "ALIPTRAJ" || !(ss >> version) || version != "1")
                throw ParseError("expected header 'ALIPTRAJ 1'", line_no);
            header_seen = true;
            continue;
        }
        if (tok == "breakpoint") {
            if (cur) throw ParseError("breakpoints must precede trajectories", line_no);
            double v;
            if (!(ss >> v)) throw ParseError("breakpoint needs a numeric value", line_no);
            lib.breakpoints.push_back(v);
        } else if (tok == "trajectory") {
            std::string name;
            if (!(ss >> name)) throw ParseError("trajectory needs a name", line_no);
            lib.trajectories.push_back({});
            cur = &lib.trajectories.back();
            cur->name = name;
            cur_params = &cur->params;
        } else if (tok == "param") {
            if (!cur) throw ParseError("param before any trajectory", line_no);
            std::string key;
            double v;
            if (!(ss >> key >> v)) throw ParseError("param needs a name and a value", line_no);
            if (key == "T")
                cur->T = v;
            else if (key == "incline_deg")
                cur->incline_deg = v;
            else if (key == "mass")
                cur->mass = v;
            else if (key == "nominal_speed")
                cur->nominal_speed = v;
            else
                (*cur_params)[key] = v;
        } else if (tok == "curve") {
            if (!cur) throw ParseError("curve before any trajectory", line_no);
            std::string key;
            int order;
            if (!(ss >> key >> order)) throw ParseError("curve needs a name and an order", line_no);
            if (order < 1)
                throw ParseError("stored curves need at least 2 coefficients", line_no);
            std::vector<double> coeffs(static_cast<size_t>(order) + 1);
            for (auto& c : coeffs)
                if (!(ss >> c))
                    throw ParseError("curve '" + key + "' expects " + std::to_string(order + 1) +
                                         " coefficients",
                                     line_no);
            double extra;
            if (ss >> extra) throw ParseError("curve '" + key + "' has trailing values", line_no);
            cur->curves.emplace(key, BezierCurve(std::move(coeffs)));
        } else {
            throw ParseError("unknown directive '" + tok + "'", line_no);
        }
    }
    if (!header_seen) throw ParseError("empty trajectory file", 1);
    try {
        validate_library(lib);
    } catch (const AlipError& e) {
        throw ParseError(std::string(e.what()) + " in " + path, line_no);
    }
    return lib;
}

void save_library(const TrajectoryLibrary& lib, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trajectory file: " + path);
    out << "ALIPTRAJ 1\n";
    for (double b : lib.breakpoints) out << "breakpoint " << g17(b) << "\n";
    for (const auto& traj : lib.trajectories) {
        out << "trajectory " << traj.name << "\n";
        std::vector<std::pair<std::string, double>> ps{{"T", traj.T},
                                                       {"incline_deg", traj.incline_deg},
                                                       {"mass", traj.mass},
                                                       {"nominal_speed", traj.nominal_speed}};
        for (const auto& kv : traj.params) ps.push_back(kv);
        std::sort(ps.begin(), ps.end());
        for (const auto& [k, v] : ps) out << "param " << k << " " << g17(v) << "\n";
        for (const auto& [k, c] : traj.curves) {
            out << "curve " << k << " " << c.order();
            for (double v : c.coefficients()) out << " " << g17(v);
            out << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Periodicity and synthesis

namespace {

AlipState apply_step_map(const AlipState& x0, double T, double dt, const RobotParams& params,
                         const PendulumProfile& prof, const FootDisplacement& P) {
    const AlipState xm = integrate_final(x0, 0.0, T, dt, params, prof, T, 0.0);
    const auto pre = PreImpactState::from_state(xm, prof.r(1.0), prof.r_dot(1.0, T), params);
    return post_impact_state(pre, P, prof.r(0.0), params);
}

struct ShootOutcome {
    AlipState x;
    double residual;
    int iterations;
};

// Damped-Newton single shooting on F(x) = step_map(x) - x with central
// finite-difference Jacobian.
ShootOutcome shoot_orbit(AlipState x, double T, double dt, const RobotParams& params,
                         const PendulumProfile& prof, const FootDisplacement& P, double tol,
                         int max_iters) {
    auto defect = [&](const AlipState& s) {
        const AlipState n = apply_step_map(s, T, dt, params, prof, P);
        return Eigen::Vector2d(n.theta_c - s.theta_c, n.L - s.L);
    };
    Eigen::Vector2d F = defect(x);
    double res = F.cwiseAbs().maxCoeff();
    for (int it = 0; it < max_iters; ++it) {
        if (res < tol) return {x, res, it};
        const double h = 1e-7;
        Eigen::Matrix2d J;
        for (int j = 0; j < 2; ++j) {
            AlipState xp = x, xm = x;
            (j == 0 ? xp.theta_c : xp.L) += h;
            (j == 0 ? xm.theta_c : xm.L) -= h;
            J.col(j) = (defect(xp) - defect(xm)) / (2.0 * h);
        }
        if (std::fabs(J.determinant()) < 1e-14) return {x, res, it};
        const Eigen::Vector2d d = J.partialPivLu().solve(-F);
        double lam = 1.0;
        AlipState best = x;
        Eigen::Vector2d bestF = F;
        for (int k = 0; k < 30; ++k) {
            AlipState xn{x.theta_c + lam * d(0), x.L + lam * d(1)};
            try {
                const Eigen::Vector2d Fn = defect(xn);
                best = xn;
                bestF = Fn;
                if (Fn.cwiseAbs().maxCoeff() < res) break;
            } catch (const GeometryError&) {
                // candidate stepped outside the feasible cone; shrink
            }
            lam *= 0.5;
        }
        x = best;
        F = bestF;
        res = F.cwiseAbs().maxCoeff();
    }
    return {x, res, max_iters};
}

double binomial(int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return v;
}

// Least-squares Bezier fit with both endpoints pinned to the sample endpoints.
BezierCurve fit_pinned(const std::vector<TimedState>& samples, bool use_L, int order,
                       double fit_tol) {
    const int n = static_cast<int>(samples.size());
    const double t_end = samples.back().t;
    Eigen::MatrixXd basis(n, order + 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double s = samples[static_cast<size_t>(i)].t / t_end;
        for (int k = 0; k <= order; ++k)
            basis(i, k) = binomial(order, k) * std::pow(s, k) * std::pow(1.0 - s, order - k);
        const AlipState& xs = samples[static_cast<size_t>(i)].x;
        y(i) = use_L ? xs.L : xs.theta_c;
    }
    const double y0 = y(0), yM = y(n - 1);
    const Eigen::VectorXd rhs = y - basis.col(0) * y0 - basis.col(order) * yM;
    const Eigen::MatrixXd A = basis.middleCols(1, order - 1);
    const Eigen::VectorXd interior = A.colPivHouseholderQr().solve(rhs);

    std::vector<double> coeffs(static_cast<size_t>(order) + 1);
    coeffs.front() = y0;
    coeffs.back() = yM;
    for (int k = 0; k < order - 1; ++k) coeffs[static_cast<size_t>(k + 1)] = interior(k);
    BezierCurve curve(std::move(coeffs));

    double max_err = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s = samples[static_cast<size_t>(i)].t / t_end;
        max_err = std::max(max_err, std::fabs(curve.evaluate(s) - y(i)));
    }
    if (max_err > fit_tol)
        throw NoOrbitError("Bezier fit error " + g17(max_err) + " above tolerance", max_err);
    return curve;
}

std::vector<TimedState> orbit_samples(const AlipState& x0, double T, double dt,
                                      const RobotParams& params, const PendulumProfile& prof) {
    return integrate_phase(x0, 0.0, T, dt, params, prof, T, {});
}

}  // namespace

PeriodicityReport check_periodicity(const NominalTrajectory& traj, const RobotParams& params,
                                    double tol) {
    const double dt = traj.param_or("synth_dt", 1e-3);
    const FootDisplacement P = traj.sagittal_step();
    const AlipState x0 = traj.nominal_state(0.0);
    AlipState x = x0;
    for (int i = 0; i < 2; ++i) x = apply_step_map(x, traj.T, dt, params, traj.profile(), P);
    PeriodicityReport rep;
    rep.initial = x0;
    rep.after_pair = x;
    rep.residual = std::max(std::fabs(x.theta_c - x0.theta_c), std::fabs(x.L - x0.L));
    rep.pass = rep.residual <= tol;
    return rep;
}

NominalTrajectory synthesize_nominal(double incline_deg, double speed, double T,
                                     const RobotParams& params, const BezierCurve& r_c_profile,
                                     const SynthesisOptions& opts) {
    if (!(T > 0.0)) throw ParameterError("synthesize_nominal: T must be positive");
    if (speed < 0.0) throw ParameterError("synthesize_nominal: speed must be non-negative");
    const PendulumProfile prof(r_c_profile);

    // Sagittal orbit: walk in -x so positive L corresponds to descending theta.
    const double px = -speed * T;
    const double pz = speed * T * std::tan(deg2rad(incline_deg));
    AlipState x0{0.0, 0.0};
    if (speed > 0.0) {
        const auto s = shoot_orbit({0.05, -2.0}, T, opts.dt, params, prof, {px, pz},
                                   opts.shoot_tol, opts.max_shoot_iterations);
        if (s.residual > 1e-9)
            throw NoOrbitError("sagittal shooting did not converge, residual " + g17(s.residual),
                               s.residual);
        x0 = s.x;
    }
    // For speed = 0 the upright state is an exact fixed point of the step map.

    const auto sag = orbit_samples(x0, T, opts.dt, params, prof);
    NominalTrajectory traj;
    traj.incline_deg = incline_deg;
    traj.nominal_speed = speed;
    traj.T = T;
    traj.mass = params.m;
    if (speed == 0.0)
        traj.name = "march";
    else if (incline_deg == 0.0)
        traj.name = "flat";
    else
        traj.name = "incline" + g17(incline_deg);
    traj.curves.emplace("r_c", r_c_profile);
    traj.curves.emplace("theta_c_nom", fit_pinned(sag, false, opts.fit_order, opts.fit_tol));
    traj.curves.emplace("L_nom", fit_pinned(sag, true, opts.fit_order, opts.fit_tol));

    // Frontal orbit: lateral step of width step_dy with level footholds
    // (laterally separated contacts on a pitched surface share a height).
    if (opts.step_width != 0.0) {
        const double sign = opts.step_width > 0.0 ? 1.0 : -1.0;
        const auto f = shoot_orbit({0.05, -2.0 * sign}, T, opts.dt, params, prof,
                                   {opts.step_width, 0.0}, opts.shoot_tol,
                                   opts.max_shoot_iterations);
        if (f.residual > 1e-9)
            throw NoOrbitError("frontal shooting did not converge, residual " + g17(f.residual),
                               f.residual);
        const auto fro = orbit_samples(f.x, T, opts.dt, params, prof);
        traj.curves.emplace("theta_c_nom_frontal",
                            fit_pinned(fro, false, opts.fit_order, opts.fit_tol));
        traj.curves.emplace("L_nom_frontal", fit_pinned(fro, true, opts.fit_order, opts.fit_tol));
    }

    // Mean CoM height over the step (used for speed-offset lean scaling).
    const BezierCurve& cth = traj.curve("theta_c_nom");
    double H = 0.0;
    for (const auto& smp : sag) {
        const double s = smp.t / T;
        H += prof.r(s) * std::cos(cth.evaluate(s));
    }
    H /= static_cast<double>(sag.size());

    traj.params["step_dx"] = px;
    traj.params["step_dz"] = pz;
    traj.params["step_dy"] = opts.step_width;
    traj.params["step_dz_frontal"] = 0.0;
    traj.params["com_height"] = H;
    traj.params["synth_dt"] = opts.dt;
    traj.params["periodic"] = 1.0;
    traj.params["periodic_tol"] = opts.periodic_tol;

    traj.profile();  // pre-warm
    const auto rep = check_periodicity(traj, params, opts.periodic_tol);
    if (!rep.pass)
        throw NoOrbitError("synthesized trajectory failed periodicity check, residual " +
                               g17(rep.residual),
                           rep.residual);
    return traj;
}

void attach_incline_sensitivity(NominalTrajectory& traj, const NominalTrajectory& band_edge,
                                const RobotParams& params) {
    if (std::fabs(traj.T - band_edge.T) > 1e-12 ||
        std::fabs(traj.nominal_speed - band_edge.nominal_speed) > 1e-12)
        throw ParameterError("sensitivity band edge must share T and nominal speed");
    const double span = band_edge.incline_deg - traj.incline_deg;
    if (!(span > 0.0))
        throw ParameterError("sensitivity band edge must lie above the trajectory incline");
    const double dt = traj.param_or("synth_dt", 1e-3);
    if (std::fabs(dt - band_edge.param_or("synth_dt", 1e-3)) > 0.0)
        throw ParameterError("sensitivity band edge must share synth_dt");

    const auto lo = orbit_samples(traj.nominal_state(0.0), traj.T, dt, params, traj.profile());
    const auto hi = orbit_samples(band_edge.nominal_state(0.0), band_edge.T, dt, params,
                                  band_edge.profile());
    std::vector<TimedState> diff(lo.size());
    for (size_t i = 0; i < lo.size(); ++i)
        diff[i] = {lo[i].t,
                   {(hi[i].x.theta_c - lo[i].x.theta_c) / span, (hi[i].x.L - lo[i].x.L) / span}};
    // Fit tolerance is loose here: the secant difference is smooth but not an
    // orbit, so only its graph matters.
    traj.curves.insert_or_assign("theta_inc_sens", fit_pinned(diff, false, 7, 1e-2));
    traj.curves.insert_or_assign("L_inc_sens", fit_pinned(diff, true, 7, 1.0));
    traj.params["band_span_deg"] = span;
}

}  // namespace alip
