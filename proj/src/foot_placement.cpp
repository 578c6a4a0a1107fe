#include "alip/foot_placement.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "alip/errors.hpp"
#include "alip/impact_map.hpp"

namespace alip {

double predict_next_step_end_L(const AlipState& x0, double t0, double y_candidate,
                               const NominalTrajectory& traj, const RobotParams& params,
                               double dt) {
    if (!(t0 >= 0.0 && t0 <= traj.T))
        throw ParameterError("predict_next_step_end_L: phase time outside [0, T]");
    if (!(dt > 0.0)) throw ParameterError("predict_next_step_end_L: dt must be positive");
    const PendulumProfile& prof = traj.profile();
    const AlipState pre = integrate_final(x0, t0, traj.T, dt, params, prof, traj.T, 0.0);
    AlipState post;
    try {
        const auto pre_state =
            PreImpactState::from_state(pre, prof.r(1.0), prof.r_dot(1.0, traj.T), params);
        post = post_impact_state(pre_state, traj.frontal_step(y_candidate), prof.r(0.0), params);
    } catch (const GeometryError& e) {
        throw InfeasiblePlacementError(
            std::string("placement candidate hits infeasible impact geometry: ") + e.what(),
            y_candidate);
    }
    return integrate_final(post, 0.0, traj.T, dt, params, prof, traj.T, 0.0).L;
}

double interpolate_lateral(double y1, double L1, double y2, double L2, double L_des) {
    if (y1 == y2) throw ParameterError("interpolate_lateral: candidates coincide");
    if (std::fabs(L2 - L1) < 1e-12)
        throw DegenerateSlopeError("interpolate_lateral: flat momentum slope");
    const double slope = (L2 - L1) / (y2 - y1);
    return y1 + (L_des - L1) / slope;
}

double interpolate_lateral_theta(double y1, double theta1, double y2, double theta2,
                                 double theta_des) {
    if (y1 == y2) throw ParameterError("interpolate_lateral_theta: candidates coincide");
    if (std::fabs(theta2 - theta1) < 1e-12)
        throw DegenerateSlopeError("interpolate_lateral_theta: flat angle slope");
    const double slope = (theta2 - theta1) / (y2 - y1);
    return y1 + (theta_des - theta1) / slope;
}

double plan_placement(const PlacementQuery& q, const NominalTrajectory& traj,
                      const RobotParams& params, double dt, const PlacementConfig& cfg,
                      PlacementDiagnostics* diag) {
    const double y1 = traj.param("step_dy");
    const double y2 = y1 + cfg.delta;
    const double y_min = std::isnan(cfg.y_min) ? y1 - 3.0 : cfg.y_min;
    const double y_max = std::isnan(cfg.y_max) ? y1 + 3.0 : cfg.y_max;
    if (diag) *diag = {};

    double y_des;
    try {
        const double L1 = predict_next_step_end_L(q.state, q.phase_time, y1, traj, params, dt);
        const double L2 = predict_next_step_end_L(q.state, q.phase_time, y2, traj, params, dt);
        y_des = interpolate_lateral(y1, L1, y2, L2, q.L_des);
    } catch (const InfeasiblePlacementError& e) {
        if (diag) {
            diag->fallback = true;
            diag->reason = e.what();
        }
        return y1;
    } catch (const DegenerateSlopeError& e) {
        if (diag) {
            diag->fallback = true;
            diag->reason = e.what();
        }
        return y1;
    }
    const double clamped = std::min(std::max(y_des, y_min), y_max);
    if (diag && clamped != y_des) diag->clamped = true;
    return clamped;
}

// ---------------------------------------------------------------------------
// Lookup table

namespace {

void check_axis(const LutAxis& a, const char* name) {
    if (a.count < 2) throw ParameterError(std::string("LUT axis ") + name + " needs >= 2 nodes");
    if (!(a.step > 0.0))
        throw ParameterError(std::string("LUT axis ") + name + " needs positive step");
    if (!std::isfinite(a.start))
        throw ParameterError(std::string("LUT axis ") + name + " start not finite");
}

// Clamped cell lookup: index of the lower node and the fraction within.
inline void locate(const LutAxis& a, double v, std::uint32_t& i0, double& frac) noexcept {
    double u = (v - a.start) / a.step;
    const double top = static_cast<double>(a.count - 1);
    u = u < 0.0 ? 0.0 : (u > top ? top : u);
    double fi = std::floor(u);
    if (fi > top - 1.0) fi = top - 1.0;
    i0 = static_cast<std::uint32_t>(fi);
    frac = u - fi;
}

}  // namespace

LookupTable::LookupTable(LutAxis theta, LutAxis L, LutAxis phase, std::vector<double> values)
    : theta_(theta), l_(L), phase_(phase), values_(std::move(values)) {
    check_axis(theta_, "theta");
    check_axis(l_, "L");
    check_axis(phase_, "phase");
    const size_t expect =
        static_cast<size_t>(theta_.count) * l_.count * phase_.count;
    if (values_.size() != expect)
        throw ParameterError("LUT value array length does not match axis counts");
    for (double v : values_)
        if (!std::isfinite(v)) throw InvalidStateError("LUT contains a non-finite value");
}

double LookupTable::query(const AlipState& state, double phase_time) const noexcept {
    std::uint32_t i0, j0, k0;
    double fi, fj, fk;
    locate(theta_, state.theta_c, i0, fi);
    locate(l_, state.L, j0, fj);
    locate(phase_, phase_time, k0, fk);

    const size_t sj = phase_.count;
    const size_t si = static_cast<size_t>(l_.count) * sj;
    const double* base = values_.data() + i0 * si + j0 * sj + k0;

    const double c000 = base[0], c001 = base[1];
    const double c010 = base[sj], c011 = base[sj + 1];
    const double c100 = base[si], c101 = base[si + 1];
    const double c110 = base[si + sj], c111 = base[si + sj + 1];

    const double c00 = c000 + fk * (c001 - c000);
    const double c01 = c010 + fk * (c011 - c010);
    const double c10 = c100 + fk * (c101 - c100);
    const double c11 = c110 + fk * (c111 - c110);
    const double c0 = c00 + fj * (c01 - c00);
    const double c1 = c10 + fj * (c11 - c10);
    return c0 + fi * (c1 - c0);
}

void LookupTable::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write lookup table: " + path);
    const char magic[4] = {'A', 'L', 'U', 'T'};
    out.write(magic, 4);
    const char version = 1;
    out.write(&version, 1);
    auto put_axis = [&](const LutAxis& a) {
        out.write(reinterpret_cast<const char*>(&a.start), 8);
        out.write(reinterpret_cast<const char*>(&a.step), 8);
        out.write(reinterpret_cast<const char*>(&a.count), 4);
    };
    put_axis(theta_);
    put_axis(l_);
    put_axis(phase_);
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path);
}

LookupTable LookupTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open lookup table: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "ALUT", 4) != 0)
        throw IoError("not a lookup-table file: " + path);
    char version;
    in.read(&version, 1);
    if (!in || version != 1) throw IoError("unsupported lookup-table version in " + path);
    auto get_axis = [&](LutAxis& a) {
        in.read(reinterpret_cast<char*>(&a.start), 8);
        in.read(reinterpret_cast<char*>(&a.step), 8);
        in.read(reinterpret_cast<char*>(&a.count), 4);
    };
    LutAxis th, L, ph;
    get_axis(th);
    get_axis(L);
    get_axis(ph);
    if (!in) throw IoError("truncated lookup-table header: " + path);
    const size_t n = static_cast<size_t>(th.count) * L.count * ph.count;
    std::vector<double> values(n);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * 8));
    if (!in) throw IoError("truncated lookup-table data: " + path);
    return LookupTable(th, L, ph, std::move(values));
}

namespace {

struct NominalRanges {
    double th_lo, th_hi, l_lo, l_hi, l_ref;
};

NominalRanges frontal_ranges(const NominalTrajectory& traj) {
    const BezierCurve& cth = traj.curve("theta_c_nom_frontal");
    const BezierCurve& cL = traj.curve("L_nom_frontal");
    NominalRanges r{1e300, -1e300, 1e300, -1e300, 0.0};
    for (int i = 0; i <= 200; ++i) {
        const double s = i / 200.0;
        r.th_lo = std::min(r.th_lo, cth.evaluate(s));
        r.th_hi = std::max(r.th_hi, cth.evaluate(s));
        r.l_lo = std::min(r.l_lo, cL.evaluate(s));
        r.l_hi = std::max(r.l_hi, cL.evaluate(s));
    }
    r.l_ref = std::max(std::fabs(r.l_lo), std::fabs(r.l_hi));
    return r;
}

}  // namespace

LutAxesSpec LutAxesSpec::defaults_for(const NominalTrajectory& traj) {
    const NominalRanges r = frontal_ranges(traj);
    LutAxesSpec spec;
    spec.theta = {r.th_lo - 0.3, (r.th_hi - r.th_lo + 0.6) / 40.0, 41};
    spec.L = {r.l_lo - 0.5 * r.l_ref, (r.l_hi - r.l_lo + r.l_ref) / 40.0, 41};
    spec.phase = {0.0, traj.T / 20.0, 21};
    return spec;
}

LutAxesSpec LutAxesSpec::envelope_for(const NominalTrajectory& traj) {
    const NominalRanges r = frontal_ranges(traj);
    LutAxesSpec spec;
    spec.theta = {r.th_lo - 0.015, (r.th_hi - r.th_lo + 0.03) / 40.0, 41};
    spec.L = {r.l_lo - 0.5 * r.l_ref, (r.l_hi - r.l_lo + r.l_ref) / 40.0, 41};
    spec.phase = {0.0, traj.T / 20.0, 21};
    return spec;
}

LookupTable build_lookup_table(const NominalTrajectory& traj, const RobotParams& params,
                               const LutAxesSpec& axes, const LdesPolicy& l_des_policy,
                               double dt, LutBuildReport* report) {
    check_axis(axes.theta, "theta");
    check_axis(axes.L, "L");
    check_axis(axes.phase, "phase");
    const double l_des_default = traj.l_des_frontal();

    const size_t n =
        static_cast<size_t>(axes.theta.count) * axes.L.count * axes.phase.count;
    std::vector<double> values(n);
    std::vector<char> feasible(n, 1);
    size_t bad = 0;

    size_t idx = 0;
    for (std::uint32_t i = 0; i < axes.theta.count; ++i) {
        for (std::uint32_t j = 0; j < axes.L.count; ++j) {
            for (std::uint32_t k = 0; k < axes.phase.count; ++k, ++idx) {
                PlacementQuery q;
                q.state = {axes.theta.start + i * axes.theta.step,
                           axes.L.start + j * axes.L.step};
                q.phase_time = std::min(axes.phase.start + k * axes.phase.step, traj.T);
                q.L_des = l_des_policy ? l_des_policy(q.state, q.phase_time) : l_des_default;
                PlacementDiagnostics diag;
                values[idx] = plan_placement(q, traj, params, dt, {}, &diag);
                if (diag.fallback) {
                    feasible[idx] = 0;
                    ++bad;
                }
            }
        }
    }

    // Fill infeasible nodes from the nearest feasible neighbor (Manhattan
    // metric over grid indices, deterministic scan order).
    if (bad > 0 && bad < n) {
        const auto at = [&](std::uint32_t i, std::uint32_t j, std::uint32_t k) {
            return (static_cast<size_t>(i) * axes.L.count + j) * axes.phase.count + k;
        };
        std::vector<double> filled = values;
        for (std::uint32_t i = 0; i < axes.theta.count; ++i)
            for (std::uint32_t j = 0; j < axes.L.count; ++j)
                for (std::uint32_t k = 0; k < axes.phase.count; ++k) {
                    const size_t me = at(i, j, k);
                    if (feasible[me]) continue;
                    long best_dist = -1;
                    double best_val = values[me];
                    for (std::uint32_t a = 0; a < axes.theta.count; ++a)
                        for (std::uint32_t b = 0; b < axes.L.count; ++b)
                            for (std::uint32_t c = 0; c < axes.phase.count; ++c) {
                                if (!feasible[at(a, b, c)]) continue;
                                const long d = std::labs(static_cast<long>(a) - i) +
                                               std::labs(static_cast<long>(b) - j) +
                                               std::labs(static_cast<long>(c) - k);
                                if (best_dist < 0 || d < best_dist) {
                                    best_dist = d;
                                    best_val = values[at(a, b, c)];
                                }
                            }
                    filled[me] = best_val;
                }
        values.swap(filled);
    }

    if (report) *report = {n, bad};
    return LookupTable(axes.theta, axes.L, axes.phase, std::move(values));
}

double lut_query(const LookupTable& lut, const AlipState& state, double phase_time) {
    return lut.query(state, phase_time);
}

}  // namespace alip
