#include <doctest.h>

#include <cmath>
#include <random>

#include "alip/alip_core.hpp"
#include "alip/errors.hpp"
#include "test_helpers.hpp"

using namespace alip;
using testing::default_rc;
using testing::robot32;

TEST_CASE("pendulum derivative matches the closed-form field") {
    const RobotParams params = robot32();
    const PendulumProfile prof(default_rc());
    const double T = 0.4;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> th(-0.6, 0.6), mom(-60.0, 60.0), tq(-23.0, 23.0),
        ph(0.0, T);
    for (int i = 0; i < 200; ++i) {
        const AlipState x{th(rng), mom(rng)};
        const double t = ph(rng), u = tq(rng);
        const double r = prof.r(t / T);
        const AlipState d = dynamics(t, x, params, prof, T, u);
        CHECK(d.theta_c == doctest::Approx(x.L / (params.m * r * r)).epsilon(1e-15));
        CHECK(d.L ==
              doctest::Approx(params.m * params.g * r * std::sin(x.theta_c) + u).epsilon(1e-15));
    }
}

TEST_CASE("derivative is affine in the ankle torque") {
    const RobotParams params = robot32();
    const PendulumProfile prof(default_rc());
    const AlipState x{0.2, -30.0};
    const AlipState d0 = dynamics(0.1, x, params, prof, 0.4, 0.0);
    const AlipState d1 = dynamics(0.1, x, params, prof, 0.4, 5.0);
    CHECK(d1.theta_c == d0.theta_c);
    CHECK(d1.L - d0.L == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("CoM velocity is the time derivative of CoM position") {
    const PendulumProfile prof(default_rc());
    const RobotParams params = robot32();
    const double T = 0.4, h = 1e-6;
    for (const double t : {0.05, 0.13, 0.2, 0.31, 0.39}) {
        // Freeze a state and differentiate the position along the flow.
        const AlipState x{0.15, -28.0};
        const double r = prof.r(t / T);
        const double theta_dot = x.L / (params.m * r * r);
        const auto [vx, vz] = com_velocity(r, prof.r_dot(t / T, T), x.theta_c, theta_dot);

        const auto pos_at = [&](double tt) {
            const double theta = x.theta_c + (tt - t) * theta_dot;  // frozen theta_dot
            return com_position(prof.r(tt / T), theta);
        };
        const auto [xp, zp] = pos_at(t + h);
        const auto [xm, zm] = pos_at(t - h);
        CHECK(vx == doctest::Approx((xp - xm) / (2.0 * h)).epsilon(1e-7));
        CHECK(vz == doctest::Approx((zp - zm) / (2.0 * h)).epsilon(1e-7));
    }
}

TEST_CASE("explicit Euler step is literally x + dt f(t,x)") {
    const DynamicsFn f = [](double t, const AlipState& x) {
        return AlipState{x.L + t, -2.0 * x.theta_c};
    };
    const AlipState x{0.3, 1.5};
    const AlipState y = euler_step(f, 2.0, x, 0.01);
    CHECK(y.theta_c == 0.3 + 0.01 * (1.5 + 2.0));
    CHECK(y.L == 1.5 + 0.01 * (-2.0 * 0.3));
}

TEST_CASE("euler_step refuses to produce a non-finite state") {
    const DynamicsFn bad = [](double, const AlipState&) {
        return AlipState{std::nan(""), 0.0};
    };
    CHECK_THROWS_AS((void)euler_step(bad, 0.0, AlipState{0.0, 0.0}, 0.1),
                    alip::PropagationError);
}

TEST_CASE("integrate_phase lands exactly on the end time and keeps every sample") {
    const RobotParams params = robot32();
    const PendulumProfile prof(default_rc());
    const auto trace = integrate_phase(AlipState{0.1, -10.0}, 0.0, 0.4, 1e-3, params, prof,
                                       0.4, nullptr);
    REQUIRE(trace.size() == 401);
    CHECK(trace.front().t == 0.0);
    CHECK(trace.back().t == doctest::Approx(0.4).epsilon(1e-15));
    // Truncated last substep: integrate over an interval not divisible by dt.
    const auto odd = integrate_phase(AlipState{0.1, -10.0}, 0.0, 0.35e-2, 1e-3, params, prof,
                                     0.4, nullptr);
    CHECK(odd.back().t == doctest::Approx(0.35e-2).epsilon(1e-12));
}

TEST_CASE("integrate_final reproduces the trace endpoint bit for bit") {
    const RobotParams params = robot32();
    const PendulumProfile prof(default_rc());
    const AlipState x0{0.21, -35.0};
    const auto trace =
        integrate_phase(x0, 0.0, 0.4, 1e-3, params, prof, 0.4, [](double) { return 3.0; });
    const AlipState xf = integrate_final(x0, 0.0, 0.4, 1e-3, params, prof, 0.4, 3.0);
    CHECK(xf.theta_c == trace.back().x.theta_c);
    CHECK(xf.L == trace.back().x.L);
}

TEST_CASE("first-order convergence against a frozen-length closed form") {
    // With the length pinned and sin(theta) linearized the field is linear,
    // so the exact flow is hyperbolic and the Euler error must halve with dt.
    const RobotParams params = robot32();
    const double r = 0.85, T = 0.4;
    const double omega = std::sqrt(params.g / r);
    const AlipState x0{0.05, -2.0};
    const DynamicsFn linear = [&](double, const AlipState& x) {
        return AlipState{x.L / (params.m * r * r), params.m * params.g * r * x.theta_c};
    };
    const double c1 = x0.theta_c;
    const double c2 = x0.L / (params.m * r * r * omega);
    const double exact = c1 * std::cosh(omega * T) + c2 * std::sinh(omega * T);

    double prev_err = 0.0;
    for (const double dt : {1e-3, 5e-4, 2.5e-4}) {
        AlipState x = x0;
        double t = 0.0;
        while (t < T - 1e-15) {
            const double h = std::min(dt, T - t);
            x = euler_step(linear, t, x, h);
            t += h;
        }
        const double err = std::fabs(x.theta_c - exact);
        if (prev_err > 0.0) {
            const double ratio = err / prev_err;
            CHECK(ratio > 0.4);
            CHECK(ratio < 0.6);
        }
        prev_err = err;
    }
}

TEST_CASE("profile construction rejects non-positive lengths") {
    CHECK_THROWS_AS(PendulumProfile(BezierCurve({0.9, -0.1, 0.9})), alip::GeometryError);
    CHECK_THROWS_AS(PendulumProfile(BezierCurve({0.0, 0.9})), alip::GeometryError);
}

TEST_CASE("dynamics validates mass and phase") {
    const PendulumProfile prof(default_rc());
    RobotParams bad;
    bad.m = 0.0;
    CHECK_THROWS_AS((void)dynamics(0.1, AlipState{0, 0}, bad, prof, 0.4, 0.0),
                    alip::ParameterError);
    const RobotParams params = robot32();
    CHECK_THROWS_AS((void)dynamics(0.5, AlipState{0, 0}, params, prof, 0.4, 0.0),
                    alip::DomainError);
}
