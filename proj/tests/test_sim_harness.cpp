#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "alip/errors.hpp"
#include "alip/mpc_service.hpp"
#include "alip/sim_harness.hpp"
#include "test_helpers.hpp"

using namespace alip;
using testing::marching_traj;
using testing::small_library;

namespace {

TrajectoryLibrary marching_library() {
    TrajectoryLibrary lib;
    lib.trajectories.push_back(marching_traj());
    return lib;
}

bool rows_equal(const LogRow& a, const LogRow& b, bool ignore_latency) {
    return a.t == b.t && a.sagittal.theta_c == b.sagittal.theta_c &&
           a.sagittal.L == b.sagittal.L && a.frontal.theta_c == b.frontal.theta_c &&
           a.frontal.L == b.frontal.L && a.torque == b.torque && a.y_des == b.y_des &&
           a.traj_index == b.traj_index && a.leg == b.leg && a.events == b.events &&
           (ignore_latency || a.latency_us == b.latency_us);
}

}  // namespace

TEST_CASE("profile evaluation: ends clamp, interior interpolates") {
    const std::vector<ProfilePoint> ramp = {{1.0, 0.0}, {3.0, 10.0}, {5.0, 10.0}};
    CHECK(eval_profile(ramp, 0.0) == 0.0);
    CHECK(eval_profile(ramp, 1.0) == 0.0);
    CHECK(eval_profile(ramp, 2.0) == doctest::Approx(5.0));
    CHECK(eval_profile(ramp, 4.0) == 10.0);
    CHECK(eval_profile(ramp, 99.0) == 10.0);
    CHECK(eval_profile({}, 2.0, 7.0) == 7.0);
    // A repeated time makes a step change.
    const std::vector<ProfilePoint> step = {{1.0, 0.0}, {1.0, 4.0}};
    CHECK(eval_profile(step, 0.5) == 0.0);
    CHECK(eval_profile(step, 1.5) == 4.0);
}

TEST_CASE("scenario parser accepts the full directive set") {
    const Scenario sc = parse_scenario(
        "ALIPSCEN 1\n"
        "# comment\n"
        "param duration 12\n"
        "param seed 9\n"
        "param placement_window 0.5\n"
        "param lean_cap 3.5\n"
        "param lean_slew 0.1\n"
        "param dt 0.001\n"
        "param mpc_every_ticks 20\n"
        "control udp\n"
        "profile incline 0 0\n"
        "profile incline 5 10\n"
        "profile belt 0 0.4\n"
        "profile command 2 0.9\n"
        "disturb 4 sagittal -6\n"
        "disturb 8 frontal 0.4\n",
        "everything");
    CHECK(sc.duration == 12.0);
    CHECK(sc.seed == 9u);
    CHECK(sc.placement_window == 0.5);
    CHECK(sc.lean_cap == 3.5);
    CHECK(sc.lean_slew == 0.1);
    CHECK(sc.dt == 0.001);
    CHECK(sc.mpc_every_ticks == 20);
    CHECK(sc.control == "udp");
    CHECK(sc.incline.size() == 2);
    CHECK(sc.belt.size() == 1);
    CHECK(sc.command.size() == 1);
    REQUIRE(sc.disturbances.size() == 2);
    CHECK_FALSE(sc.disturbances[0].frontal);
    CHECK(sc.disturbances[1].frontal);
    CHECK(sc.disturbances[1].delta_L == 0.4);
}

TEST_CASE("scenario parser rejects malformed input") {
    CHECK_THROWS_AS((void)parse_scenario("WRONG 1\nparam duration 5\n", "x"), ParseError);
    CHECK_THROWS_AS((void)parse_scenario("ALIPSCEN 1\nparam bogus 5\nparam duration 5\n", "x"),
                    ParseError);
    CHECK_THROWS_AS((void)parse_scenario("ALIPSCEN 1\nparam duration 5\nwat 1 2\n", "x"),
                    ParseError);
    CHECK_THROWS_AS(
        (void)parse_scenario(
            "ALIPSCEN 1\nparam duration 5\nprofile incline 3 0\nprofile incline 1 0\n", "x"),
        ParseError);
    CHECK_THROWS_AS(
        (void)parse_scenario("ALIPSCEN 1\nparam duration 5\ndisturb 1 diagonal 2\n", "x"),
        ParseError);
    CHECK_THROWS_AS((void)parse_scenario("ALIPSCEN 1\ncontrol udp\n", "x"), ParseError);
    CHECK_THROWS_AS((void)parse_scenario("ALIPSCEN 1\nparam duration 5\ncontrol tcp\n", "x"),
                    ParseError);
}

TEST_CASE("stepping in place commands exactly zero torque forever") {
    const Scenario sc = parse_scenario("ALIPSCEN 1\nparam duration 2\n", "march");
    const RunResult res = run_closed_loop(sc, marching_library(), nullptr);
    CHECK_FALSE(res.fell);
    CHECK(res.steps.size() == 5);  // 2 s of 0.4 s steps
    for (const LogRow& row : res.rows) CHECK(row.torque == 0.0);
    for (const LogRow& row : res.rows) CHECK(row.sagittal.theta_c == 0.0);
    // Lateral stepping still happens: placements stay at the design width.
    CHECK(std::fabs(res.steps.back().y_applied - 0.25) < 5e-3);
}

TEST_CASE("repeated runs are bit-identical") {
    const Scenario sc = parse_scenario(
        "ALIPSCEN 1\nparam duration 1.5\nprofile command 0 0.8\n", "rep");
    const RunResult a = run_closed_loop(sc, small_library(), nullptr);
    const RunResult b = run_closed_loop(sc, small_library(), nullptr);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i)
        REQUIRE(rows_equal(a.rows[i], b.rows[i], false));
}

TEST_CASE("a sagittal shove saturates within the limit and is survived") {
    const Scenario sc = parse_scenario(
        "ALIPSCEN 1\nparam duration 6\nprofile command 0 0.5\ndisturb 2 sagittal -6\n",
        "shove");
    const RunResult res = run_closed_loop(sc, small_library(), nullptr);
    CHECK_FALSE(res.fell);
    double u_max = 0.0;
    for (const LogRow& row : res.rows) {
        CHECK(std::fabs(row.torque) <= 23.0);
        u_max = std::max(u_max, std::fabs(row.torque));
    }
    CHECK(u_max > 5.0);  // the shove demanded real corrective torque
}

TEST_CASE("an unsurvivable kick ends the run with a recorded fall") {
    const Scenario sc = parse_scenario(
        "ALIPSCEN 1\nparam duration 10\nprofile command 0 0.5\ndisturb 1 sagittal -500\n",
        "doom");
    const RunResult res = run_closed_loop(sc, small_library(), nullptr);
    CHECK(res.fell);
    CHECK(res.fall_time > 1.0);
    CHECK(res.fall_time < 10.0);
    CHECK(res.rows.size() < 20000);  // stopped early
    CHECK(std::fabs(res.rows.back().sagittal.theta_c) >= std::numbers::pi / 3.0 - 0.05);
}

TEST_CASE("crossing a breakpoint switches the trajectory at the next swap") {
    const Scenario sc = parse_scenario(
        "ALIPSCEN 1\nparam duration 4\nprofile command 0 0.5\n"
        "profile incline 0 0\nprofile incline 1 0\nprofile incline 1.2 9\n",
        "switch");
    const RunResult res = run_closed_loop(sc, small_library(), nullptr);
    CHECK_FALSE(res.fell);
    bool saw_switch = false;
    for (const LogRow& row : res.rows) saw_switch |= (row.events & kEventSwitch) != 0;
    CHECK(saw_switch);
    CHECK(res.rows.front().traj_index == 0);
    CHECK(res.rows.back().traj_index == 1);
    // The switch happens at a step boundary, not mid-step.
    for (size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].traj_index != res.rows[i - 1].traj_index)
            CHECK((res.rows[i - 1].events & kEventImpact) != 0);
}

TEST_CASE("frontal disturbances are applied once, to the frontal plane") {
    const Scenario base = parse_scenario(
        "ALIPSCEN 1\nparam duration 1\nprofile command 0 0.5\n", "base");
    Scenario kicked = base;
    kicked.disturbances.push_back({0.5, true, 0.4});
    const RunResult a = run_closed_loop(base, small_library(), nullptr);
    const RunResult b = run_closed_loop(kicked, small_library(), nullptr);
    REQUIRE(a.rows.size() == b.rows.size());
    const size_t k = static_cast<size_t>(0.5 / base.dt);
    CHECK(b.rows[k].frontal.L - a.rows[k].frontal.L == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(b.rows[k].sagittal.L == a.rows[k].sagittal.L);
    CHECK(b.rows[k - 1].frontal.L == a.rows[k - 1].frontal.L);
}

TEST_CASE("csv export writes one row per tick with the documented header") {
    const Scenario sc = parse_scenario("ALIPSCEN 1\nparam duration 0.5\n", "csv");
    const TrajectoryLibrary lib = marching_library();
    const RunResult res = run_closed_loop(sc, lib, nullptr);
    const std::string path =
        (std::filesystem::temp_directory_path() / "harness_test.csv").string();
    export_csv(res, lib, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "time,theta_sag,L_sag,theta_fro,L_fro,torque,y_des,traj,leg,latency_us,events");
    size_t lines = 0;
    std::string line;
    std::string first_row;
    while (std::getline(in, line)) {
        if (lines == 0) first_row = line;
        ++lines;
    }
    CHECK(lines == res.rows.size());
    // 11 columns, trajectory referenced by name, stance leg as a letter.
    std::stringstream ss(first_row);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 11);
    CHECK(fields[7] == "march");
    CHECK((fields[8] == "L" || fields[8] == "R"));
    std::remove(path.c_str());

    CHECK_THROWS_AS(export_csv(RunResult{}, lib, path), InvalidStateError);
}

TEST_CASE("plot emission produces an svg document") {
    const Scenario sc = parse_scenario("ALIPSCEN 1\nparam duration 0.5\n", "plot");
    const TrajectoryLibrary lib = marching_library();
    const RunResult res = run_closed_loop(sc, lib, nullptr);
    const std::string path =
        (std::filesystem::temp_directory_path() / "harness_test.svg").string();
    emit_plot(res, path, 23.0);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("<svg") != std::string::npos);
    CHECK(ss.str().find("</svg>") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("udp control reproduces the in-process run except for latency") {
    const TrajectoryLibrary& lib = small_library();
    ServerOptions sopts;
    sopts.port = 0;
    MpcServer server(lib, MpcConfig{}, testing::robot32(), sopts);
    server.start();

    const std::string body =
        "ALIPSCEN 1\nparam duration 1.2\nprofile command 0 0.7\n"
        "profile incline 0 0\nprofile incline 1 3\n";
    const Scenario in_proc = parse_scenario(body, "parity");
    Scenario udp = in_proc;
    udp.control = "udp";

    HarnessOptions opts;
    opts.udp_port = server.port();
    const RunResult a = run_closed_loop(in_proc, lib, nullptr);
    const RunResult b = run_closed_loop(udp, lib, nullptr, opts);
    server.stop();

    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i)
        REQUIRE(rows_equal(a.rows[i], b.rows[i], true));
    // The offload path actually went over the wire.
    CHECK(server.requests_handled() > 0);
}
