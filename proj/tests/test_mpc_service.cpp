#include <doctest.h>

#include <arpa/inet.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <random>
#include <thread>

#include "alip/ankle_mpc.hpp"
#include "alip/mpc_service.hpp"
#include "test_helpers.hpp"

using namespace alip;
using testing::robot32;
using testing::small_library;

TEST_CASE("request and response datagrams round-trip bit for bit") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> val(-100.0, 100.0);
    for (int i = 0; i < 10000; ++i) {
        MpcRequest req;
        req.seq = static_cast<uint32_t>(rng());
        req.timestamp_us = rng();
        req.traj_id = static_cast<uint16_t>(rng());
        req.theta_c = val(rng);
        req.L = val(rng);
        req.phase_time = val(rng);
        req.incline_deg = val(rng);
        uint8_t buf[kRequestSize];
        encode_request(req, buf);
        MpcRequest back;
        REQUIRE(decode_request(buf, sizeof(buf), back));
        CHECK(back.seq == req.seq);
        CHECK(back.timestamp_us == req.timestamp_us);
        CHECK(back.traj_id == req.traj_id);
        CHECK(back.theta_c == req.theta_c);
        CHECK(back.L == req.L);
        CHECK(back.phase_time == req.phase_time);
        CHECK(back.incline_deg == req.incline_deg);

        MpcResponse resp;
        resp.seq = static_cast<uint32_t>(rng());
        resp.torque = val(rng);
        resp.compute_time_us = static_cast<uint32_t>(rng());
        resp.converged = (rng() & 1) != 0;
        uint8_t rbuf[kResponseSize];
        encode_response(resp, rbuf);
        MpcResponse rback;
        REQUIRE(decode_response(rbuf, sizeof(rbuf), rback));
        CHECK(rback.seq == resp.seq);
        CHECK(rback.torque == resp.torque);
        CHECK(rback.compute_time_us == resp.compute_time_us);
        CHECK(rback.converged == resp.converged);
    }
}

TEST_CASE("decoders refuse malformed datagrams") {
    MpcRequest req;
    uint8_t buf[kRequestSize];
    encode_request(req, buf);
    MpcRequest out;
    CHECK_FALSE(decode_request(buf, sizeof(buf) - 1, out));  // short
    uint8_t bad[kRequestSize];
    std::memcpy(bad, buf, sizeof(buf));
    bad[0] = 'X';
    CHECK_FALSE(decode_request(bad, sizeof(bad), out));  // magic
    std::memcpy(bad, buf, sizeof(buf));
    bad[4] = 99;
    CHECK_FALSE(decode_request(bad, sizeof(bad), out));  // version
    std::memcpy(bad, buf, sizeof(buf));
    bad[5] = kMsgTypeResponse;
    CHECK_FALSE(decode_request(bad, sizeof(bad), out));  // wrong type

    MpcResponse resp;
    uint8_t rbuf[kResponseSize];
    encode_response(resp, rbuf);
    MpcResponse rout;
    CHECK_FALSE(decode_response(rbuf, sizeof(rbuf) - 1, rout));
    rbuf[5] = kMsgTypeRequest;
    CHECK_FALSE(decode_response(rbuf, sizeof(rbuf), rout));
}

TEST_CASE("loopback offload returns the in-process answer bit for bit") {
    const TrajectoryLibrary& lib = small_library();
    const MpcConfig cfg;
    const RobotParams params = robot32();
    ServerOptions sopts;
    sopts.port = 0;  // ephemeral
    MpcServer server(lib, cfg, params, sopts);
    server.start();

    ClientOptions copts;
    copts.port = server.port();
    copts.timeout_us = 200000;
    MpcClient client(copts);

    AnkleMpc local(cfg, params);
    const NominalTrajectory& traj = lib.trajectories[1];
    AlipState x = traj.nominal_state(0.13);
    x.L += 4.0;
    const ClientQueryResult remote = client.client_query(x, 0.13, 1, 9.5);
    const MpcResult expected = local.solve(x, 0.13, traj, 9.5);

    REQUIRE(remote.fresh);
    CHECK(remote.torque == expected.u0);
    CHECK(remote.converged == expected.converged);
    CHECK(remote.rtt_us > 0.0);
    CHECK(server.requests_handled() == 1);
    server.stop();
}

TEST_CASE("garbage, out-of-range, and non-finite requests are dropped and counted") {
    const TrajectoryLibrary& lib = small_library();
    ServerOptions sopts;
    sopts.port = 0;
    sopts.poll_interval_ms = 5;
    MpcServer server(lib, MpcConfig{}, robot32(), sopts);
    server.start();

    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(server.port());
    inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);

    const char junk[] = "not a request";
    sendto(fd, junk, sizeof(junk), 0, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));

    MpcRequest req;
    req.traj_id = 999;  // out of range
    uint8_t buf[kRequestSize];
    encode_request(req, buf);
    sendto(fd, buf, sizeof(buf), 0, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));

    req.traj_id = 0;
    req.theta_c = std::nan("");
    encode_request(req, buf);
    sendto(fd, buf, sizeof(buf), 0, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    ::close(fd);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (server.malformed_dropped() < 3 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    CHECK(server.malformed_dropped() == 3);
    CHECK(server.requests_handled() == 0);
    server.stop();
}

TEST_CASE("client holds the last torque on misses, then commands zero") {
    const TrajectoryLibrary& lib = small_library();
    ServerOptions sopts;
    sopts.port = 0;
    auto server = std::make_unique<MpcServer>(lib, MpcConfig{}, robot32(), sopts);
    server->start();

    ClientOptions copts;
    copts.port = server->port();
    copts.timeout_us = 200000;
    copts.hold_limit = 2;
    MpcClient client(copts);

    AlipState x = lib.trajectories[0].nominal_state(0.1);
    x.L -= 6.0;
    const ClientQueryResult fresh = client.client_query(x, 0.1, 0, 0.0);
    REQUIRE(fresh.fresh);
    REQUIRE(fresh.torque != 0.0);

    server.reset();  // endpoint gone: every further query times out

    const ClientQueryResult miss1 = client.client_query(x, 0.1, 0, 0.0);
    CHECK_FALSE(miss1.fresh);
    CHECK_FALSE(miss1.fallback_zero);
    CHECK(miss1.torque == fresh.torque);  // held

    const ClientQueryResult miss2 = client.client_query(x, 0.1, 0, 0.0);
    CHECK(miss2.torque == fresh.torque);  // still held

    const ClientQueryResult miss3 = client.client_query(x, 0.1, 0, 0.0);
    CHECK(miss3.fallback_zero);  // budget exhausted
    CHECK(miss3.torque == 0.0);
    CHECK(client.timeouts() == 3);
}

TEST_CASE("blocking serve wrapper runs until told to stop") {
    const TrajectoryLibrary& lib = small_library();
    ServerOptions sopts;
    sopts.bind_address = "127.0.0.1";
    sopts.port = 47911;
    std::atomic<bool> stop{false};
    std::thread th([&] { serve(lib, MpcConfig{}, robot32(), sopts, &stop); });

    ClientOptions copts;
    copts.port = 47911;
    copts.timeout_us = 500000;
    MpcClient client(copts);
    const AlipState x = lib.trajectories[0].nominal_state(0.2);
    ClientQueryResult r;
    for (int attempt = 0; attempt < 50; ++attempt) {
        r = client.client_query(x, 0.2, 0, 0.0);
        if (r.fresh) break;
    }
    CHECK(r.fresh);
    stop.store(true);
    th.join();
}

TEST_CASE("short probe against a healthy endpoint sees no loss") {
    const TrajectoryLibrary& lib = small_library();
    ServerOptions sopts;
    sopts.port = 0;
    MpcServer server(lib, MpcConfig{}, robot32(), sopts);
    server.start();

    ProbeOptions popts;
    popts.rate_hz = 200.0;
    popts.duration_s = 0.3;
    const ProbeReport rep = latency_probe("127.0.0.1", server.port(), lib, 0, popts);
    CHECK(rep.sent >= 40);
    CHECK(rep.received == rep.sent);
    CHECK(rep.loss_pct == 0.0);
    CHECK(rep.rtt_p50_us > 0.0);
    CHECK(rep.rtt_p99_us >= rep.rtt_p50_us);
    CHECK(rep.rtt_max_us >= rep.rtt_p99_us);

    const std::string text = format_probe_report(rep);
    CHECK(text.find("loss_pct: 0.000") != std::string::npos);
    CHECK(text.find("rtt_p99_us:") != std::string::npos);
    server.stop();
}
