#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "alip/alip_core.hpp"
#include "alip/ankle_mpc.hpp"
#include "alip/traj_store.hpp"

namespace alip {

// Datagram layout (all little-endian):
//   request  = magic "AMPC" | version u8 | type u8 (0x01) | seq u32 | timestamp_us u64
//              | traj_id u16 | theta_c f64 | L f64 | phase_time f64 | incline_deg f64
//   response = magic "AMPC" | version u8 | type u8 (0x02) | seq u32 | torque f64
//              | compute_time_us u32 | converged u8
inline constexpr char kWireMagic[4] = {'A', 'M', 'P', 'C'};
inline constexpr uint8_t kWireVersion = 1;
inline constexpr uint8_t kMsgTypeRequest = 0x01;
inline constexpr uint8_t kMsgTypeResponse = 0x02;
inline constexpr size_t kRequestSize = 52;
inline constexpr size_t kResponseSize = 23;

struct MpcRequest {
    uint32_t seq = 0;
    uint64_t timestamp_us = 0;
    uint16_t traj_id = 0;
    double theta_c = 0.0;
    double L = 0.0;
    double phase_time = 0.0;
    double incline_deg = 0.0;
};

struct MpcResponse {
    uint32_t seq = 0;
    double torque = 0.0;
    uint32_t compute_time_us = 0;
    bool converged = false;
};

void encode_request(const MpcRequest& req, uint8_t out[kRequestSize]);
bool decode_request(const uint8_t* data, size_t len, MpcRequest& out);
void encode_response(const MpcResponse& resp, uint8_t out[kResponseSize]);
bool decode_response(const uint8_t* data, size_t len, MpcResponse& out);

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    uint16_t port = 47801;      // 0 selects an ephemeral port
    int poll_interval_ms = 50;  // stop-flag check cadence while idle
};

// Single-threaded UDP solver endpoint: one request in, one response out.
// Malformed or out-of-range datagrams are dropped and counted, never answered.
class MpcServer {
public:
    MpcServer(TrajectoryLibrary library, const MpcConfig& cfg, const RobotParams& params,
              const ServerOptions& opts = {});
    ~MpcServer();

    MpcServer(const MpcServer&) = delete;
    MpcServer& operator=(const MpcServer&) = delete;

    void run();    // blocking service loop; returns after stop()
    void start();  // spawn run() on a background thread
    void stop();   // signal the loop and join the background thread if any

    uint16_t port() const { return bound_port_; }
    uint64_t requests_handled() const { return handled_.load(); }
    uint64_t malformed_dropped() const { return malformed_.load(); }

private:
    void handle_datagram(const uint8_t* data, size_t len, const void* peer, size_t peer_len);

    TrajectoryLibrary library_;
    RobotParams params_;
    AnkleMpc mpc_;
    ServerOptions opts_;
    int fd_ = -1;
    uint16_t bound_port_ = 0;
    std::atomic<bool> stop_flag_{false};
    std::atomic<uint64_t> handled_{0};
    std::atomic<uint64_t> malformed_{0};
    std::thread thread_;
};

struct ClientOptions {
    std::string host = "127.0.0.1";
    uint16_t port = 47801;
    int timeout_us = 2000;  // per-query wait for the matching response
    int hold_limit = 10;    // consecutive misses tolerated before commanding zero
};

struct ClientQueryResult {
    double torque = 0.0;
    bool fresh = false;          // true when the matching response arrived in time
    bool fallback_zero = false;  // true once the hold budget is exhausted
    bool converged = false;
    uint32_t compute_time_us = 0;
    double rtt_us = 0.0;  // valid only when fresh
};

// Control-side endpoint. Responses are matched to requests by sequence number;
// stale replies are discarded. On a miss the last fresh torque is held for up
// to hold_limit consecutive queries, then the command decays to zero.
class MpcClient {
public:
    explicit MpcClient(const ClientOptions& opts);
    ~MpcClient();

    MpcClient(const MpcClient&) = delete;
    MpcClient& operator=(const MpcClient&) = delete;

    ClientQueryResult client_query(const AlipState& x, double phase_time, uint16_t traj_id,
                                   double incline_deg);

    uint64_t sent() const { return sent_; }
    uint64_t received() const { return received_; }
    uint64_t stale_dropped() const { return stale_; }
    uint64_t timeouts() const { return timeouts_; }

private:
    ClientOptions opts_;
    int fd_ = -1;
    uint32_t next_seq_ = 1;
    double held_torque_ = 0.0;
    int miss_streak_ = 0;
    uint64_t sent_ = 0;
    uint64_t received_ = 0;
    uint64_t stale_ = 0;
    uint64_t timeouts_ = 0;
};

struct ProbeOptions {
    double rate_hz = 100.0;
    double duration_s = 10.0;
    int timeout_us = 50000;  // generous wait so the probe measures, not truncates
};

struct ProbeReport {
    uint64_t sent = 0;
    uint64_t received = 0;
    double loss_pct = 0.0;
    double rtt_p50_us = 0.0;
    double rtt_p99_us = 0.0;
    double rtt_max_us = 0.0;
    double compute_p50_us = 0.0;
    double compute_p99_us = 0.0;
};

// Paced request/response soak against a running server; the query payload is
// the given trajectory's mid-step nominal state.
ProbeReport latency_probe(const std::string& host, uint16_t port, const TrajectoryLibrary& library,
                          uint16_t traj_id, const ProbeOptions& opts = {});

std::string format_probe_report(const ProbeReport& report);  // one metric per line

// Blocking convenience wrapper for the CLI: serve until *stop becomes true
// (or forever when stop is null).
void serve(const TrajectoryLibrary& library, const MpcConfig& cfg, const RobotParams& params,
           const ServerOptions& opts, const std::atomic<bool>* stop = nullptr);

}  // namespace alip
