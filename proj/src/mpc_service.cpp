#include "alip/mpc_service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "alip/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "wire codec assumes a little-endian host");

namespace alip {

namespace {

template <typename T>
void put(uint8_t*& p, const T& v) {
    std::memcpy(p, &v, sizeof(T));
    p += sizeof(T);
}

template <typename T>
void get(const uint8_t*& p, T& v) {
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
}

uint64_t steady_us() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                     std::chrono::steady_clock::now().time_since_epoch())
                                     .count());
}

void set_rcv_timeout(int fd, long usec) {
    timeval tv{};
    tv.tv_sec = usec / 1000000;
    tv.tv_usec = usec % 1000000;
    if (setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv)) != 0)
        throw IoError("setsockopt(SO_RCVTIMEO) failed");
}

double percentile(std::vector<double>& v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = static_cast<double>(v.size());
    auto idx = static_cast<size_t>(std::ceil(p / 100.0 * n));
    idx = std::min(std::max<size_t>(idx, 1), v.size());
    return v[idx - 1];
}

}  // namespace

void encode_request(const MpcRequest& req, uint8_t out[kRequestSize]) {
    uint8_t* p = out;
    std::memcpy(p, kWireMagic, 4);
    p += 4;
    put(p, kWireVersion);
    put(p, kMsgTypeRequest);
    put(p, req.seq);
    put(p, req.timestamp_us);
    put(p, req.traj_id);
    put(p, req.theta_c);
    put(p, req.L);
    put(p, req.phase_time);
    put(p, req.incline_deg);
}

bool decode_request(const uint8_t* data, size_t len, MpcRequest& out) {
    if (len != kRequestSize || std::memcmp(data, kWireMagic, 4) != 0) return false;
    const uint8_t* p = data + 4;
    uint8_t version = 0, type = 0;
    get(p, version);
    get(p, type);
    if (version != kWireVersion || type != kMsgTypeRequest) return false;
    get(p, out.seq);
    get(p, out.timestamp_us);
    get(p, out.traj_id);
    get(p, out.theta_c);
    get(p, out.L);
    get(p, out.phase_time);
    get(p, out.incline_deg);
    return true;
}

void encode_response(const MpcResponse& resp, uint8_t out[kResponseSize]) {
    uint8_t* p = out;
    std::memcpy(p, kWireMagic, 4);
    p += 4;
    put(p, kWireVersion);
    put(p, kMsgTypeResponse);
    put(p, resp.seq);
    put(p, resp.torque);
    put(p, resp.compute_time_us);
    put(p, static_cast<uint8_t>(resp.converged ? 1 : 0));
}

bool decode_response(const uint8_t* data, size_t len, MpcResponse& out) {
    if (len != kResponseSize || std::memcmp(data, kWireMagic, 4) != 0) return false;
    const uint8_t* p = data + 4;
    uint8_t version = 0, type = 0, conv = 0;
    get(p, version);
    get(p, type);
    if (version != kWireVersion || type != kMsgTypeResponse) return false;
    get(p, out.seq);
    get(p, out.torque);
    get(p, out.compute_time_us);
    get(p, conv);
    out.converged = conv != 0;
    return true;
}

MpcServer::MpcServer(TrajectoryLibrary library, const MpcConfig& cfg, const RobotParams& params,
                     const ServerOptions& opts)
    : library_(std::move(library)), params_(params), mpc_(cfg, params), opts_(opts) {
    if (library_.trajectories.empty()) throw ParameterError("server needs at least one trajectory");
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw IoError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(opts_.port);
    if (inet_pton(AF_INET, opts_.bind_address.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        fd_ = -1;
        throw IoError("invalid bind address: " + opts_.bind_address);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw IoError("bind failed on " + opts_.bind_address);
    }
    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &blen) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw IoError("getsockname failed");
    }
    bound_port_ = ntohs(bound.sin_port);
    set_rcv_timeout(fd_, static_cast<long>(opts_.poll_interval_ms) * 1000);
}

MpcServer::~MpcServer() {
    stop();
    if (fd_ >= 0) ::close(fd_);
}

void MpcServer::run() {
    uint8_t buf[256];
    while (!stop_flag_.load(std::memory_order_relaxed)) {
        sockaddr_in peer{};
        socklen_t peer_len = sizeof(peer);
        const ssize_t n =
            recvfrom(fd_, buf, sizeof(buf), 0, reinterpret_cast<sockaddr*>(&peer), &peer_len);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
            if (stop_flag_.load(std::memory_order_relaxed)) break;
            throw IoError("recvfrom failed");
        }
        handle_datagram(buf, static_cast<size_t>(n), &peer, peer_len);
    }
}

void MpcServer::handle_datagram(const uint8_t* data, size_t len, const void* peer,
                                size_t peer_len) {
    MpcRequest req;
    if (!decode_request(data, len, req)) {
        malformed_.fetch_add(1, std::memory_order_relaxed);
        return;
    }
    if (req.traj_id >= library_.trajectories.size() || !std::isfinite(req.theta_c) ||
        !std::isfinite(req.L) || !std::isfinite(req.phase_time) ||
        !std::isfinite(req.incline_deg)) {
        malformed_.fetch_add(1, std::memory_order_relaxed);
        return;
    }
    const NominalTrajectory& traj = library_.trajectories[req.traj_id];
    const double phase = std::min(std::max(req.phase_time, 0.0), traj.T);
    const MpcResult res =
        mpc_.solve(AlipState{req.theta_c, req.L}, phase, traj, req.incline_deg);

    MpcResponse resp;
    resp.seq = req.seq;
    resp.torque = res.u0;
    resp.compute_time_us = static_cast<uint32_t>(
        std::min<double>(std::llround(res.solve_time_us), 4294967295.0));
    resp.converged = res.converged;
    uint8_t out[kResponseSize];
    encode_response(resp, out);
    sendto(fd_, out, sizeof(out), 0, static_cast<const sockaddr*>(peer),
           static_cast<socklen_t>(peer_len));
    handled_.fetch_add(1, std::memory_order_relaxed);
}

void MpcServer::start() {
    if (thread_.joinable()) throw InvalidStateError("server already started");
    stop_flag_.store(false);
    thread_ = std::thread([this] { run(); });
}

void MpcServer::stop() {
    stop_flag_.store(true);
    if (thread_.joinable()) thread_.join();
}

MpcClient::MpcClient(const ClientOptions& opts) : opts_(opts) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(opts_.port);
    if (getaddrinfo(opts_.host.c_str(), port_str.c_str(), &hints, &res) != 0 || res == nullptr)
        throw IoError("cannot resolve host: " + opts_.host);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0) {
        freeaddrinfo(res);
        throw IoError("socket() failed");
    }
    if (::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
        freeaddrinfo(res);
        ::close(fd_);
        fd_ = -1;
        throw IoError("connect failed to " + opts_.host + ":" + port_str);
    }
    freeaddrinfo(res);
}

MpcClient::~MpcClient() {
    if (fd_ >= 0) ::close(fd_);
}

ClientQueryResult MpcClient::client_query(const AlipState& x, double phase_time, uint16_t traj_id,
                                          double incline_deg) {
    MpcRequest req;
    req.seq = next_seq_++;
    req.timestamp_us = steady_us();
    req.traj_id = traj_id;
    req.theta_c = x.theta_c;
    req.L = x.L;
    req.phase_time = phase_time;
    req.incline_deg = incline_deg;
    uint8_t out[kRequestSize];
    encode_request(req, out);
    const auto t_send = std::chrono::steady_clock::now();
    // A dead endpoint surfaces as ICMP-unreachable on a connected UDP socket;
    // that is the miss path, not an I/O failure.
    if (send(fd_, out, sizeof(out), 0) != static_cast<ssize_t>(sizeof(out)) &&
        errno != ECONNREFUSED)
        throw IoError("send failed");
    ++sent_;

    const auto deadline = t_send + std::chrono::microseconds(opts_.timeout_us);
    uint8_t buf[256];
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        const long remaining =
            std::chrono::duration_cast<std::chrono::microseconds>(deadline - now).count();
        if (remaining <= 0) break;
        set_rcv_timeout(fd_, remaining);
        const ssize_t n = recv(fd_, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR || errno == ECONNREFUSED) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            throw IoError("recv failed");
        }
        MpcResponse resp;
        if (!decode_response(buf, static_cast<size_t>(n), resp)) continue;
        if (resp.seq != req.seq) {  // a late answer to an earlier query
            ++stale_;
            continue;
        }
        ++received_;
        miss_streak_ = 0;
        held_torque_ = resp.torque;
        ClientQueryResult result;
        result.torque = resp.torque;
        result.fresh = true;
        result.converged = resp.converged;
        result.compute_time_us = resp.compute_time_us;
        result.rtt_us = std::chrono::duration<double, std::micro>(
                            std::chrono::steady_clock::now() - t_send)
                            .count();
        return result;
    }

    ++timeouts_;
    ++miss_streak_;
    ClientQueryResult result;
    if (miss_streak_ <= opts_.hold_limit) {
        result.torque = held_torque_;
    } else {
        result.torque = 0.0;
        result.fallback_zero = true;
    }
    return result;
}

ProbeReport latency_probe(const std::string& host, uint16_t port, const TrajectoryLibrary& library,
                          uint16_t traj_id, const ProbeOptions& opts) {
    if (traj_id >= library.trajectories.size())
        throw ParameterError("probe trajectory id out of range");
    if (!(opts.rate_hz > 0.0) || !(opts.duration_s > 0.0))
        throw ParameterError("probe rate and duration must be positive");
    const NominalTrajectory& traj = library.trajectories[traj_id];
    const double phase = 0.5 * traj.T;
    const AlipState x = traj.nominal_state(phase);

    ClientOptions copts;
    copts.host = host;
    copts.port = port;
    copts.timeout_us = opts.timeout_us;
    MpcClient client(copts);

    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / opts.rate_hz));
    const auto t_end = std::chrono::steady_clock::now() +
                       std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(opts.duration_s));
    auto next_tick = std::chrono::steady_clock::now();

    std::vector<double> rtts;
    std::vector<double> computes;
    while (std::chrono::steady_clock::now() < t_end) {
        const ClientQueryResult r =
            client.client_query(x, phase, traj_id, traj.incline_deg);
        if (r.fresh) {
            rtts.push_back(r.rtt_us);
            computes.push_back(static_cast<double>(r.compute_time_us));
        }
        next_tick += period;
        std::this_thread::sleep_until(next_tick);
    }

    ProbeReport rep;
    rep.sent = client.sent();
    rep.received = client.received();
    rep.loss_pct =
        rep.sent == 0 ? 0.0
                      : 100.0 * static_cast<double>(rep.sent - rep.received) /
                            static_cast<double>(rep.sent);
    rep.rtt_max_us = rtts.empty() ? 0.0 : *std::max_element(rtts.begin(), rtts.end());
    rep.rtt_p50_us = percentile(rtts, 50.0);
    rep.rtt_p99_us = percentile(rtts, 99.0);
    rep.compute_p50_us = percentile(computes, 50.0);
    rep.compute_p99_us = percentile(computes, 99.0);
    return rep;
}

std::string format_probe_report(const ProbeReport& report) {
    std::ostringstream os;
    os << "sent: " << report.sent << "\n";
    os << "received: " << report.received << "\n";
    char line[128];
    const auto emit = [&](const char* name, double v) {
        std::snprintf(line, sizeof(line), "%s: %.3f\n", name, v);
        os << line;
    };
    emit("loss_pct", report.loss_pct);
    emit("rtt_p50_us", report.rtt_p50_us);
    emit("rtt_p99_us", report.rtt_p99_us);
    emit("rtt_max_us", report.rtt_max_us);
    emit("compute_p50_us", report.compute_p50_us);
    emit("compute_p99_us", report.compute_p99_us);
    return os.str();
}

void serve(const TrajectoryLibrary& library, const MpcConfig& cfg, const RobotParams& params,
           const ServerOptions& opts, const std::atomic<bool>* stop) {
    MpcServer server(library, cfg, params, opts);
    server.start();
    while (stop == nullptr || !stop->load(std::memory_order_relaxed))
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
}

}  // namespace alip
