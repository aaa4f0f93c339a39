#include "hydronmpc/harness/udp.hpp"

#include "hydronmpc/errors.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <random>
#include <thread>

namespace hnmpc {

namespace {

sockaddr_in make_address(const std::string& host, std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ConfigError("invalid IPv4 address: " + host);
  return a;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

UdpSocket::UdpSocket(const std::string& host, std::uint16_t port) {
  const sockaddr_in a = make_address(host, port);
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&a), sizeof(a)) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    throw Error("bind " + host + ":" + std::to_string(port) + ": " + msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpSocket::send_to(const std::string& host, std::uint16_t port, const std::uint8_t* data, std::size_t size) {
  const sockaddr_in a = make_address(host, port);
  if (::sendto(fd_, data, size, 0, reinterpret_cast<const sockaddr*>(&a), sizeof(a)) < 0) {
    throw Error(std::string("sendto: ") + std::strerror(errno));
  }
}

long UdpSocket::receive(std::uint8_t* buffer, std::size_t capacity, int timeout_ms) {
  pollfd p{fd_, POLLIN, 0};
  const int ready = ::poll(&p, 1, timeout_ms);
  if (ready < 0) throw Error(std::string("poll: ") + std::strerror(errno));
  if (ready == 0) return -1;
  sockaddr_in from{};
  socklen_t len = sizeof(from);
  const ssize_t n = ::recvfrom(fd_, buffer, capacity, 0, reinterpret_cast<sockaddr*>(&from), &len);
  if (n < 0) throw Error(std::string("recvfrom: ") + std::strerror(errno));
  static_assert(sizeof(from) <= sizeof(last_peer_));
  std::memcpy(last_peer_.data(), &from, sizeof(from));
  have_peer_ = true;
  return static_cast<long>(n);
}

void UdpSocket::reply(const std::uint8_t* data, std::size_t size) {
  if (!have_peer_) throw ContractError("UdpSocket::reply before any receive");
  sockaddr_in to{};
  std::memcpy(&to, last_peer_.data(), sizeof(to));
  if (::sendto(fd_, data, size, 0, reinterpret_cast<const sockaddr*>(&to), sizeof(to)) < 0) {
    throw Error(std::string("sendto: ") + std::strerror(errno));
  }
}

ServeStats udp_serve(UdpSocket& socket, NmpcController& controller, const Scenario& scenario,
                     const ServeConfig& config, const std::atomic<bool>& stop) {
  ServeStats stats;
  std::array<std::uint8_t, 512> buf{};
  auto last_valid = std::chrono::steady_clock::now();
  bool failsafe = false;
  bool have_sequence = false;
  std::uint32_t last_sequence = 0;
  const std::size_t n = controller.offline().horizon();

  while (!stop.load()) {
    if (config.max_packets > 0 && stats.received + stats.silenced >= config.max_packets) break;
    const long size = socket.receive(buf.data(), buf.size(), config.poll_ms);
    if (!failsafe && seconds_since(last_valid) > config.silence_timeout) {
      failsafe = true;
      ++stats.failsafe_entries;
      controller.clear_history();
    }
    if (size < 0) continue;
    const auto state = decode_state(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(size)));
    if (!state) {
      ++stats.malformed;
      continue;
    }
    if (have_sequence && state->sequence <= last_sequence) {
      ++stats.stale;
      continue;
    }
    bool silent = false;
    for (const auto& [first, last] : config.silent_sequences) silent |= state->sequence >= first && state->sequence < last;
    if (silent) {
      ++stats.silenced;
      continue;
    }
    have_sequence = true;
    last_sequence = state->sequence;
    last_valid = std::chrono::steady_clock::now();
    ++stats.received;

    const double t = state->timestamp;
    const CycleOutput out = controller.step(packet_state_vector(*state), t, reference_window(scenario, t, n),
                                            scenario.reference_at(t));
    PacketCommand cmd;
    cmd.sequence = state->sequence;
    for (int j = 0; j < 3; ++j) cmd.valves[static_cast<std::size_t>(j)] = out.command(j);
    cmd.gear = static_cast<std::uint8_t>(out.diagnostics.gear);
    cmd.flags = static_cast<std::uint16_t>((out.diagnostics.warmup ? kCommandWarmup : 0) |
                                           (failsafe || out.diagnostics.failsafe ? kCommandFailsafe : 0));
    failsafe = false;
    const auto bytes = encode_command(cmd);
    socket.reply(bytes.data(), bytes.size());
    ++stats.replied;
    stats.reply_sequences.push_back(cmd.sequence);
  }
  return stats;
}

std::vector<bool> drop_schedule(std::size_t cycles, double rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(std::clamp(rate, 0.0, 1.0));
  std::vector<bool> out(cycles);
  for (std::size_t k = 0; k < cycles; ++k) out[k] = drop(rng);
  return out;
}

DriveResult udp_drive(UdpSocket& socket, const PlantParams& params, const Scenario& scenario,
                      const DriveConfig& config) {
  DriveResult result;
  const std::vector<bool> drops = drop_schedule(config.cycles, config.drop_rate, config.drop_seed);
  PlantState s = initial_state(params, scenario.reference_at(0.0), scenario.start_gear, scenario.load_at(0.0));
  InputVector last(0.0, 0.0, 0.0, params.gear_speeds[scenario.start_gear]);
  double last_fresh = 0.0;
  std::array<std::uint8_t, 512> buf{};
  auto next_tick = std::chrono::steady_clock::now();

  for (std::size_t k = 0; k < config.cycles; ++k) {
    const double t = static_cast<double>(k) * kControlPeriod;
    const auto seq = static_cast<std::uint32_t>(k + 1);
    const auto out = encode_state(state_packet(seq, t, s.x));
    socket.send_to(config.host, config.port, out.data(), out.size());

    std::optional<PacketCommand> fresh;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(config.reply_timeout_ms);
    while (!fresh) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      const long size = socket.receive(buf.data(), buf.size(), static_cast<int>(left.count()));
      if (size < 0) break;
      const auto cmd = decode_command(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(size)));
      if (!cmd) {
        ++result.malformed;
      } else if (cmd->sequence != seq) {
        ++result.stale;
      } else {
        fresh = cmd;
      }
    }

    DriveTick tick;
    tick.sequence = seq;
    if (fresh && drops[k]) {
      ++result.dropped;
      fresh.reset();
      tick.source = TickSource::Dropped;
    }
    if (fresh) {
      const std::size_t gear = std::min<std::size_t>(fresh->gear, 2);
      last = InputVector(fresh->valves[0], fresh->valves[1], fresh->valves[2], params.gear_speeds[gear]);
      last_fresh = t;
      tick.flags = fresh->flags;
      tick.source = TickSource::Fresh;
    } else if (t - last_fresh >= config.silence_timeout - 1e-9) {
      last.head<3>().setZero();
      tick.source = TickSource::Failsafe;
      ++result.failsafe_ticks;
    } else {
      if (tick.source != TickSource::Dropped) tick.source = TickSource::Held;
      ++result.held;
    }
    tick.applied = last;
    result.ticks.push_back(tick);
    result.states.push_back(s.x);
    s = plant_step(s, params, last, scenario.load_at(t)).state;

    if (config.paced) {
      next_tick += std::chrono::microseconds(static_cast<long>(kControlPeriod * 1e6));
      std::this_thread::sleep_until(next_tick);
    }
  }
  return result;
}

}  // namespace hnmpc
