#pragma once

#include "hydronmpc/harness/packets.hpp"
#include "hydronmpc/nmpc/controller.hpp"
#include "hydronmpc/plant/plant.hpp"
#include "hydronmpc/plant/scenario.hpp"

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace hnmpc {

/// Blocking IPv4 UDP socket.
class UdpSocket {
 public:
  /// Binds host:port (port 0 picks a free one). Throws Error on failure.
  UdpSocket(const std::string& host, std::uint16_t port);
  ~UdpSocket();
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  std::uint16_t port() const { return port_; }
  void send_to(const std::string& host, std::uint16_t port, const std::uint8_t* data, std::size_t size);
  /// Waits up to timeout_ms; returns the datagram size or -1 on timeout.
  /// The sender is stored for reply().
  long receive(std::uint8_t* buffer, std::size_t capacity, int timeout_ms);
  void reply(const std::uint8_t* data, std::size_t size);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::array<std::uint8_t, 16> last_peer_{};
  bool have_peer_ = false;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  double silence_timeout = 1.0;  // s without a state packet before failsafe
  int poll_ms = 20;
  std::size_t max_packets = 0;   // 0: run until stop
  /// Sequences in [first, last) are treated as lost on the link.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> silent_sequences;
};

struct ServeStats {
  std::size_t received = 0;
  std::size_t replied = 0;
  std::size_t malformed = 0;
  std::size_t stale = 0;
  std::size_t silenced = 0;
  std::size_t failsafe_entries = 0;
  std::vector<std::uint32_t> reply_sequences;
};

/// Answers every fresh state packet with the controller's command for it.
/// Returns when stop is set or max_packets states were handled.
ServeStats udp_serve(UdpSocket& socket, NmpcController& controller, const Scenario& scenario,
                     const ServeConfig& config, const std::atomic<bool>& stop);

enum class TickSource : std::uint8_t { Fresh, Held, Dropped, Failsafe };

struct DriveConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::size_t cycles = 500;
  double drop_rate = 0.0;        // simulated loss of received commands
  std::uint64_t drop_seed = 1;
  double silence_timeout = 1.0;  // s of plant time without a fresh command
  int reply_timeout_ms = 100;
  bool paced = false;            // sleep to the 50 Hz period
};

struct DriveTick {
  std::uint32_t sequence = 0;
  TickSource source = TickSource::Fresh;
  InputVector applied;
  std::uint16_t flags = 0;
};

struct DriveResult {
  std::vector<DriveTick> ticks;
  std::vector<StateVector> states;
  std::size_t malformed = 0;
  std::size_t stale = 0;
  std::size_t dropped = 0;
  std::size_t held = 0;
  std::size_t failsafe_ticks = 0;
};

/// Seeded drop decisions, one per tick.
std::vector<bool> drop_schedule(std::size_t cycles, double rate, std::uint64_t seed);

/// Plant side: sends a state packet each tick and applies the matching
/// command, the last accepted one when it is missing, or zero valves once
/// silence_timeout has passed since the last accepted command.
DriveResult udp_drive(UdpSocket& socket, const PlantParams& params, const Scenario& scenario,
                      const DriveConfig& config);

}  // namespace hnmpc
