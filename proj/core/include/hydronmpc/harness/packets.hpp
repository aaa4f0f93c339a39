#pragma once

#include "hydronmpc/ssmp/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace hnmpc {

inline constexpr std::size_t kStatePacketSize = 86;
inline constexpr std::size_t kCommandPacketSize = 33;

/// "ST", u32 sequence, f64 timestamp, 9 x f64 state, little-endian.
struct PacketState {
  std::uint32_t sequence = 0;
  double timestamp = 0.0;
  std::array<double, 9> state{};
};

enum CommandFlags : std::uint16_t {
  kCommandWarmup = 1u << 0,
  kCommandFailsafe = 1u << 1,
};

/// "CM", u32 sequence, 3 x f64 valves, u8 gear index, u16 flags.
struct PacketCommand {
  std::uint32_t sequence = 0;
  std::array<double, 3> valves{};
  std::uint8_t gear = 0;
  std::uint16_t flags = 0;
};

std::array<std::uint8_t, kStatePacketSize> encode_state(const PacketState& p);
std::array<std::uint8_t, kCommandPacketSize> encode_command(const PacketCommand& p);
/// Empty on wrong size or magic.
std::optional<PacketState> decode_state(std::span<const std::uint8_t> bytes);
std::optional<PacketCommand> decode_command(std::span<const std::uint8_t> bytes);

PacketState state_packet(std::uint32_t sequence, double timestamp, const StateVector& x);
StateVector packet_state_vector(const PacketState& p);

}  // namespace hnmpc
