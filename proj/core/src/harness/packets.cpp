#include "hydronmpc/harness/packets.hpp"

#include <bit>
#include <cstring>

namespace hnmpc {

namespace {

static_assert(std::endian::native == std::endian::little, "packet codec assumes a little-endian host");

template <class T>
void put(std::uint8_t*& p, T v) {
  std::memcpy(p, &v, sizeof(T));
  p += sizeof(T);
}

template <class T>
T get(const std::uint8_t*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace

std::array<std::uint8_t, kStatePacketSize> encode_state(const PacketState& s) {
  std::array<std::uint8_t, kStatePacketSize> out{};
  std::uint8_t* p = out.data();
  *p++ = 'S';
  *p++ = 'T';
  put(p, s.sequence);
  put(p, s.timestamp);
  for (double v : s.state) put(p, v);
  return out;
}

std::array<std::uint8_t, kCommandPacketSize> encode_command(const PacketCommand& c) {
  std::array<std::uint8_t, kCommandPacketSize> out{};
  std::uint8_t* p = out.data();
  *p++ = 'C';
  *p++ = 'M';
  put(p, c.sequence);
  for (double v : c.valves) put(p, v);
  put(p, c.gear);
  put(p, c.flags);
  return out;
}

std::optional<PacketState> decode_state(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kStatePacketSize || bytes[0] != 'S' || bytes[1] != 'T') return std::nullopt;
  const std::uint8_t* p = bytes.data() + 2;
  PacketState s;
  s.sequence = get<std::uint32_t>(p);
  s.timestamp = get<double>(p);
  for (double& v : s.state) v = get<double>(p);
  return s;
}

std::optional<PacketCommand> decode_command(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kCommandPacketSize || bytes[0] != 'C' || bytes[1] != 'M') return std::nullopt;
  const std::uint8_t* p = bytes.data() + 2;
  PacketCommand c;
  c.sequence = get<std::uint32_t>(p);
  for (double& v : c.valves) v = get<double>(p);
  c.gear = get<std::uint8_t>(p);
  c.flags = get<std::uint16_t>(p);
  return c;
}

PacketState state_packet(std::uint32_t sequence, double timestamp, const StateVector& x) {
  PacketState p{sequence, timestamp, {}};
  for (int i = 0; i < 9; ++i) p.state[static_cast<std::size_t>(i)] = x(i);
  return p;
}

StateVector packet_state_vector(const PacketState& p) {
  StateVector x;
  for (int i = 0; i < 9; ++i) x(i) = p.state[static_cast<std::size_t>(i)];
  return x;
}

}  // namespace hnmpc
