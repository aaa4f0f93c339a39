#pragma once

#include "hydronmpc/ssmp/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hnmpc {

/// Little-endian encoder used by every on-disk section.
class ByteWriter {
 public:
  void tag(std::string_view magic);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(const Vector& v);
  /// Row-major.
  void f64s(const Matrix& m);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : ByteReader(bytes.data(), bytes.size()) {}

  bool at_end() const { return pos_ == size_; }
  std::size_t remaining() const { return size_ - pos_; }
  std::size_t position() const { return pos_; }
  /// True (and consumed) if the next bytes equal `magic`.
  bool consume_tag(std::string_view magic);
  void expect_tag(std::string_view magic, const char* what);

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  Vector f64s(Eigen::Index n);
  Matrix f64s(Eigen::Index rows, Eigen::Index cols);

 private:
  void need(std::size_t n) const;

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline constexpr std::string_view kSsmpMagic = "SSMP1";

/// SSMP1 layout: magic, u32 header {h, N, n, m, l, lstm_hidden,
/// head_layer_count, head_hidden..., target_mode}, u64 payload count, then
/// the payload as f64: normalizer {state min/max, input min/max, output
/// min/max}, encoder W (row-major) and b, head layers W and b in order.
void encode_ssmp(ByteWriter& out, const SsmpModel& model);
/// Leaves the reader just past the SSMP1 payload.
SsmpModel decode_ssmp(ByteReader& in);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Writes an SSMP1-only container.
void save_model(const std::filesystem::path& path, const SsmpModel& model);
/// Reads the SSMP1 section; a trailing section must start with a known tag.
SsmpModel load_model(const std::filesystem::path& path);

}  // namespace hnmpc
