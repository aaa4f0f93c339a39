#include "hydronmpc/ssmp/checkpoint.hpp"

#include "hydronmpc/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace hnmpc {

void ByteWriter::tag(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

void ByteWriter::u8(std::uint8_t v) { bytes_.push_back(v); }

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void ByteWriter::f64s(const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
}

void ByteReader::need(std::size_t n) const {
  if (size_ - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
}

bool ByteReader::consume_tag(std::string_view magic) {
  if (remaining() < magic.size() || std::memcmp(data_ + pos_, magic.data(), magic.size()) != 0) return false;
  pos_ += magic.size();
  return true;
}

void ByteReader::expect_tag(std::string_view magic, const char* what) {
  if (!consume_tag(magic)) throw FormatError(std::string(what) + ": bad magic, expected '" + std::string(magic) + "'");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v = static_cast<std::uint16_t>(v | (std::uint16_t{data_[pos_ + i]} << (8 * i)));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

Vector ByteReader::f64s(Eigen::Index n) {
  need(static_cast<std::size_t>(n) * 8);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
  return v;
}

Matrix ByteReader::f64s(Eigen::Index rows, Eigen::Index cols) {
  need(static_cast<std::size_t>(rows * cols) * 8);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
  }
  return m;
}

namespace {

std::uint64_t ssmp_payload_count(const SsmpDims& d) {
  std::uint64_t n = 2 * (9 + 4 + 3 * d.horizon);
  const std::uint64_t j = d.lstm_hidden;
  n += 4 * j * (13 + j) + 4 * j;
  const auto sizes = head_layer_sizes(d);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) n += sizes[i + 1] * sizes[i] + sizes[i + 1];
  return n;
}

void encode_range(ByteWriter& out, const MinMaxRange& r) {
  out.f64s(r.min);
  out.f64s(r.max);
}

MinMaxRange decode_range(ByteReader& in, Eigen::Index n) {
  MinMaxRange r;
  r.min = in.f64s(n);
  r.max = in.f64s(n);
  return r;
}

}  // namespace

void encode_ssmp(ByteWriter& out, const SsmpModel& model) {
  const SsmpDims& d = model.dims();
  out.tag(kSsmpMagic);
  out.u32(static_cast<std::uint32_t>(d.history));
  out.u32(static_cast<std::uint32_t>(d.horizon));
  out.u32(static_cast<std::uint32_t>(kStateDim));
  out.u32(static_cast<std::uint32_t>(kInputDim));
  out.u32(static_cast<std::uint32_t>(kOutputDim));
  out.u32(static_cast<std::uint32_t>(d.lstm_hidden));
  out.u32(static_cast<std::uint32_t>(d.head_hidden.size()));
  for (std::size_t s : d.head_hidden) out.u32(static_cast<std::uint32_t>(s));
  out.u32(static_cast<std::uint32_t>(d.target));
  out.u64(ssmp_payload_count(d));

  const Normalizer& n = model.normalizer();
  encode_range(out, n.state);
  encode_range(out, n.input);
  encode_range(out, n.output);
  out.f64s(model.encoder().weight());
  out.f64s(model.encoder().bias());
  for (std::size_t i = 0; i < model.head().num_layers(); ++i) {
    out.f64s(model.head().layer(i).weight);
    out.f64s(model.head().layer(i).bias);
  }
}

SsmpModel decode_ssmp(ByteReader& in) {
  in.expect_tag(kSsmpMagic, "SSMP checkpoint");
  SsmpDims d;
  d.history = in.u32();
  d.horizon = in.u32();
  const std::uint32_t n = in.u32(), m = in.u32(), l = in.u32();
  if (n != kStateDim || m != kInputDim || l != kOutputDim) {
    throw FormatError("SSMP checkpoint: unsupported (n, m, l) = (" + std::to_string(n) + ", " +
                      std::to_string(m) + ", " + std::to_string(l) + ")");
  }
  d.lstm_hidden = in.u32();
  const std::uint32_t layers = in.u32();
  if (layers == 0 || layers > 16) throw FormatError("SSMP checkpoint: implausible head layer count");
  d.head_hidden.clear();
  for (std::uint32_t i = 0; i < layers; ++i) d.head_hidden.push_back(in.u32());
  const std::uint32_t target = in.u32();
  if (target > 1) throw FormatError("SSMP checkpoint: unknown target mode");
  d.target = static_cast<TargetMode>(target);
  if (d.history == 0 || d.horizon == 0 || d.lstm_hidden == 0) throw FormatError("SSMP checkpoint: zero dimension");
  for (std::size_t s : d.head_hidden) {
    if (s == 0) throw FormatError("SSMP checkpoint: zero head layer size");
  }

  const std::uint64_t declared = in.u64();
  if (declared != ssmp_payload_count(d)) {
    throw FormatError("SSMP checkpoint: payload count " + std::to_string(declared) +
                      " disagrees with header dimensions (" + std::to_string(ssmp_payload_count(d)) + ")");
  }
  if (in.remaining() < declared * 8) throw FormatError("SSMP checkpoint: payload truncated");

  Normalizer norm;
  norm.state = decode_range(in, 9);
  norm.input = decode_range(in, 4);
  norm.output = decode_range(in, static_cast<Eigen::Index>(3 * d.horizon));

  const auto j = static_cast<Eigen::Index>(d.lstm_hidden);
  LstmLayer encoder(13, d.lstm_hidden);
  encoder.mutable_weight() = in.f64s(4 * j, 13 + j);
  encoder.mutable_bias() = in.f64s(4 * j);

  Mlp head(head_layer_sizes(d));
  for (std::size_t i = 0; i < head.num_layers(); ++i) {
    DenseLayer& layer = head.mutable_layer(i);
    layer.weight = in.f64s(layer.weight.rows(), layer.weight.cols());
    layer.bias = in.f64s(layer.bias.size());
  }
  try {
    return SsmpModel(d, std::move(norm), std::move(encoder), std::move(head));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("SSMP checkpoint: ") + e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_model(const std::filesystem::path& path, const SsmpModel& model) {
  ByteWriter w;
  encode_ssmp(w, model);
  write_file_bytes(path, w.bytes());
}

SsmpModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  SsmpModel model = decode_ssmp(r);
  if (!r.at_end() && !r.consume_tag("RESID1")) {
    throw FormatError("SSMP checkpoint: unexpected trailing bytes after payload");
  }
  return model;
}

}  // namespace hnmpc
