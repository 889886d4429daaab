#include "fairsignal/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace fairsignal {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'S', 'Q', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kMaxDims = 64;
constexpr std::uint32_t kMaxWidth = 1u << 16;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes{};
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

template <std::size_t N>
std::array<unsigned char, N> get_bytes(std::istream& in, const char* what) {
  std::array<unsigned char, N> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), N);
  if (in.gcount() != static_cast<std::streamsize>(N)) {
    throw CheckpointError(fmt::format("checkpoint truncated while reading {}", what));
  }
  return bytes;
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  const auto b = get_bytes<4>(in, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in, const char* what) {
  const auto b = get_bytes<8>(in, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return std::bit_cast<double>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const MlpParams& params) {
  params.validate();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.layer_dims.size()));
  for (int d : params.layer_dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (int l = 0; l < params.layer_count(); ++l) {
    const auto& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) put_f64(out, w(r, c));
    }
    for (Eigen::Index r = 0; r < params.biases[l].size(); ++r) put_f64(out, params.biases[l](r));
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

MlpParams read_checkpoint(std::istream& in) {
  const auto magic = get_bytes<8>(in, "magic");
  if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = get_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));
  }
  const std::uint32_t ndims = get_u32(in, "dim count");
  if (ndims < 2 || ndims > kMaxDims) {
    throw CheckpointError(fmt::format("implausible layer count {}", ndims));
  }
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = get_u32(in, "layer dims");
    if (d == 0 || d > kMaxWidth) throw CheckpointError(fmt::format("implausible layer width {}", d));
    dims.push_back(static_cast<int>(d));
  }
  MlpParams params = MlpParams::zeros(dims);
  for (int l = 0; l < params.layer_count(); ++l) {
    auto& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get_f64(in, "weights");
    }
    for (Eigen::Index r = 0; r < params.biases[l].size(); ++r) {
      params.biases[l](r) = get_f64(in, "biases");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("trailing bytes after checkpoint payload");
  }
  if (!params.all_finite()) throw CheckpointError("checkpoint contains non-finite values");
  return params;
}

void save_checkpoint(const std::string& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(fmt::format("cannot open '{}' for writing", path));
  write_checkpoint(out, params);
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path));
  return read_checkpoint(in);
}

}  // namespace fairsignal
