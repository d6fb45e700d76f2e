#include "arclab/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <zlib.h>

#include "arclab/error.h"

namespace arclab {
namespace {

constexpr std::string_view kMagic = "ARCLABCK";
constexpr std::size_t kHeaderBytes = 8 + 5 * 4;

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

// Row-major f32 dump of a matrix.
void PutMatrix(std::vector<std::uint8_t>& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
    }
  }
}

Matrix GetMatrix(std::span<const std::uint8_t> in, std::size_t& at, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = static_cast<double>(std::bit_cast<float>(GetU32(in, at)));
      at += 4;
    }
  }
  return m;
}

std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> EncodeCheckpoint(const Model& model) {
  const ToyNet& net = model.net;
  if (model.centres.rows() != net.embedding_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "centre dimension differs from the embedding width");
  }
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  PutU32(out, kCheckpointVersion);
  PutU32(out, static_cast<std::uint32_t>(net.input_dim()));
  PutU32(out, static_cast<std::uint32_t>(net.hidden_dim()));
  PutU32(out, static_cast<std::uint32_t>(net.embedding_dim()));
  PutU32(out, static_cast<std::uint32_t>(model.centres.cols()));
  PutMatrix(out, net.w1);
  PutMatrix(out, net.b1.transpose());
  PutMatrix(out, net.w2);
  PutMatrix(out, net.b2.transpose());
  PutMatrix(out, model.centres);
  PutU32(out, Crc32(out));
  return out;
}

Model DecodeCheckpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes + 4) throw Error(ErrorKind::kIo, "checkpoint is truncated");
  const std::size_t body = bytes.size() - 4;
  if (Crc32(bytes.first(body)) != GetU32(bytes, body)) {
    throw Error(ErrorKind::kChecksumMismatch, "checkpoint CRC-32 does not match");
  }
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorKind::kIo, "not a checkpoint (bad magic)");
  }
  const std::uint32_t version = GetU32(bytes, 8);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kIo, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t d_in = GetU32(bytes, 12);
  const std::uint64_t h = GetU32(bytes, 16);
  const std::uint64_t d_emb = GetU32(bytes, 20);
  const std::uint64_t n = GetU32(bytes, 24);
  const std::uint64_t scalars = d_in * h + h + h * d_emb + d_emb + d_emb * n;
  if (kHeaderBytes + 4 * scalars != body) {
    throw Error(ErrorKind::kIo, "declared sizes do not match the payload length");
  }
  std::size_t at = kHeaderBytes;
  Model model;
  model.net.w1 = GetMatrix(bytes, at, static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(h));
  model.net.b1 = GetMatrix(bytes, at, 1, static_cast<Eigen::Index>(h)).transpose();
  model.net.w2 = GetMatrix(bytes, at, static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(d_emb));
  model.net.b2 = GetMatrix(bytes, at, 1, static_cast<Eigen::Index>(d_emb)).transpose();
  model.centres = GetMatrix(bytes, at, static_cast<Eigen::Index>(d_emb), static_cast<Eigen::Index>(n));
  return model;
}

void SaveCheckpoint(const Model& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = EncodeCheckpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

Model LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

}  // namespace arclab
