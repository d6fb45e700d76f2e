#ifndef ARCLAB_CHECKPOINT_H_
#define ARCLAB_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "arclab/autonet.h"

namespace arclab {

// Layout, all little-endian:
//   "ARCLABCK"                       8-byte magic
//   u32 version (= 1)
//   u32 d_in, u32 h, u32 d_emb, u32 n
//   f32 w1[d_in][h], b1[h], w2[h][d_emb], b2[d_emb], centres[d_emb][n]
//   u32 CRC-32 (zlib polynomial) of every preceding byte
// Parameters are rounded to f32 on save; a save -> load -> save cycle is
// byte-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> EncodeCheckpoint(const Model& model);
// Throws kChecksumMismatch on CRC failure and kIo on malformed headers or
// length mismatches.
Model DecodeCheckpoint(std::span<const std::uint8_t> bytes);

void SaveCheckpoint(const Model& model, const std::filesystem::path& path);
Model LoadCheckpoint(const std::filesystem::path& path);

}  // namespace arclab

#endif  // ARCLAB_CHECKPOINT_H_
