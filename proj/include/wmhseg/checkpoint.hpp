#pragma once

// Checkpoint container (little-endian):
//   8 bytes  magic "WMHCKPT\0"
//   u32      format version (1)
//   u32+n    network spec as JSON text
//   u32      parameter count
//   per parameter:
//     u32+n  identifier
//     u32x4  shape (n, c, h, w)
//     f64    values, count = product of shape

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wmhseg/network.hpp"

namespace wmhseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Network& net);
Network decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace wmhseg
