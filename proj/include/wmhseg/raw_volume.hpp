#pragma once

// ".vol" container for intermediate artifacts. Layout (all little-endian):
//   8 bytes  magic "WMHVOL\0\1"
//   u32      dtype   (1 = uint8, 3 = float32)
//   u32 x3   dims
//   f64 x3   spacing
//   payload  nx*ny*nz values, x fastest

#include <filesystem>
#include <span>
#include <vector>

#include "wmhseg/volume.hpp"

namespace wmhseg {

std::vector<std::uint8_t> encode_vol(const Volume3D& v);
std::vector<std::uint8_t> encode_vol(const BinaryMask3D& m);

/// Decodes either dtype into a float volume. Throws IoError on malformed input.
Volume3D decode_vol(std::span<const std::uint8_t> bytes);

void write_vol(const Volume3D& v, const std::filesystem::path& path);
void write_vol(const BinaryMask3D& m, const std::filesystem::path& path);
Volume3D read_vol(const std::filesystem::path& path);

}  // namespace wmhseg
