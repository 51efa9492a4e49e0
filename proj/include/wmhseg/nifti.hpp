#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmhseg/volume.hpp"

namespace wmhseg {

enum class NiftiErrorCode {
    Io,
    MalformedHeader,
    WrongMagic,
    UnsupportedDatatype,
    CompressedStream,
    TooManyDimensions,
    TruncatedPayload,
    ValueOutOfRange,
};

const char* to_string(NiftiErrorCode code);

class NiftiError : public std::runtime_error {
public:
    NiftiError(NiftiErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    NiftiErrorCode code() const { return code_; }

private:
    NiftiErrorCode code_;
};

/// NIfTI-1 datatype codes handled by the reader and writer.
enum class NiftiDatatype : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Float32 = 16,
};

/// The header fields the reader interprets. Everything else in the 348-byte
/// header is ignored on read and zero-filled on write.
struct NiftiHeaderSubset {
    std::array<std::size_t, 3> dims{};
    NiftiDatatype datatype = NiftiDatatype::Float32;
    std::array<double, 3> pixdim{1.0, 1.0, 1.0};
    std::size_t vox_offset = 352;
    double scl_slope = 0.0;
    double scl_inter = 0.0;
    bool big_endian = false;
};

inline constexpr std::size_t kNiftiHeaderSize = 348;

/// Parses a header from raw bytes. The buffer must hold at least 348 bytes.
NiftiHeaderSubset parse_nifti_header(std::span<const std::uint8_t> bytes);

/// Decodes a full single-file image held in memory.
Volume3D decode_nifti(std::span<const std::uint8_t> bytes);

/// Encodes a volume; integer datatypes reject values that are not exactly
/// representable.
std::vector<std::uint8_t> encode_nifti(const Volume3D& v, NiftiDatatype datatype);

Volume3D read_nifti(const std::filesystem::path& path);
void write_nifti(const Volume3D& v, const std::filesystem::path& path,
                 NiftiDatatype datatype = NiftiDatatype::Float32);
/// Masks are always stored as uint8.
void write_nifti(const BinaryMask3D& m, const std::filesystem::path& path);
/// Reads a volume and checks every voxel is 0 or 1.
BinaryMask3D read_nifti_mask(const std::filesystem::path& path);

}  // namespace wmhseg
