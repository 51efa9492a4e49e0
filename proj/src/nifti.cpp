#include "wmhseg/nifti.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "wmhseg/byte_io.hpp"

namespace wmhseg {

const char* to_string(NiftiErrorCode code) {
    switch (code) {
        case NiftiErrorCode::Io: return "io error";
        case NiftiErrorCode::MalformedHeader: return "malformed header";
        case NiftiErrorCode::WrongMagic: return "wrong magic";
        case NiftiErrorCode::UnsupportedDatatype: return "unsupported datatype";
        case NiftiErrorCode::CompressedStream: return "compressed stream";
        case NiftiErrorCode::TooManyDimensions: return "too many dimensions";
        case NiftiErrorCode::TruncatedPayload: return "truncated payload";
        case NiftiErrorCode::ValueOutOfRange: return "value out of range";
    }
    return "unknown";
}

namespace {

// Byte offsets within the NIfTI-1 header.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffMagic = 344;

std::size_t bytes_per_voxel(NiftiDatatype t) {
    switch (t) {
        case NiftiDatatype::UInt8: return 1;
        case NiftiDatatype::Int16: return 2;
        case NiftiDatatype::Float32: return 4;
    }
    return 0;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

}  // namespace

NiftiHeaderSubset parse_nifti_header(std::span<const std::uint8_t> bytes) {
    if (is_gzip(bytes)) {
        throw NiftiError(NiftiErrorCode::CompressedStream,
                         "gzip stream detected; decompress before reading");
    }
    if (bytes.size() < kNiftiHeaderSize) {
        throw NiftiError(NiftiErrorCode::MalformedHeader, "file shorter than 348-byte header");
    }

    NiftiHeaderSubset h;
    const std::int32_t le_size = load<std::int32_t>(bytes, kOffSizeofHdr, false);
    const std::int32_t be_size = load<std::int32_t>(bytes, kOffSizeofHdr, true);
    if (le_size == static_cast<std::int32_t>(kNiftiHeaderSize)) {
        h.big_endian = false;
    } else if (be_size == static_cast<std::int32_t>(kNiftiHeaderSize)) {
        h.big_endian = true;
    } else {
        throw NiftiError(NiftiErrorCode::MalformedHeader,
                         "sizeof_hdr is " + std::to_string(le_size) + ", expected 348");
    }
    const bool be = h.big_endian;

    if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
        throw NiftiError(NiftiErrorCode::WrongMagic, "expected single-file \"n+1\" magic");
    }

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(bytes, kOffDim + 2 * i, be);
    if (dim[0] < 1 || dim[0] > 7) {
        throw NiftiError(NiftiErrorCode::MalformedHeader,
                         "dim[0] = " + std::to_string(dim[0]) + " outside 1..7");
    }
    for (int i = 1; i <= dim[0]; ++i) {
        if (dim[static_cast<std::size_t>(i)] < 1) {
            throw NiftiError(NiftiErrorCode::MalformedHeader, "non-positive dimension");
        }
    }
    for (int i = 4; i <= dim[0]; ++i) {
        if (dim[static_cast<std::size_t>(i)] != 1) {
            throw NiftiError(NiftiErrorCode::TooManyDimensions,
                             "axis " + std::to_string(i) + " has extent " +
                                 std::to_string(dim[static_cast<std::size_t>(i)]));
        }
    }
    for (std::size_t i = 0; i < 3; ++i) {
        const int axis = static_cast<int>(i) + 1;
        h.dims[i] = axis <= dim[0] ? static_cast<std::size_t>(dim[i + 1]) : 1;
    }

    const std::int16_t datatype = load<std::int16_t>(bytes, kOffDatatype, be);
    switch (datatype) {
        case 2: h.datatype = NiftiDatatype::UInt8; break;
        case 4: h.datatype = NiftiDatatype::Int16; break;
        case 16: h.datatype = NiftiDatatype::Float32; break;
        default:
            throw NiftiError(NiftiErrorCode::UnsupportedDatatype,
                             "datatype code " + std::to_string(datatype));
    }
    const std::int16_t bitpix = load<std::int16_t>(bytes, kOffBitpix, be);
    if (static_cast<std::size_t>(bitpix) != 8 * bytes_per_voxel(h.datatype)) {
        throw NiftiError(NiftiErrorCode::MalformedHeader,
                         "bitpix " + std::to_string(bitpix) + " inconsistent with datatype");
    }

    for (std::size_t i = 0; i < 3; ++i) {
        const float p = load<float>(bytes, kOffPixdim + 4 * (i + 1), be);
        // Axes beyond dim[0] may carry a zero pixdim; treat those as unit spacing.
        const bool present = static_cast<int>(i) + 1 <= dim[0];
        if (!present && (p == 0.0f || !std::isfinite(p))) {
            h.pixdim[i] = 1.0;
            continue;
        }
        if (!std::isfinite(p) || p <= 0.0f) {
            throw NiftiError(NiftiErrorCode::MalformedHeader,
                             "pixdim[" + std::to_string(i + 1) + "] must be positive");
        }
        h.pixdim[i] = static_cast<double>(p);
    }

    const float vox_offset = load<float>(bytes, kOffVoxOffset, be);
    if (!std::isfinite(vox_offset) || vox_offset < 352.0f ||
        vox_offset != std::floor(vox_offset)) {
        throw NiftiError(NiftiErrorCode::MalformedHeader, "vox_offset must be an integer >= 352");
    }
    h.vox_offset = static_cast<std::size_t>(vox_offset);

    const float slope = load<float>(bytes, kOffSclSlope, be);
    const float inter = load<float>(bytes, kOffSclInter, be);
    h.scl_slope = std::isfinite(slope) ? slope : 0.0;
    h.scl_inter = std::isfinite(inter) ? inter : 0.0;
    return h;
}

Volume3D decode_nifti(std::span<const std::uint8_t> bytes) {
    const NiftiHeaderSubset h = parse_nifti_header(bytes);
    Grid grid{h.dims, h.pixdim};
    const std::size_t n = grid.voxel_count();
    const std::size_t bpv = bytes_per_voxel(h.datatype);
    if (bytes.size() < h.vox_offset || bytes.size() - h.vox_offset < n * bpv) {
        throw NiftiError(NiftiErrorCode::TruncatedPayload,
                         "expected " + std::to_string(n * bpv) + " payload bytes");
    }

    const bool scaled = h.scl_slope != 0.0;
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = h.vox_offset + i * bpv;
        double raw = 0.0;
        switch (h.datatype) {
            case NiftiDatatype::UInt8: raw = bytes[off]; break;
            case NiftiDatatype::Int16: raw = load<std::int16_t>(bytes, off, h.big_endian); break;
            case NiftiDatatype::Float32: {
                const float f = load<float>(bytes, off, h.big_endian);
                data[i] = scaled ? static_cast<float>(h.scl_slope * f + h.scl_inter) : f;
                continue;
            }
        }
        data[i] = static_cast<float>(scaled ? h.scl_slope * raw + h.scl_inter : raw);
    }
    return Volume3D(grid, std::move(data));
}

std::vector<std::uint8_t> encode_nifti(const Volume3D& v, NiftiDatatype datatype) {
    const std::size_t bpv = bytes_per_voxel(datatype);
    if (bpv == 0) {
        throw NiftiError(NiftiErrorCode::UnsupportedDatatype, "cannot encode datatype");
    }
    std::vector<std::uint8_t> out(352 + v.size() * bpv, 0);
    std::span<std::uint8_t> buf(out);

    store_le<std::int32_t>(buf, kOffSizeofHdr, static_cast<std::int32_t>(kNiftiHeaderSize));
    store_le<std::int16_t>(buf, kOffDim, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        if (v.dims()[i] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max())) {
            throw NiftiError(NiftiErrorCode::ValueOutOfRange, "dimension exceeds int16 range");
        }
        store_le<std::int16_t>(buf, kOffDim + 2 * (i + 1), static_cast<std::int16_t>(v.dims()[i]));
    }
    for (std::size_t i = 4; i < 8; ++i) store_le<std::int16_t>(buf, kOffDim + 2 * i, 1);
    store_le<std::int16_t>(buf, kOffDatatype, static_cast<std::int16_t>(datatype));
    store_le<std::int16_t>(buf, kOffBitpix, static_cast<std::int16_t>(8 * bpv));
    store_le<float>(buf, kOffPixdim, 1.0f);  // qfac
    for (std::size_t i = 0; i < 3; ++i) {
        store_le<float>(buf, kOffPixdim + 4 * (i + 1), static_cast<float>(v.spacing()[i]));
    }
    store_le<float>(buf, kOffVoxOffset, 352.0f);
    store_le<float>(buf, kOffSclSlope, 0.0f);
    store_le<float>(buf, kOffSclInter, 0.0f);
    store_le<std::int16_t>(buf, kOffQformCode, 0);
    store_le<std::int16_t>(buf, kOffSformCode, 0);
    std::memcpy(out.data() + kOffMagic, "n+1\0", 4);

    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t off = 352 + i * bpv;
        const float value = v[i];
        switch (datatype) {
            case NiftiDatatype::Float32: store_le<float>(buf, off, value); break;
            case NiftiDatatype::UInt8:
            case NiftiDatatype::Int16: {
                const double lo = datatype == NiftiDatatype::UInt8 ? 0.0 : -32768.0;
                const double hi = datatype == NiftiDatatype::UInt8 ? 255.0 : 32767.0;
                if (!std::isfinite(value) || value < lo || value > hi) {
                    throw NiftiError(NiftiErrorCode::ValueOutOfRange,
                                     "value " + std::to_string(value) + " at voxel " +
                                         std::to_string(i) + " does not fit the integer datatype");
                }
                if (value != std::nearbyint(value)) {
                    throw NiftiError(NiftiErrorCode::ValueOutOfRange,
                                     "non-integral value " + std::to_string(value) +
                                         " for integer datatype");
                }
                if (datatype == NiftiDatatype::UInt8) {
                    buf[off] = static_cast<std::uint8_t>(value);
                } else {
                    store_le<std::int16_t>(buf, off, static_cast<std::int16_t>(value));
                }
                break;
            }
        }
    }
    return out;
}

Volume3D read_nifti(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const IoError& e) {
        throw NiftiError(NiftiErrorCode::Io, e.what());
    }
    return decode_nifti(bytes);
}

void write_nifti(const Volume3D& v, const std::filesystem::path& path, NiftiDatatype datatype) {
    const auto bytes = encode_nifti(v, datatype);
    try {
        write_file_bytes(path, bytes);
    } catch (const IoError& e) {
        throw NiftiError(NiftiErrorCode::Io, e.what());
    }
}

void write_nifti(const BinaryMask3D& m, const std::filesystem::path& path) {
    std::vector<float> values(m.storage().begin(), m.storage().end());
    write_nifti(Volume3D(m.grid(), std::move(values)), path, NiftiDatatype::UInt8);
}

BinaryMask3D read_nifti_mask(const std::filesystem::path& path) {
    const Volume3D v = read_nifti(path);
    std::vector<std::uint8_t> bits(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0f && v[i] != 1.0f) {
            throw NiftiError(NiftiErrorCode::ValueOutOfRange,
                             path.string() + " is not a binary mask");
        }
        bits[i] = v[i] == 1.0f ? 1 : 0;
    }
    return BinaryMask3D(v.grid(), std::move(bits));
}

}  // namespace wmhseg
