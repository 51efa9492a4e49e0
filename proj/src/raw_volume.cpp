#include "wmhseg/raw_volume.hpp"

#include <array>
#include <cstring>

#include "wmhseg/byte_io.hpp"

namespace wmhseg {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic{'W', 'M', 'H', 'V', 'O', 'L', 0, 1};
constexpr std::uint32_t kDtypeU8 = 1;
constexpr std::uint32_t kDtypeF32 = 3;

void put_header(ByteWriter& w, const Grid& g, std::uint32_t dtype) {
    w.put_bytes(kMagic);
    w.put<std::uint32_t>(dtype);
    for (auto d : g.dims) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (auto s : g.spacing) w.put<double>(s);
}

}  // namespace

std::vector<std::uint8_t> encode_vol(const Volume3D& v) {
    ByteWriter w;
    put_header(w, v.grid(), kDtypeF32);
    for (float f : v.storage()) w.put<float>(f);
    return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_vol(const BinaryMask3D& m) {
    ByteWriter w;
    put_header(w, m.grid(), kDtypeU8);
    w.put_bytes(m.storage());
    return std::move(w.bytes());
}

Volume3D decode_vol(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.get_bytes(kMagic.size());
    if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
        throw IoError("not a .vol file");
    }
    const auto dtype = r.get<std::uint32_t>();
    Grid g;
    for (auto& d : g.dims) d = r.get<std::uint32_t>();
    for (auto& s : g.spacing) s = r.get<double>();
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string(".vol header: ") + e.what());
    }
    std::vector<float> data(g.voxel_count());
    if (dtype == kDtypeF32) {
        for (auto& f : data) f = r.get<float>();
    } else if (dtype == kDtypeU8) {
        for (auto& f : data) f = r.get<std::uint8_t>();
    } else {
        throw IoError(".vol: unknown dtype " + std::to_string(dtype));
    }
    return Volume3D(g, std::move(data));
}

void write_vol(const Volume3D& v, const std::filesystem::path& path) {
    write_file_bytes(path, encode_vol(v));
}

void write_vol(const BinaryMask3D& m, const std::filesystem::path& path) {
    write_file_bytes(path, encode_vol(m));
}

Volume3D read_vol(const std::filesystem::path& path) { return decode_vol(read_file_bytes(path)); }

}  // namespace wmhseg
