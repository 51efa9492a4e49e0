#include "wmhseg/checkpoint.hpp"

#include <array>
#include <cstring>

#include "wmhseg/byte_io.hpp"

namespace wmhseg {

namespace {
constexpr std::array<std::uint8_t, 8> kMagic{'W', 'M', 'H', 'C', 'K', 'P', 'T', 0};
}

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
    ByteWriter w;
    w.put_bytes(kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put_string(net.spec().to_json());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net.parameters().size()));
    for (const auto& p : net.parameters()) {
        w.put_string(p.id);
        const Shape4& s = p.value.shape();
        for (std::size_t d : {s.n, s.c, s.h, s.w}) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (double v : p.value.values()) w.put<double>(v);
    }
    return std::move(w.bytes());
}

Network decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.get_bytes(kMagic.size());
    if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
        throw IoError("not a checkpoint file");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const NetworkSpec spec = NetworkSpec::from_json(r.get_string());
    const auto count = r.get<std::uint32_t>();
    ParameterSet params;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string id = r.get_string();
        Shape4 s;
        s.n = r.get<std::uint32_t>();
        s.c = r.get<std::uint32_t>();
        s.h = r.get<std::uint32_t>();
        s.w = r.get<std::uint32_t>();
        Parameter& p = params.add(std::move(id), s);
        for (std::size_t k = 0; k < p.value.size(); ++k) p.value[k] = r.get<double>();
    }
    if (r.remaining() != 0) throw IoError("trailing bytes after checkpoint payload");
    return Network(spec, std::move(params));
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    write_file_bytes(path, encode_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file_bytes(path));
}

}  // namespace wmhseg
