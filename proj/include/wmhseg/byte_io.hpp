#pragma once

// Little helpers for explicit-endian binary encoding and whole-file I/O.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace wmhseg {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
T load(std::span<const std::uint8_t> bytes, std::size_t offset, bool big_endian) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (offset + sizeof(T) > bytes.size()) {
        throw std::out_of_range("load past end of buffer");
    }
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
    const bool host_big = std::endian::native == std::endian::big;
    if (host_big != big_endian) std::reverse(raw.begin(), raw.end());
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
}

template <typename T>
T load_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return load<T>(bytes, offset, false);
}

template <typename T>
void store_le(std::span<std::uint8_t> bytes, std::size_t offset, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (offset + sizeof(T) > bytes.size()) {
        throw std::out_of_range("store past end of buffer");
    }
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    std::memcpy(bytes.data() + offset, raw.data(), sizeof(T));
}

/// Appends little-endian encodings to a growing buffer.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        const std::size_t off = buf_.size();
        buf_.resize(off + sizeof(T));
        store_le<T>(buf_, off, value);
    }
    void put_bytes(std::span<const std::uint8_t> bytes) {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }
    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t>& bytes() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Sequential little-endian reader; throws IoError on truncation.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        require(sizeof(T));
        T v = load_le<T>(bytes_, pos_);
        pos_ += sizeof(T);
        return v;
    }
    std::span<const std::uint8_t> get_bytes(std::size_t n) {
        require(n);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        auto raw = get_bytes(n);
        return std::string(raw.begin(), raw.end());
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void require(std::size_t n) const {
        if (n > bytes_.size() - pos_) throw IoError("unexpected end of data");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace wmhseg
