#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace wmhseg {

/// Voxel grid shared by every volume and mask: counts plus mm spacing.
/// Data is addressed x-fastest: index = x + nx * (y + ny * z).
struct Grid {
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }
    double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }

    /// Throws std::invalid_argument when a count is zero or a spacing is not
    /// strictly positive and finite.
    void validate() const;

    bool same_dims(const Grid& other) const { return dims == other.dims; }
    bool operator==(const Grid&) const = default;
};

template <typename T>
class Image3D {
public:
    using value_type = T;

    Image3D() = default;
    explicit Image3D(Grid grid, T fill = T{}) : grid_(grid) {
        grid_.validate();
        data_.assign(grid_.voxel_count(), fill);
    }
    Image3D(Grid grid, std::vector<T> data) : grid_(grid), data_(std::move(data)) {
        grid_.validate();
        if (data_.size() != grid_.voxel_count()) {
            throw std::invalid_argument("volume data length does not match dims");
        }
    }

    const Grid& grid() const { return grid_; }
    const std::array<std::size_t, 3>& dims() const { return grid_.dims; }
    const std::array<double, 3>& spacing() const { return grid_.spacing; }
    void set_spacing(const std::array<double, 3>& s) {
        Grid g = grid_;
        g.spacing = s;
        g.validate();
        grid_ = g;
    }

    std::size_t size() const { return data_.size(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    T& at(std::size_t x, std::size_t y, std::size_t z) { return data_[grid_.index(x, y, z)]; }
    const T& at(std::size_t x, std::size_t y, std::size_t z) const {
        return data_[grid_.index(x, y, z)];
    }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    bool operator==(const Image3D&) const = default;

private:
    Grid grid_;
    std::vector<T> data_;
};

/// Scalar intensity volume (T1, FLAIR, probability maps).
using Volume3D = Image3D<float>;

/// Mask whose voxels are exactly 0 or 1.
class BinaryMask3D : public Image3D<std::uint8_t> {
public:
    BinaryMask3D() = default;
    explicit BinaryMask3D(Grid grid) : Image3D(grid, 0) {}
    /// Throws std::invalid_argument when a value is not 0 or 1.
    BinaryMask3D(Grid grid, std::vector<std::uint8_t> data);

    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }
};

/// Logical ops on masks with identical dims.
BinaryMask3D mask_and(const BinaryMask3D& a, const BinaryMask3D& b);
BinaryMask3D mask_or(const BinaryMask3D& a, const BinaryMask3D& b);
bool mask_subset(const BinaryMask3D& inner, const BinaryMask3D& outer);
BinaryMask3D threshold(const Volume3D& v, double level);

/// One axial plane: nx * ny values, x fastest.
template <typename T>
struct Plane {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<T> data;

    bool operator==(const Plane&) const = default;
};

template <typename T>
std::vector<Plane<T>> axial_slices(const Image3D<T>& v) {
    const auto [nx, ny, nz] = v.dims();
    std::vector<Plane<T>> planes;
    planes.reserve(nz);
    const std::size_t plane_size = nx * ny;
    for (std::size_t z = 0; z < nz; ++z) {
        auto first = v.storage().begin() + static_cast<std::ptrdiff_t>(z * plane_size);
        planes.push_back(Plane<T>{nx, ny, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(plane_size))});
    }
    return planes;
}

template <typename T>
Image3D<T> stack_slices(std::span<const Plane<T>> planes, const std::array<double, 3>& spacing) {
    if (planes.empty()) {
        throw std::invalid_argument("stack_slices: no planes");
    }
    const std::size_t nx = planes.front().nx;
    const std::size_t ny = planes.front().ny;
    Grid grid{{nx, ny, planes.size()}, spacing};
    std::vector<T> data;
    data.reserve(grid.voxel_count());
    for (const auto& p : planes) {
        if (p.nx != nx || p.ny != ny || p.data.size() != nx * ny) {
            throw std::invalid_argument("stack_slices: inconsistent plane dims");
        }
        data.insert(data.end(), p.data.begin(), p.data.end());
    }
    return Image3D<T>(grid, std::move(data));
}

template <typename T>
Image3D<T> stack_slices(const std::vector<Plane<T>>& planes, const std::array<double, 3>& spacing) {
    return stack_slices(std::span<const Plane<T>>(planes), spacing);
}

inline BinaryMask3D to_mask(Image3D<std::uint8_t> v) {
    return BinaryMask3D(v.grid(), std::move(v.storage()));
}

}  // namespace wmhseg
