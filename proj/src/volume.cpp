#include "wmhseg/volume.hpp"

#include <algorithm>
#include <cmath>

namespace wmhseg {

void Grid::validate() const {
    for (std::size_t d : dims) {
        if (d == 0) {
            throw std::invalid_argument("grid dims must be positive");
        }
    }
    for (double s : spacing) {
        if (!(std::isfinite(s) && s > 0.0)) {
            throw std::invalid_argument("grid spacing must be positive and finite");
        }
    }
}

BinaryMask3D::BinaryMask3D(Grid grid, std::vector<std::uint8_t> data)
    : Image3D(grid, std::move(data)) {
    for (std::uint8_t v : storage()) {
        if (v > 1) {
            throw std::invalid_argument("binary mask values must be 0 or 1");
        }
    }
}

std::size_t BinaryMask3D::count() const {
    return static_cast<std::size_t>(std::count(storage().begin(), storage().end(), std::uint8_t{1}));
}

namespace {

void require_same_dims(const Grid& a, const Grid& b) {
    if (!a.same_dims(b)) {
        throw std::invalid_argument("mask dims differ");
    }
}

}  // namespace

BinaryMask3D mask_and(const BinaryMask3D& a, const BinaryMask3D& b) {
    require_same_dims(a.grid(), b.grid());
    BinaryMask3D out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & b[i];
    return out;
}

BinaryMask3D mask_or(const BinaryMask3D& a, const BinaryMask3D& b) {
    require_same_dims(a.grid(), b.grid());
    BinaryMask3D out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] | b[i];
    return out;
}

bool mask_subset(const BinaryMask3D& inner, const BinaryMask3D& outer) {
    require_same_dims(inner.grid(), outer.grid());
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] && !outer[i]) return false;
    }
    return true;
}

BinaryMask3D threshold(const Volume3D& v, double level) {
    BinaryMask3D out(v.grid());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > level ? 1 : 0;
    return out;
}

}  // namespace wmhseg
