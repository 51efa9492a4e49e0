#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wmhseg/volume.hpp"

namespace wmhseg {

/// Neighborhoods. C6/C18/C26 are 3-D; C4/C8 stay inside an axial plane.
enum class Connectivity { C4 = 4, C6 = 6, C8 = 8, C18 = 18, C26 = 26 };

Connectivity connectivity_from_int(int n);
int to_int(Connectivity c);

/// Neighbor offsets (dx, dy, dz) of a connectivity, excluding the origin.
std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c);

/// Component labels 1..count; 0 is background.
struct LabelVolume {
    Grid grid;
    std::vector<std::uint32_t> labels;
    std::size_t count = 0;

    /// Voxel count of each component; index 0 holds label 1.
    std::vector<std::size_t> sizes() const;
    BinaryMask3D component_mask(std::uint32_t label) const;
};

/// Union-find labelling. Labels are assigned in the order in which a
/// component's first voxel appears in the x-fastest index scan.
LabelVolume connected_components(const BinaryMask3D& m, Connectivity c);

/// The component with the most voxels; ties go to the lower label. Throws
/// std::invalid_argument on an empty mask.
BinaryMask3D largest_component(const BinaryMask3D& m, Connectivity c);

/// radius rounds of dilation with the neighborhood of c; radius 0 copies m.
BinaryMask3D dilate(const BinaryMask3D& m, std::size_t radius, Connectivity c);

using Voxel = std::array<std::size_t, 3>;

/// Foreground voxels with a 6-neighbour outside the mask or off the grid,
/// in index order.
std::vector<Voxel> border_voxels(const BinaryMask3D& m);
BinaryMask3D border_mask(const BinaryMask3D& m);

}  // namespace wmhseg
