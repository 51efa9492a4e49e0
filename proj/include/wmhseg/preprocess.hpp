#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wmhseg/random.hpp"
#include "wmhseg/volume.hpp"

namespace wmhseg {

class PreprocessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (v - min) / (max - min) with min and max taken under the mask, then
/// clamped to [0, 1] everywhere. Throws PreprocessError when the mask is
/// empty or the masked intensities are constant.
Volume3D normalize_to_mask(const Volume3D& v, const BinaryMask3D& mask);

/// Same rescaling with min and max over the whole volume.
Volume3D normalize_min_max(const Volume3D& v);

/// One axial training or inference sample. The image is stored channel-major,
/// each channel row-major with height = ny rows and width = nx columns.
struct SliceSample {
    std::size_t channels = 1;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> image;
    std::vector<std::uint8_t> label;

    bool operator==(const SliceSample&) const = default;
};

/// Builds one sample per axial plane from co-registered channel volumes.
std::vector<SliceSample> make_slice_samples(const std::vector<const Volume3D*>& channels,
                                            const BinaryMask3D& label);

/// Element e of the dihedral group of order 8: rotate by (e % 4) * 90 degrees
/// counter-clockwise, then mirror columns when e >= 4.
SliceSample apply_dihedral(const SliceSample& s, unsigned element);

/// Applies one uniformly drawn dihedral element to image channels and label
/// alike. Non-square slices draw only from the shape-preserving elements
/// {identity, 180 rotation, horizontal mirror, vertical mirror}.
SliceSample augment(const SliceSample& s, Rng& rng);

}  // namespace wmhseg
