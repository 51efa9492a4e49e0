#include "wmhseg/preprocess.hpp"

#include <algorithm>
#include <limits>

namespace wmhseg {

namespace {

Volume3D rescale(const Volume3D& v, double lo, double hi) {
    if (!(hi > lo)) throw PreprocessError("degenerate intensity range");
    Volume3D out(v.grid());
    const double range = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = (static_cast<double>(v[i]) - lo) / range;
        out[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
    return out;
}

}  // namespace

Volume3D normalize_to_mask(const Volume3D& v, const BinaryMask3D& mask) {
    if (!v.grid().same_dims(mask.grid())) throw PreprocessError("volume and mask dims differ");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool any = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!mask[i]) continue;
        any = true;
        lo = std::min(lo, static_cast<double>(v[i]));
        hi = std::max(hi, static_cast<double>(v[i]));
    }
    if (!any) throw PreprocessError("empty mask");
    return rescale(v, lo, hi);
}

Volume3D normalize_min_max(const Volume3D& v) {
    const auto [lo, hi] = std::minmax_element(v.storage().begin(), v.storage().end());
    return rescale(v, *lo, *hi);
}

std::vector<SliceSample> make_slice_samples(const std::vector<const Volume3D*>& channels,
                                            const BinaryMask3D& label) {
    if (channels.empty()) throw std::invalid_argument("make_slice_samples: no channels");
    const auto [nx, ny, nz] = label.dims();
    for (const Volume3D* c : channels) {
        if (!c->grid().same_dims(label.grid())) {
            throw std::invalid_argument("make_slice_samples: channel dims differ from label");
        }
    }
    const std::size_t plane = nx * ny;
    std::vector<SliceSample> out(nz);
    for (std::size_t z = 0; z < nz; ++z) {
        SliceSample& s = out[z];
        s.channels = channels.size();
        s.height = ny;
        s.width = nx;
        s.image.resize(channels.size() * plane);
        for (std::size_t c = 0; c < channels.size(); ++c) {
            const auto& src = channels[c]->storage();
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(z * plane), plane,
                        s.image.begin() + static_cast<std::ptrdiff_t>(c * plane));
        }
        s.label.assign(label.storage().begin() + static_cast<std::ptrdiff_t>(z * plane),
                       label.storage().begin() + static_cast<std::ptrdiff_t>((z + 1) * plane));
    }
    return out;
}

SliceSample apply_dihedral(const SliceSample& s, unsigned element) {
    element %= 8;
    const unsigned turns = element % 4;
    const bool mirror = element >= 4;
    const std::size_t H = s.height, W = s.width;
    const bool swap = turns % 2 == 1;
    const std::size_t OH = swap ? W : H;
    const std::size_t OW = swap ? H : W;

    SliceSample out;
    out.channels = s.channels;
    out.height = OH;
    out.width = OW;
    out.image.resize(s.image.size());
    out.label.resize(s.label.size());

    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            // Counter-clockwise quarter turns.
            std::size_t oi = i, oj = j;
            switch (turns) {
                case 1: oi = W - 1 - j; oj = i; break;
                case 2: oi = H - 1 - i; oj = W - 1 - j; break;
                case 3: oi = j; oj = H - 1 - i; break;
                default: break;
            }
            if (mirror) oj = OW - 1 - oj;
            const std::size_t src = i * W + j;
            const std::size_t dst = oi * OW + oj;
            out.label[dst] = s.label[src];
            for (std::size_t c = 0; c < s.channels; ++c) {
                out.image[c * H * W + dst] = s.image[c * H * W + src];
            }
        }
    }
    return out;
}

SliceSample augment(const SliceSample& s, Rng& rng) {
    if (s.height == s.width) return apply_dihedral(s, static_cast<unsigned>(rng.below(8)));
    static constexpr unsigned kShapePreserving[4] = {0, 2, 4, 6};
    return apply_dihedral(s, kShapePreserving[rng.below(4)]);
}

}  // namespace wmhseg
