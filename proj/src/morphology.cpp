#include "wmhseg/morphology.hpp"

#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wmhseg {

Connectivity connectivity_from_int(int n) {
    switch (n) {
        case 4: return Connectivity::C4;
        case 6: return Connectivity::C6;
        case 8: return Connectivity::C8;
        case 18: return Connectivity::C18;
        case 26: return Connectivity::C26;
        default: break;
    }
    throw std::invalid_argument("connectivity must be one of 4, 6, 8, 18, 26; got " + std::to_string(n));
}

int to_int(Connectivity c) { return static_cast<int>(c); }

std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c) {
    std::vector<std::array<int, 3>> out;
    const bool planar = c == Connectivity::C4 || c == Connectivity::C8;
    for (int dz = -1; dz <= 1; ++dz) {
        if (planar && dz != 0) continue;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int order = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (order == 0) continue;
                const bool keep = (c == Connectivity::C4 || c == Connectivity::C6) ? order == 1
                                  : c == Connectivity::C18                       ? order <= 2
                                                                                 : true;
                if (keep) out.push_back({dx, dy, dz});
            }
        }
    }
    return out;
}

namespace {

struct DisjointSet {
    std::vector<std::uint32_t> parent;

    std::uint32_t find(std::uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a;
        else parent[a] = b;
    }
};

bool in_grid(const Grid& g, std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t z) {
    return x >= 0 && y >= 0 && z >= 0 && x < static_cast<std::ptrdiff_t>(g.dims[0]) &&
           y < static_cast<std::ptrdiff_t>(g.dims[1]) && z < static_cast<std::ptrdiff_t>(g.dims[2]);
}

}  // namespace

std::vector<std::size_t> LabelVolume::sizes() const {
    std::vector<std::size_t> s(count, 0);
    for (std::uint32_t l : labels) {
        if (l != 0) ++s[l - 1];
    }
    return s;
}

BinaryMask3D LabelVolume::component_mask(std::uint32_t label) const {
    BinaryMask3D m(grid);
    for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == label ? 1 : 0;
    return m;
}

LabelVolume connected_components(const BinaryMask3D& m, Connectivity c) {
    const Grid& g = m.grid();
    const auto [nx, ny, nz] = g.dims;
    if (m.size() >= std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("connected_components: volume too large");
    }

    // Only neighbours earlier in scan order are needed for the union pass.
    std::vector<std::array<int, 3>> back;
    for (const auto& o : neighbor_offsets(c)) {
        if (o[2] < 0 || (o[2] == 0 && (o[1] < 0 || (o[1] == 0 && o[0] < 0)))) back.push_back(o);
    }

    DisjointSet ds;
    ds.parent.resize(m.size());
    std::iota(ds.parent.begin(), ds.parent.end(), 0u);
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = g.index(x, y, z);
                if (!m[i]) continue;
                for (const auto& o : back) {
                    const auto qx = static_cast<std::ptrdiff_t>(x) + o[0];
                    const auto qy = static_cast<std::ptrdiff_t>(y) + o[1];
                    const auto qz = static_cast<std::ptrdiff_t>(z) + o[2];
                    if (!in_grid(g, qx, qy, qz)) continue;
                    const std::size_t j = g.index(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy),
                                                  static_cast<std::size_t>(qz));
                    if (m[j]) ds.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
                }
            }
        }
    }

    LabelVolume out;
    out.grid = g;
    out.labels.assign(m.size(), 0);
    std::vector<std::uint32_t> root_label(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        const std::uint32_t r = ds.find(static_cast<std::uint32_t>(i));
        if (root_label[r] == 0) root_label[r] = static_cast<std::uint32_t>(++out.count);
        out.labels[i] = root_label[r];
    }
    return out;
}

BinaryMask3D largest_component(const BinaryMask3D& m, Connectivity c) {
    const LabelVolume lv = connected_components(m, c);
    if (lv.count == 0) throw std::invalid_argument("largest_component: empty mask");
    const auto sizes = lv.sizes();
    std::size_t best = 0;
    for (std::size_t k = 1; k < sizes.size(); ++k) {
        if (sizes[k] > sizes[best]) best = k;
    }
    return lv.component_mask(static_cast<std::uint32_t>(best + 1));
}

BinaryMask3D dilate(const BinaryMask3D& m, std::size_t radius, Connectivity c) {
    const Grid& g = m.grid();
    const auto [nx, ny, nz] = g.dims;
    const auto offsets = neighbor_offsets(c);
    BinaryMask3D cur = m;
    for (std::size_t r = 0; r < radius; ++r) {
        BinaryMask3D next = cur;
        for (std::size_t z = 0; z < nz; ++z) {
            for (std::size_t y = 0; y < ny; ++y) {
                for (std::size_t x = 0; x < nx; ++x) {
                    if (!cur[g.index(x, y, z)]) continue;
                    for (const auto& o : offsets) {
                        const auto qx = static_cast<std::ptrdiff_t>(x) + o[0];
                        const auto qy = static_cast<std::ptrdiff_t>(y) + o[1];
                        const auto qz = static_cast<std::ptrdiff_t>(z) + o[2];
                        if (!in_grid(g, qx, qy, qz)) continue;
                        next[g.index(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy),
                                     static_cast<std::size_t>(qz))] = 1;
                    }
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

std::vector<Voxel> border_voxels(const BinaryMask3D& m) {
    const Grid& g = m.grid();
    const auto [nx, ny, nz] = g.dims;
    const auto faces = neighbor_offsets(Connectivity::C6);
    std::vector<Voxel> out;
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                if (!m[g.index(x, y, z)]) continue;
                for (const auto& o : faces) {
                    const auto qx = static_cast<std::ptrdiff_t>(x) + o[0];
                    const auto qy = static_cast<std::ptrdiff_t>(y) + o[1];
                    const auto qz = static_cast<std::ptrdiff_t>(z) + o[2];
                    if (!in_grid(g, qx, qy, qz) ||
                        !m[g.index(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy),
                                   static_cast<std::size_t>(qz))]) {
                        out.push_back({x, y, z});
                        break;
                    }
                }
            }
        }
    }
    return out;
}

BinaryMask3D border_mask(const BinaryMask3D& m) {
    BinaryMask3D out(m.grid());
    for (const auto& v : border_voxels(m)) out.at(v[0], v[1], v[2]) = 1;
    return out;
}

}  // namespace wmhseg
