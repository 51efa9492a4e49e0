#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmhseg/volume.hpp"

namespace wmhseg {

class PhantomError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tissue means for one contrast.
struct TissueIntensities {
    double background = 0.0;
    double gray_matter = 0.0;
    double white_matter = 0.0;
    double lesion = 0.0;
    double confounder = 0.0;

    bool operator==(const TissueIntensities&) const = default;
};

/// Synthetic head: a brain ellipsoid, an inner white-matter ellipsoid,
/// spherical lesions inside white matter and lesion-like confounders in
/// gray matter. Radii are in voxels along x and y; along z a sphere keeps
/// its physical size, so its extent in slices shrinks by sx / sz.
struct PhantomConfig {
    std::array<std::size_t, 3> dims{64, 64, 8};
    std::array<double, 3> spacing{1.0, 1.0, 3.0};
    std::array<double, 3> brain_radii{28.0, 25.0, 7.0};
    std::array<double, 3> wm_radii{19.0, 15.0, 6.0};
    /// Per-case uniform jitter: centre offset in voxels, radius scale fraction.
    double center_jitter = 2.0;
    double radius_jitter = 0.1;
    std::size_t min_lesions = 2;
    std::size_t max_lesions = 5;
    double min_lesion_radius = 3.0;
    double max_lesion_radius = 5.0;
    std::size_t min_confounders = 1;
    std::size_t max_confounders = 3;
    double min_confounder_radius = 2.0;
    double max_confounder_radius = 3.0;
    /// Confounders stay outside the white matter dilated by this many voxels.
    std::size_t confounder_margin = 3;
    bool confounders = true;
    TissueIntensities t1{0.0, 0.45, 0.8, 0.65, 0.65};
    TissueIntensities flair{0.0, 0.45, 0.35, 0.85, 0.85};
    double noise_std = 0.02;
    std::size_t max_attempts = 1000;

    void validate() const;
    std::string to_json() const;
    static PhantomConfig from_json(const std::string& text);

    bool operator==(const PhantomConfig&) const = default;
};

struct PhantomCase {
    std::string id;
    std::uint64_t seed = 0;
    Volume3D t1;
    Volume3D flair;
    BinaryMask3D wm_truth;
    BinaryMask3D wmh_truth;
    std::size_t lesion_count = 0;
    std::size_t confounder_count = 0;
};

/// Deterministic in (cfg, seed). Throws PhantomError when lesions or
/// confounders cannot be placed within cfg.max_attempts draws.
PhantomCase generate_case(const PhantomConfig& cfg, std::uint64_t seed);

/// n cases named case_000, case_001, ... whose seeds are drawn from a stream
/// seeded by `seed`.
std::vector<PhantomCase> generate_dataset(const PhantomConfig& cfg, std::size_t n_cases, std::uint64_t seed);

/// FNV-1a over ids, seeds and voxel bytes of every volume, in order.
std::uint64_t dataset_hash(const std::vector<PhantomCase>& cases);

/// Writes <id>_t1.nii, <id>_flair.nii, <id>_wm.nii, <id>_wmh.nii per case plus
/// manifest.json (seed, case list, config echo).
void write_dataset(const std::filesystem::path& dir, const std::vector<PhantomCase>& cases,
                   const PhantomConfig& cfg, std::uint64_t seed);

/// Reads a directory produced by write_dataset.
std::vector<PhantomCase> read_dataset(const std::filesystem::path& dir);

}  // namespace wmhseg
