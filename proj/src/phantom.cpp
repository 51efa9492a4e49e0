#include "wmhseg/phantom.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "wmhseg/byte_io.hpp"
#include "wmhseg/morphology.hpp"
#include "wmhseg/nifti.hpp"
#include "wmhseg/random.hpp"

namespace wmhseg {

namespace {

using nlohmann::json;

json intensities_json(const TissueIntensities& t) {
    return {{"background", t.background},
            {"gray_matter", t.gray_matter},
            {"white_matter", t.white_matter},
            {"lesion", t.lesion},
            {"confounder", t.confounder}};
}

TissueIntensities intensities_from(const json& j) {
    TissueIntensities t;
    t.background = j.at("background").get<double>();
    t.gray_matter = j.at("gray_matter").get<double>();
    t.white_matter = j.at("white_matter").get<double>();
    t.lesion = j.at("lesion").get<double>();
    t.confounder = j.at("confounder").get<double>();
    return t;
}

struct Ellipsoid {
    std::array<double, 3> center;
    std::array<double, 3> radii;

    bool contains(std::size_t x, std::size_t y, std::size_t z) const {
        const double u = (static_cast<double>(x) - center[0]) / radii[0];
        const double v = (static_cast<double>(y) - center[1]) / radii[1];
        const double w = (static_cast<double>(z) - center[2]) / radii[2];
        return u * u + v * v + w * w <= 1.0;
    }
};

// Voxels within physical radius r * sx of an integer centre.
std::vector<std::size_t> rasterize_sphere(const Grid& g, const std::array<std::size_t, 3>& c, double r) {
    const double radius_mm = r * g.spacing[0];
    std::array<long, 3> reach{};
    for (int a = 0; a < 3; ++a) reach[a] = static_cast<long>(std::floor(radius_mm / g.spacing[a]));
    std::vector<std::size_t> out;
    for (long dz = -reach[2]; dz <= reach[2]; ++dz) {
        for (long dy = -reach[1]; dy <= reach[1]; ++dy) {
            for (long dx = -reach[0]; dx <= reach[0]; ++dx) {
                const double px = static_cast<double>(dx) * g.spacing[0];
                const double py = static_cast<double>(dy) * g.spacing[1];
                const double pz = static_cast<double>(dz) * g.spacing[2];
                if (px * px + py * py + pz * pz > radius_mm * radius_mm) continue;
                const long x = static_cast<long>(c[0]) + dx;
                const long y = static_cast<long>(c[1]) + dy;
                const long z = static_cast<long>(c[2]) + dz;
                if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(g.dims[0]) ||
                    y >= static_cast<long>(g.dims[1]) || z >= static_cast<long>(g.dims[2])) {
                    return {};  // clipped by the grid: reject
                }
                out.push_back(g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                      static_cast<std::size_t>(z)));
            }
        }
    }
    return out;
}

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Places `count` spheres whose voxels all lie in `allowed` and which keep one
// voxel of clearance (26-neighbourhood) from each other.
std::vector<std::vector<std::size_t>> place_spheres(const Grid& g, const BinaryMask3D& allowed, std::size_t count,
                                                    double rmin, double rmax, std::size_t max_attempts,
                                                    Rng& rng, const char* what) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < allowed.size(); ++i) {
        if (allowed[i]) candidates.push_back(i);
    }
    std::vector<std::vector<std::size_t>> placed;
    BinaryMask3D blocked(g);
    std::size_t attempts = 0;
    while (placed.size() < count) {
        if (candidates.empty() || attempts++ >= max_attempts) {
            throw PhantomError(std::string("could not place ") + what + " " + std::to_string(placed.size() + 1) +
                               " of " + std::to_string(count) + " within " + std::to_string(max_attempts) +
                               " attempts");
        }
        const std::size_t idx = candidates[rng.below(candidates.size())];
        const double r = rng.uniform(rmin, rmax);
        const std::size_t nx = g.dims[0], ny = g.dims[1];
        const std::array<std::size_t, 3> c{idx % nx, (idx / nx) % ny, idx / (nx * ny)};
        auto voxels = rasterize_sphere(g, c, r);
        if (voxels.empty()) continue;
        bool ok = true;
        for (std::size_t v : voxels) {
            if (!allowed[v] || blocked[v]) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        BinaryMask3D self(g);
        for (std::size_t v : voxels) self[v] = 1;
        const BinaryMask3D halo = dilate(self, 1, Connectivity::C26);
        for (std::size_t i = 0; i < halo.size(); ++i) {
            if (halo[i]) blocked[i] = 1;
        }
        placed.push_back(std::move(voxels));
    }
    return placed;
}

}  // namespace

void PhantomConfig::validate() const {
    Grid{dims, spacing}.validate();
    for (int a = 0; a < 3; ++a) {
        if (!(brain_radii[a] > 0.0) || !(wm_radii[a] > 0.0)) throw std::invalid_argument("phantom radii must be positive");
        if (wm_radii[a] >= brain_radii[a]) throw std::invalid_argument("white matter must lie inside the brain");
    }
    if (min_lesions > max_lesions) throw std::invalid_argument("min_lesions exceeds max_lesions");
    if (min_confounders > max_confounders) throw std::invalid_argument("min_confounders exceeds max_confounders");
    if (!(min_lesion_radius > 0.0) || min_lesion_radius > max_lesion_radius) {
        throw std::invalid_argument("lesion radius range invalid");
    }
    if (!(min_confounder_radius > 0.0) || min_confounder_radius > max_confounder_radius) {
        throw std::invalid_argument("confounder radius range invalid");
    }
    if (max_lesion_radius >= std::min(wm_radii[0], wm_radii[1])) {
        throw std::invalid_argument("lesion radius does not fit inside the white matter");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw std::invalid_argument("noise_std must be >= 0");
    if (!(center_jitter >= 0.0) || !(radius_jitter >= 0.0 && radius_jitter < 0.5)) {
        throw std::invalid_argument("jitter out of range");
    }
    if (max_attempts == 0) throw std::invalid_argument("max_attempts must be positive");
}

std::string PhantomConfig::to_json() const {
    json j{{"dims", dims},
           {"spacing", spacing},
           {"brain_radii", brain_radii},
           {"wm_radii", wm_radii},
           {"center_jitter", center_jitter},
           {"radius_jitter", radius_jitter},
           {"min_lesions", min_lesions},
           {"max_lesions", max_lesions},
           {"min_lesion_radius", min_lesion_radius},
           {"max_lesion_radius", max_lesion_radius},
           {"min_confounders", min_confounders},
           {"max_confounders", max_confounders},
           {"min_confounder_radius", min_confounder_radius},
           {"max_confounder_radius", max_confounder_radius},
           {"confounder_margin", confounder_margin},
           {"confounders", confounders},
           {"t1", intensities_json(t1)},
           {"flair", intensities_json(flair)},
           {"noise_std", noise_std},
           {"max_attempts", max_attempts}};
    return j.dump(2);
}

PhantomConfig PhantomConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    PhantomConfig c;
    auto opt = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("dims", c.dims);
    opt("spacing", c.spacing);
    opt("brain_radii", c.brain_radii);
    opt("wm_radii", c.wm_radii);
    opt("center_jitter", c.center_jitter);
    opt("radius_jitter", c.radius_jitter);
    opt("min_lesions", c.min_lesions);
    opt("max_lesions", c.max_lesions);
    opt("min_lesion_radius", c.min_lesion_radius);
    opt("max_lesion_radius", c.max_lesion_radius);
    opt("min_confounders", c.min_confounders);
    opt("max_confounders", c.max_confounders);
    opt("min_confounder_radius", c.min_confounder_radius);
    opt("max_confounder_radius", c.max_confounder_radius);
    opt("confounder_margin", c.confounder_margin);
    opt("confounders", c.confounders);
    if (j.contains("t1")) c.t1 = intensities_from(j.at("t1"));
    if (j.contains("flair")) c.flair = intensities_from(j.at("flair"));
    opt("noise_std", c.noise_std);
    opt("max_attempts", c.max_attempts);
    c.validate();
    return c;
}

PhantomCase generate_case(const PhantomConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const Grid g{cfg.dims, cfg.spacing};
    const auto [nx, ny, nz] = cfg.dims;

    std::array<double, 3> center{};
    for (int a = 0; a < 3; ++a) {
        const double mid = (static_cast<double>(cfg.dims[a]) - 1.0) / 2.0;
        center[a] = mid + (a < 2 ? rng.uniform(-cfg.center_jitter, cfg.center_jitter) : 0.0);
    }
    Ellipsoid brain{center, cfg.brain_radii};
    Ellipsoid wm{center, cfg.wm_radii};
    for (int a = 0; a < 3; ++a) {
        brain.radii[a] *= 1.0 + rng.uniform(-cfg.radius_jitter, cfg.radius_jitter);
        wm.radii[a] *= 1.0 + rng.uniform(-cfg.radius_jitter, cfg.radius_jitter);
        wm.radii[a] = std::min(wm.radii[a], brain.radii[a] - 1.0);
    }

    BinaryMask3D brain_mask(g), wm_mask(g);
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = g.index(x, y, z);
                brain_mask[i] = brain.contains(x, y, z) ? 1 : 0;
                wm_mask[i] = wm.contains(x, y, z) ? 1 : 0;
            }
        }
    }
    if (wm_mask.count() == 0) throw PhantomError("white matter ellipsoid is empty");

    PhantomCase pc;
    pc.seed = seed;
    pc.lesion_count = draw_count(rng, cfg.min_lesions, cfg.max_lesions);
    const auto lesions = place_spheres(g, wm_mask, pc.lesion_count, cfg.min_lesion_radius, cfg.max_lesion_radius,
                                       cfg.max_attempts, rng, "lesion");
    BinaryMask3D wmh(g);
    for (const auto& l : lesions) {
        for (std::size_t v : l) wmh[v] = 1;
    }

    BinaryMask3D confounder_mask(g);
    if (cfg.confounders) {
        pc.confounder_count = draw_count(rng, cfg.min_confounders, cfg.max_confounders);
        const BinaryMask3D near_wm = dilate(wm_mask, cfg.confounder_margin, Connectivity::C6);
        BinaryMask3D allowed(g);
        for (std::size_t i = 0; i < allowed.size(); ++i) allowed[i] = brain_mask[i] && !near_wm[i] ? 1 : 0;
        const auto spheres = place_spheres(g, allowed, pc.confounder_count, cfg.min_confounder_radius,
                                           cfg.max_confounder_radius, cfg.max_attempts, rng, "confounder");
        for (const auto& s : spheres) {
            for (std::size_t v : s) confounder_mask[v] = 1;
        }
    }

    auto tissue = [&](const TissueIntensities& t, std::size_t i) {
        if (wmh[i]) return t.lesion;
        if (wm_mask[i]) return t.white_matter;
        if (confounder_mask[i]) return t.confounder;
        if (brain_mask[i]) return t.gray_matter;
        return t.background;
    };
    Volume3D t1(g), flair(g);
    for (std::size_t i = 0; i < t1.size(); ++i) {
        t1[i] = static_cast<float>(tissue(cfg.t1, i) + cfg.noise_std * rng.normal());
    }
    for (std::size_t i = 0; i < flair.size(); ++i) {
        flair[i] = static_cast<float>(tissue(cfg.flair, i) + cfg.noise_std * rng.normal());
    }

    pc.t1 = std::move(t1);
    pc.flair = std::move(flair);
    pc.wm_truth = std::move(wm_mask);
    pc.wmh_truth = std::move(wmh);
    return pc;
}

std::vector<PhantomCase> generate_dataset(const PhantomConfig& cfg, std::size_t n_cases, std::uint64_t seed) {
    cfg.validate();
    Rng stream(seed);
    std::vector<PhantomCase> cases;
    cases.reserve(n_cases);
    for (std::size_t k = 0; k < n_cases; ++k) {
        PhantomCase c = generate_case(cfg, stream.next());
        char name[32];
        std::snprintf(name, sizeof name, "case_%03zu", k);
        c.id = name;
        cases.push_back(std::move(c));
    }
    return cases;
}

std::uint64_t dataset_hash(const std::vector<PhantomCase>& cases) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& c : cases) {
        mix(c.id.data(), c.id.size());
        mix(&c.seed, sizeof c.seed);
        mix(c.t1.storage().data(), c.t1.size() * sizeof(float));
        mix(c.flair.storage().data(), c.flair.size() * sizeof(float));
        mix(c.wm_truth.storage().data(), c.wm_truth.size());
        mix(c.wmh_truth.storage().data(), c.wmh_truth.size());
    }
    return h;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<PhantomCase>& cases,
                   const PhantomConfig& cfg, std::uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    json list = json::array();
    for (const auto& c : cases) {
        write_nifti(c.t1, dir / (c.id + "_t1.nii"));
        write_nifti(c.flair, dir / (c.id + "_flair.nii"));
        write_nifti(c.wm_truth, dir / (c.id + "_wm.nii"));
        write_nifti(c.wmh_truth, dir / (c.id + "_wmh.nii"));
        list.push_back({{"id", c.id},
                        {"seed", c.seed},
                        {"lesions", c.lesion_count},
                        {"confounders", c.confounder_count},
                        {"t1", c.id + "_t1.nii"},
                        {"flair", c.id + "_flair.nii"},
                        {"wm", c.id + "_wm.nii"},
                        {"wmh", c.id + "_wmh.nii"}});
    }
    const json manifest{{"format", "wmhseg-phantom-manifest"},
                        {"version", 1},
                        {"seed", seed},
                        {"n_cases", cases.size()},
                        {"config", json::parse(cfg.to_json())},
                        {"cases", list}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<PhantomCase> read_dataset(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
    }
    std::vector<PhantomCase> cases;
    try {
        for (const auto& entry : manifest.at("cases")) {
            PhantomCase c;
            c.id = entry.at("id").get<std::string>();
            c.seed = entry.value("seed", std::uint64_t{0});
            c.lesion_count = entry.value("lesions", std::size_t{0});
            c.confounder_count = entry.value("confounders", std::size_t{0});
            c.t1 = read_nifti(dir / entry.at("t1").get<std::string>());
            c.flair = read_nifti(dir / entry.at("flair").get<std::string>());
            if (entry.contains("wm")) c.wm_truth = read_nifti_mask(dir / entry.at("wm").get<std::string>());
            if (entry.contains("wmh")) c.wmh_truth = read_nifti_mask(dir / entry.at("wmh").get<std::string>());
            if (!c.t1.grid().same_dims(c.flair.grid())) {
                throw IoError("case " + c.id + ": T1 and FLAIR dims differ");
            }
            cases.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
    }
    return cases;
}

}  // namespace wmhseg
