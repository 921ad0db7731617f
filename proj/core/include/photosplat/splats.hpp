#pragma once

#include <string>
#include <vector>

#include "photosplat/geometry.hpp"
#include "photosplat/reflectance.hpp"

namespace psplat {

// The learned scene. Structure-of-arrays; every per-splat array has length
// size() at all times. Opacity is stored pre-sigmoid, scales and albedo as
// logarithms, so plain gradient steps keep the constrained values valid.
struct SplatSet {
    Appearance variant = Appearance::Lambert;

    std::vector<Vec3> positions;
    std::vector<Vec2> log_scales;       // (ln s_u, ln s_v)
    std::vector<Vec4> rotations;        // quaternion (w,x,y,z), renormalized after updates
    std::vector<double> raw_opacities;  // sigmoid -> (0,1)
    std::vector<double> raw_albedos;    // exp -> relative albedo, physics variants
    std::vector<ShCoeffs> sh;           // SH variant only

    // Densification bookkeeping: running mean of the screen-space position
    // gradient norm per splat.
    std::vector<double> grad_accum;
    std::vector<int> grad_count;

    std::size_t size() const { return positions.size(); }

    double opacity(std::size_t k) const { return sigmoid(raw_opacities[k]); }
    double albedo(std::size_t k) const { return std::exp(raw_albedos[k]); }
    Vec2 scales(std::size_t k) const {
        return Vec2(std::exp(log_scales[k].x()), std::exp(log_scales[k].y()));
    }
    UnitQuaternion orientation(std::size_t k) const {
        return UnitQuaternion::from_vec(rotations[k]);
    }
    SplatFrame frame(std::size_t k) const {
        const Vec2 s = scales(k);
        return SplatFrame{positions[k], s.x(), s.y(), orientation(k)};
    }

    void reserve(std::size_t n);
    void push_back(const Vec3& p, const Vec2& log_scale, const Vec4& rot, double raw_opacity,
                   double raw_albedo, const ShCoeffs& coeffs);
    void reset_grad_stats();
    void check() const;  // throws on broken array-length invariants

    Vec3 bbox_min() const;
    Vec3 bbox_max() const;
    double extent() const;  // bounding-box diagonal of positions
};

struct InitOptions {
    Appearance variant = Appearance::Lambert;
    std::uint64_t seed = 0;
    int random_count = 0;          // used when points is empty
    double mean_intensity = 0.5;   // seeds the SH DC term
    double init_opacity = 0.1;
    double init_albedo = 0.5;
};

// One splat per input point. Scales are isotropic, the mean distance to the
// 3 nearest neighbours; a lone point falls back to 1% of the bounding-box
// diagonal (or 0.01 when that is zero). Orientations are random.
SplatSet init_from_points(const std::vector<Vec3>& points, const InitOptions& opts);

struct DensifyOptions {
    double grad_threshold = 2e-4;
    double opacity_floor = 5e-3;
    double scene_extent = 1.0;
    double clone_scale_fraction = 0.01;  // clone below, split above
    double split_scale_divisor = 1.6;
};

struct DensifyResult {
    SplatSet splats;
    // parent[i] = index into the input set (moment remapping), -1 for the
    // freshly sampled half of a split/clone.
    std::vector<int> parent;
    int cloned = 0, split = 0, pruned = 0;
};

DensifyResult densify_and_prune(const SplatSet& s, const DensifyOptions& opts, Rng& rng);

// Checkpoint: little-endian binary, fixed header (magic, version, count,
// variant) then column-major float32 parameter arrays. Layout documented in
// docs/formats.md.
void save_checkpoint(const SplatSet& s, const std::string& path);
SplatSet load_checkpoint(const std::string& path);

// Splat centers as a binary-little-endian PLY point cloud with normal
// (disk normal), opacity and albedo attributes.
void export_point_cloud_ply(const SplatSet& s, const std::string& path);

}  // namespace psplat
