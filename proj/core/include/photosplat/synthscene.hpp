#pragma once

#include "photosplat/dataset.hpp"

namespace psplat {

struct Crater {
    Vec2 center = Vec2::Zero();
    double radius = 1.0;
    double depth = 0.2;
};

// Procedural terrain patch: a square bilinear heightfield spanning
// [-size/2, size/2]^2 in x/y with an aligned albedo texture. Surfaces are
// evaluated analytically per bilinear cell, so normals are exact.
struct Heightfield {
    double size = 1.0;  // patch edge length, world units
    int n = 2;          // grid nodes per side
    std::vector<double> z;       // n*n elevations, row-major (iy*n + ix)
    std::vector<double> albedo;  // n*n, values in (0, 1]
    double base_albedo = 0.5;
    std::vector<Crater> craters;

    double spacing() const { return size / (n - 1); }
    double node_coord(int i) const { return -0.5 * size + i * spacing(); }
    bool inside(double x, double y) const {
        const double half = 0.5 * size;
        return x >= -half && x <= half && y >= -half && y <= half;
    }

    double height(double x, double y) const;
    Vec3 normal(double x, double y) const;  // unit, +z hemisphere
    double albedo_at(double x, double y) const;
    double min_height() const;
    double max_height() const;
    void check() const;
};

struct TerrainSpec {
    int grid_n = 257;
    double size = 64.0;
    int crater_count = 6;
    double crater_radius_min = 3.0;
    double crater_radius_max = 9.0;
    double crater_depth_frac = 0.2;  // bowl depth as a fraction of radius
    double rim_height_frac = 0.3;    // rim peak as a fraction of depth
    double rim_width_frac = 0.25;    // rim Gaussian sigma as a fraction of radius
    int spot_count = 8;
    double spot_radius_min = 2.0;
    double spot_radius_max = 10.0;
    double spot_amplitude = 0.25;  // multiplicative albedo contrast per spot
    double base_albedo = 0.5;

    void check() const;
};

// Base plane plus parabolic crater bowls with Gaussian rims and
// multiplicative Gaussian albedo spots. Deterministic per seed.
Heightfield make_terrain(const TerrainSpec& spec, std::uint64_t seed);

struct TerrainHit {
    bool hit = false;
    double t = 0.0;  // metric distance along the unit ray
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    double albedo = 0.0;
};

// Ray marching over the bilinear surface with bisection refinement to
// 1e-6 of the patch size. Ray directions must be unit length. The tracer
// caches the elevation bounds once, so construct it outside pixel loops.
class TerrainTracer {
public:
    explicit TerrainTracer(const Heightfield& h);
    TerrainHit trace(const Ray& ray) const;

private:
    const Heightfield* h_;
    double zlo_, zhi_;
};

TerrainHit trace_terrain(const Heightfield& h, const Ray& ray);

struct OracleMaps {
    Image intensity;
    Image depth;  // camera-frame z at the hit, -1 where the ray misses
    std::array<Image, 3> normal;
    Image albedo;
};

// Independent raytraced reference renderer: per-pixel terrain intersection,
// analytic normal, intensity = scale * albedo * disk(angles) + bias. Rays
// that miss the patch give intensity 0 and depth -1. `shadows` adds a
// sun-visibility test per hit (off by default: the reflectance models are
// local, so validation scenes keep the sun high instead).
OracleMaps oracle_render(const Heightfield& h, const CameraModel& cam, const SunSpec& sun,
                         Appearance variant, double scale, double bias, bool shadows = false);

struct OrbitSpec {
    double distance = 96.0;  // camera distance from the patch center
    double elevation_deg = 65.0;
    double elevation_jitter_deg = 4.0;
    double azimuth_start_deg = 0.0;
    double azimuth_end_deg = 300.0;
    int width = 128;
    int height = 128;
    double fov_deg = 40.0;  // horizontal field of view
};

struct SunRange {
    double phase_min_deg = 20.0;  // Sun-camera separation seen from the patch
    double phase_max_deg = 50.0;
    double min_elevation_deg = 30.0;  // keeps cast shadows negligible
};

struct DatasetSpec {
    int n_views = 22;
    OrbitSpec orbit;
    SunRange sun;
    Appearance variant = Appearance::Lambert;
    std::uint64_t seed = 0;
    int gt_point_count = 4096;
    int init_point_count = 1500;
    double init_noise_frac = 0.005;  // of patch size, applied to init points
    bool shadows = false;

    void check() const;
};

// Cameras on an arc above the patch with elevation jitter, per-view sun
// direction at an exact sampled phase angle, oracle renders as images,
// ground-truth maps and surface points attached. The split is
// deterministic: the last max(1, n_views/10) views along the arc are the
// test set.
SceneDataset make_dataset(const Heightfield& h, const DatasetSpec& spec);

int held_out_view_count(int n_views);

// The standard validation scene configuration.
TerrainSpec default_terrain();
DatasetSpec default_dataset_spec(Appearance variant, std::uint64_t seed);

}  // namespace psplat
