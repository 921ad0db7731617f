#pragma once

#include <filesystem>
#include <string>

#include "photosplat/dataset.hpp"
#include "photosplat/splats.hpp"

namespace psplat::testing {

// Camera at `eye` looking at the origin, z-up roll.
inline CameraModel simple_camera(const Vec3& eye, double fx, int width, int height) {
    return CameraModel::look_at(eye, Vec3::Zero(), Vec3::UnitZ(), fx, fx, width, height);
}

// Random splats inside a box of the given half-extent centered at the
// origin, facing roughly the +z camera side. Deterministic per seed.
inline SplatSet random_scene(int count, Appearance variant, std::uint64_t seed,
                             double half_extent = 1.0, double scale_lo = 0.15,
                             double scale_hi = 0.6) {
    Rng rng(seed);
    SplatSet s;
    s.variant = variant;
    for (int k = 0; k < count; ++k) {
        const Vec3 p(rng.uniform(-half_extent, half_extent), rng.uniform(-half_extent, half_extent),
                     rng.uniform(-0.3 * half_extent, 0.3 * half_extent));
        const double su = rng.uniform(scale_lo, scale_hi);
        const double sv = rng.uniform(scale_lo, scale_hi);
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        if (q.norm() < 1e-6) q = Vec4(1, 0, 0, 0);
        q.normalize();
        const double raw_opacity = logit(rng.uniform(0.3, 0.9));
        const double raw_albedo = std::log(rng.uniform(0.2, 0.8));
        ShCoeffs coeffs = ShCoeffs::Zero();
        if (variant == Appearance::SH)
            for (int i = 0; i < kShCoeffCount; ++i) coeffs[i] = rng.uniform(-0.15, 0.15);
        s.push_back(p, Vec2(std::log(su), std::log(sv)), q, raw_opacity, raw_albedo, coeffs);
    }
    return s;
}

// View of the origin-centered scene from a mildly off-axis direction, sun
// well above the terminator so reflectance guards stay inactive.
inline ViewContext simple_view(int width, int height, std::uint64_t seed = 0) {
    Rng rng(seed);
    ViewContext v;
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 eye = 6.0 * Vec3(0.25 * std::cos(az), 0.25 * std::sin(az), 1.0).normalized();
    v.camera = simple_camera(eye, 0.9 * width, width, height);
    v.sun = Vec3(0.3 * std::cos(az + 1.0), 0.3 * std::sin(az + 1.0), 1.0).normalized();
    v.name = "test_view";
    v.image = Image(height, width, 0.0);
    return v;
}

// Unique writable scratch directory under the build tree.
inline std::string scratch_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("photosplat_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace psplat::testing
