#pragma once

#include <array>

#include "photosplat/common.hpp"

namespace psplat {

enum class Appearance { SH, Lambert, LommelSeeliger, LunarLambert };

inline bool is_physics(Appearance a) { return a != Appearance::SH; }

const char* to_string(Appearance a);
Appearance appearance_from_string(const std::string& s);
std::string appearance_to_string(Appearance a);

// Incidence (sun/normal), emission (view/normal) and phase (sun/view)
// angles, radians.
struct PhotometricAngles {
    double incidence = 0.0;
    double emission = 0.0;
    double phase = 0.0;
};

// Per-image affine intensity correction: I = scale * blend + bias.
struct ImageCalibration {
    double scale = 1.0;
    double bias = 0.0;
};

// Unit vector from the surface toward the Sun, world frame.
struct SunSpec {
    Vec3 direction = Vec3(0, 0, 1);
};

PhotometricAngles angles(const Vec3& normal, const SunSpec& sun, const Vec3& to_camera);

// Floor on the Lommel-Seeliger denominator near the limb.
inline constexpr double kDiskDenominatorFloor = 1e-4;

double disk_lambert(const PhotometricAngles& a);
double disk_lommel_seeliger(const PhotometricAngles& a);
double disk_lunar_lambert(const PhotometricAngles& a);

// Phase weighting for Lunar-Lambert, phase in radians internally and
// converted to degrees here (the weighting is defined on degrees).
double phase_weight(double phase_radians);

double disk_value(Appearance model, const PhotometricAngles& a);

// Cosine-space disk evaluation used by the renderer and its backward pass:
// mu0 = cos(incidence), mu = cos(emission), cphi = cos(phase), all already
// clamped by the caller to [-1, 1]. Returns the disk value and its partial
// derivatives w.r.t. the unclamped dot products.
struct DiskEval {
    double value = 0.0;
    double d_mu0 = 0.0;
    double d_mu = 0.0;
    double d_cphi = 0.0;
};
DiskEval disk_eval(Appearance model, double mu0, double mu, double cphi);

inline constexpr int kShCoeffCount = 16;  // degree-3 real SH
using ShCoeffs = Eigen::Matrix<double, kShCoeffCount, 1>;

// Real SH basis values at a unit direction, bands 0..3 in the usual
// splatting order.
ShCoeffs sh_basis(const Vec3& dir);

// d(basis)/d(dir): 16 rows of 3 partials each.
Eigen::Matrix<double, kShCoeffCount, 3> sh_basis_jacobian(const Vec3& dir);

// Baseline appearance: basis . coeffs + 0.5, clamped at zero.
double eval_sh(const ShCoeffs& coeffs, const Vec3& view_dir);

// Per-splat blended intensity c_k for one view. Physics variants return
// albedo * disk(angles); calibration is applied to the blended image, not
// here, so it is accepted only to mirror the call site contract.
double splat_intensity(Appearance model, const ShCoeffs* sh, double albedo, const Vec3& normal,
                       const SunSpec& sun, const Vec3& to_camera, const ImageCalibration& cal);

}  // namespace psplat
