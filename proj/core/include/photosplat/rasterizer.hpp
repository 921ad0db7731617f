#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "photosplat/dataset.hpp"
#include "photosplat/splats.hpp"

namespace psplat {

inline constexpr double kBlendSkip = 1.0 / 255.0;  // drop contributions below this
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr int kTileSize = 16;
// The screen-space filter exp(-|dpx|^2) falls below kBlendSkip beyond
// sqrt(ln 255) ~ 2.354 px, so this dilation keeps bounding rects sound.
inline constexpr double kScreenFilterDilation = 2.5;

// One blended contribution, enough to replay the pixel's compositing stack
// in the backward pass.
struct TapeEntry {
    std::int32_t splat;
    std::int32_t branch;  // 0: splat-space gaussian, 1: screen-space filter won the max
    double u, v;          // splat-local hit coordinates
    double ghat;          // value of the winning branch
    double a;             // alpha * ghat
    double z;             // camera-frame depth of the ray hit
};

// Per-splat quantities that are constant across one view's pixels.
struct SplatViewEval {
    bool culled = true;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive pixel rect (tile path)
    Vec3 position = Vec3::Zero();
    Vec2 center_px = Vec2::Zero();
    double center_z = 0.0;
    Mat3 axes = Mat3::Identity();  // columns t_u, t_v, t_w
    Vec2 scale = Vec2::Ones();
    double alpha = 0.0;
    Vec3 e = Vec3::UnitZ();  // unit vector splat -> camera center
    double range = 1.0;      // |camera center - position|
    double flip = 1.0;       // sign putting t_w on the camera side
    Vec3 normal = Vec3::UnitZ();  // flip * t_w
    double albedo = 0.0;          // exp(raw), physics variants
    double intensity = 0.0;       // c_k
    DiskEval disk;                // physics variants
    ShCoeffs basis = ShCoeffs::Zero();  // SH variant, evaluated at -e
    bool sh_clamped = false;            // eval_sh hit its zero clamp
};

struct RenderOptions {
    bool exhaustive = false;  // single-threaded every-splat-per-pixel oracle path
    bool with_tape = false;
    int threads = 1;
};

struct RenderBundle {
    Image intensity;  // calibrated: scale * blend + bias
    Image depth;      // omega-weighted mean hit depth over accumulation; -1 where empty
    std::array<Image, 3> normal;
    Image albedo;  // physics variants only; empty image for SH
    Image accumulation;

    bool has_tape = false;
    std::vector<std::uint32_t> tape_offsets;  // row-major pixels, size h*w+1
    std::vector<TapeEntry> tape;
    std::vector<SplatViewEval> per_splat;
    std::vector<std::uint32_t> order;  // live splats, ascending center depth
};

// View-constant per-splat precomputation shared by render and backward.
std::vector<SplatViewEval> eval_splats_for_view(const SplatSet& s, const ViewContext& view);

// Pixel rect covering every pixel the splat can push over the blend
// threshold: exact AABB of the projected support circle (radius
// max(3, sqrt(2 ln(255 alpha))) sigma) dilated for the screen filter.
// False = culled (off-image, center behind camera, or alpha below threshold).
bool bound(const SplatFrame& frame, double alpha, const CameraModel& cam, int* x0, int* y0,
           int* x1, int* y1);

RenderBundle render(const SplatSet& s, const ViewContext& view, const RenderOptions& opts = {});

}  // namespace psplat
