#pragma once

#include "photosplat/rasterizer.hpp"

namespace psplat {

struct LossConfig {
    double lambda = 0.2;  // SSIM share of the intensity loss
    double beta = 0.05;   // normal-loss weight (after ramp)
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_c1 = 0.01 * 0.01;  // dynamic range 1
    double ssim_c2 = 0.03 * 0.03;
    void check() const;
};

// Mean structural similarity with a normalized Gaussian window and symmetric
// border padding; shared by the loss and the evaluation metrics.
double mssim(const Image& a, const Image& b, const LossConfig& cfg);

struct IntensityLoss {
    double value = 0.0;  // (1-lambda) L1 + lambda (1 - MSSIM)
    double l1 = 0.0;
    double ssim = 0.0;
    Image d_render;  // d value / d rendered pixel
};

IntensityLoss loss_intensity(const Image& render, const Image& truth, const LossConfig& cfg);

// Per-pixel sum over contributors of w_i (1 - n_i . n_d), which the blended
// maps express as accumulation - <blended normal, n_d>; n_d comes from
// central differences of the back-projected depth map. Averaged over pixels
// whose 4-neighborhood has valid depth.
struct NormalLoss {
    double value = 0.0;
    int valid_count = 0;
    Image d_accumulation;
    std::array<Image, 3> d_normal;
    Image d_depth;
};

NormalLoss loss_normal(const RenderBundle& bundle, const CameraModel& cam);

}  // namespace psplat
