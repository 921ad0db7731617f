#pragma once

#include <array>

#include "photosplat/image.hpp"

namespace psplat {

struct PsnrResult {
    double db = 0.0;      // meaningless when infinite
    bool infinite = false;  // MSE was exactly zero
};

// 10*log10(peak^2 / MSE) over whole images of equal shape.
PsnrResult psnr(const Image& a, const Image& b, double peak = 1.0);

// Mean angular difference in degrees over mask > 0.5. Both maps must hold
// unit vectors wherever the mask is set.
double normal_error_deg(const std::array<Image, 3>& n_pred, const std::array<Image, 3>& n_true,
                        const Image& mask);

struct AlbedoError {
    double mean_rel = 0.0;  // mean |a_true - fit(a_pred)| / a_true
    double scale = 1.0;     // fitted gain applied to the prediction
    double offset = 0.0;
};

// Least-squares affine fit of the prediction to the truth over the mask,
// then the mean relative deviation. The truth must be positive on the mask.
AlbedoError albedo_error(const Image& a_pred, const Image& a_true, const Image& mask);

// Pixels covered by both reconstructions: rendered accumulation above 1/2
// and a valid (non-zero) ground-truth normal.
Image overlap_mask(const Image& pred_accumulation, const std::array<Image, 3>& gt_normal);

// Least-squares gain/offset of x against y over all pixels; ties rendered
// intensities to images whose exposure is unknown.
struct AffineFit {
    double scale = 1.0;
    double offset = 0.0;
};
AffineFit fit_affine(const Image& x, const Image& y);

}  // namespace psplat
