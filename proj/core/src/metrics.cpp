#include "photosplat/metrics.hpp"

#include <cmath>

namespace psplat {

namespace {

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeMismatchError("metric inputs differ in shape");
}

}  // namespace

PsnrResult psnr(const Image& a, const Image& b, double peak) {
    require_same_shape(a, b);
    if (a.empty()) throw ValidationError("psnr inputs are empty");
    if (!(peak > 0)) throw ValidationError("psnr peak must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pixel_count());
    if (mse == 0.0) return {0.0, true};
    return {10.0 * std::log10(peak * peak / mse), false};
}

double normal_error_deg(const std::array<Image, 3>& n_pred, const std::array<Image, 3>& n_true,
                        const Image& mask) {
    for (int c = 0; c < 3; ++c) {
        require_same_shape(n_pred[c], mask);
        require_same_shape(n_true[c], mask);
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (mask[i] <= 0.5) continue;
        double dot = 0.0;
        for (int c = 0; c < 3; ++c) dot += n_pred[c][i] * n_true[c][i];
        sum += std::acos(std::clamp(dot, -1.0, 1.0));
        ++count;
    }
    if (count == 0) throw EmptyMaskError("normal error mask is empty");
    return sum / count * (180.0 / M_PI);
}

AlbedoError albedo_error(const Image& a_pred, const Image& a_true, const Image& mask) {
    require_same_shape(a_pred, a_true);
    require_same_shape(a_pred, mask);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (mask[i] <= 0.5) continue;
        if (!(a_true[i] > 0.0))
            throw ValidationError("ground-truth albedo must be positive on the mask");
        sx += a_pred[i];
        sy += a_true[i];
        sxx += a_pred[i] * a_pred[i];
        sxy += a_pred[i] * a_true[i];
        ++count;
    }
    if (count == 0) throw EmptyMaskError("albedo error mask is empty");

    const double n = static_cast<double>(count);
    const double var = sxx - sx * sx / n;
    if (var <= 1e-12 * n)
        throw DegenerateFitError("predicted albedo is constant; affine fit is underdetermined");
    AlbedoError out;
    out.scale = (sxy - sx * sy / n) / var;
    out.offset = (sy - out.scale * sx) / n;

    double sum = 0.0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (mask[i] <= 0.5) continue;
        const double fit = out.scale * a_pred[i] + out.offset;
        sum += std::abs(a_true[i] - fit) / a_true[i];
    }
    out.mean_rel = sum / n;
    return out;
}

Image overlap_mask(const Image& pred_accumulation, const std::array<Image, 3>& gt_normal) {
    for (int c = 0; c < 3; ++c) require_same_shape(pred_accumulation, gt_normal[c]);
    Image mask(pred_accumulation.height(), pred_accumulation.width(), 0.0);
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        const double n2 = gt_normal[0][i] * gt_normal[0][i] + gt_normal[1][i] * gt_normal[1][i] +
                          gt_normal[2][i] * gt_normal[2][i];
        if (pred_accumulation[i] > 0.5 && n2 > 0.25) mask[i] = 1.0;
    }
    return mask;
}

AffineFit fit_affine(const Image& x, const Image& y) {
    require_same_shape(x, y);
    if (x.empty()) throw ValidationError("affine fit inputs are empty");
    const double n = static_cast<double>(x.pixel_count());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.pixel_count(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double var = sxx - sx * sx / n;
    AffineFit fit;
    if (var <= 1e-15 * n) {  // constant input: gain is meaningless, keep 1
        fit.scale = 1.0;
        fit.offset = (sy - sx) / n;
        return fit;
    }
    fit.scale = (sxy - sx * sy / n) / var;
    fit.offset = (sy - fit.scale * sx) / n;
    return fit;
}

}  // namespace psplat
