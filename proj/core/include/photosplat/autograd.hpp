#pragma once

#include <map>

#include "photosplat/losses.hpp"

namespace psplat {

// Upstream per-pixel partials of the scalar loss with respect to each
// rendered map; empty images stand for zero.
struct MapGrads {
    Image d_intensity;  // w.r.t. the calibrated intensity map
    Image d_depth;      // w.r.t. the normalized depth map
    std::array<Image, 3> d_normal;
    Image d_albedo;
    Image d_accumulation;
};

// Partials mirroring SplatSet storage. Rotation gradients are w.r.t. the raw
// stored quaternion, i.e. already projected through the normalization.
struct GradientSet {
    std::vector<Vec3> d_position;
    std::vector<Vec2> d_log_scale;
    std::vector<Vec4> d_rotation;
    std::vector<double> d_raw_opacity;
    std::vector<double> d_raw_albedo;
    std::vector<ShCoeffs> d_sh;
    double d_cal_scale = 0.0;
    double d_cal_bias = 0.0;
    std::vector<double> densify_stat;  // |screen-projected d/d position| this view
    std::vector<std::uint8_t> touched;

    void init(const SplatSet& s);
    void check_finite() const;
};

GradientSet backward(const SplatSet& s, const ViewContext& view, const RenderBundle& bundle,
                     const MapGrads& grads);

// Scalar training loss of one view plus its analytic gradient, the
// quantity fd_check verifies.
struct LossEval {
    double value = 0.0;
    double intensity_term = 0.0;
    double normal_term = 0.0;  // unweighted
    GradientSet grads;
};
LossEval view_loss(const SplatSet& s, const ViewContext& view, const LossConfig& cfg,
                   bool with_grads, bool exhaustive = false);

struct FdClassResult {
    double max_rel = 0.0;   // worst relative disagreement among errors above
                            // the 1e-6 absolute floor
    double max_abs = 0.0;   // worst absolute disagreement
    int checked = 0;
    int excluded = 0;       // skipped: max-rule tie, or fd inconsistent under
                            // step halving (a kink sits inside the probe
                            // interval, so fd is not a valid derivative there)
};

struct FdReport {
    std::map<std::string, FdClassResult> classes;
    std::vector<int> tie_splats;  // splats sitting on the G-max tie locus
    double loss = 0.0;
    double worst_rel() const;
    std::string to_text() const;
};

// Central finite differences of the full view loss against backward().
FdReport fd_check(const SplatSet& s, const ViewContext& view, const LossConfig& cfg,
                  double step = 1e-4);

}  // namespace psplat
