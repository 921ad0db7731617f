#pragma once

#include <functional>

#include "photosplat/autograd.hpp"
#include "photosplat/config.hpp"

namespace psplat {

struct TrainConfig {
    Appearance variant = Appearance::Lambert;
    int iterations = 7000;
    std::uint64_t seed = 0;
    LossConfig loss;           // loss.beta is the post-ramp weight
    int beta_ramp_iters = 7000;

    double lr_position = 1.6e-4;
    double lr_position_final = 1.6e-6;  // exponential decay target at `iterations`
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 5e-2;
    double lr_appearance = 2.5e-3;
    double lr_calibration = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    bool densify = true;
    int densify_from = 500;
    int densify_until = 15000;
    int densify_every = 100;
    double densify_grad_threshold = 2e-4;
    double prune_opacity = 5e-3;
    int opacity_reset_every = 3000;

    int checkpoint_every = 5000;
    int log_every = 10;
    bool deterministic = false;  // single-threaded oracle rasterization
    int init_random_count = 2000;
    double init_opacity = 0.1;

    // Parses the documented key=value names; unknown keys are an error.
    static TrainConfig from_config(const Config& c);
    void check() const;
};

// Elementwise Adam state shaped like the splat parameters plus one
// (scale, bias) pair per image.
struct AdamMoments {
    std::vector<Vec3> m_pos, v_pos;
    std::vector<Vec2> m_lns, v_lns;
    std::vector<Vec4> m_rot, v_rot;
    std::vector<double> m_op, v_op;
    std::vector<double> m_alb, v_alb;
    std::vector<ShCoeffs> m_sh, v_sh;
    std::vector<Vec2> m_cal, v_cal;

    void init(const SplatSet& s, std::size_t n_views);
    // Rebuild per-splat rows after densify/prune; parent < 0 rows start at zero.
    void remap(const std::vector<int>& parent, bool sh);
};

struct TrainState {
    int iteration = 0;
    SplatSet splats;
    std::vector<ImageCalibration> calibrations;  // per dataset view
    double scene_extent = 1.0;
    Rng rng{0};
    AdamMoments moments;
};

struct TrainLogRow {
    int iteration = 0;
    double loss = 0.0;
    double loss_intensity = 0.0;
    double loss_normal = 0.0;  // unweighted
    int splat_count = 0;
};

// Optimizes a fresh model against the dataset's training split. When
// out_dir is non-empty, writes checkpoint_NNNNNN.bin snapshots, a final
// checkpoint_final.bin, and train_log.csv there. Throws DivergedLossError
// (after dumping a checkpoint) if the loss goes non-finite. An explicit
// `initial` splat set (matching cfg.variant) replaces point-cloud init.
TrainState train(const SceneDataset& dataset, const TrainConfig& cfg,
                 const std::string& out_dir = "", std::vector<TrainLogRow>* log = nullptr,
                 const SplatSet* initial = nullptr);

}  // namespace psplat
