#include "photosplat/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace psplat {

void TrainConfig::check() const {
    loss.check();
    if (iterations < 0) throw ValidationError("iterations must be >= 0");
    if (beta_ramp_iters < 1) throw ValidationError("beta_ramp_iters must be >= 1");
    if (densify_every < 1 || opacity_reset_every < 1 || checkpoint_every < 1 || log_every < 1)
        throw ValidationError("schedule periods must be >= 1");
    if (!(lr_position > 0 && lr_position_final > 0))
        throw ValidationError("position learning rates must be positive");
}

TrainConfig TrainConfig::from_config(const Config& c) {
    c.check_known({"variant",        "iterations",     "seed",
                   "lambda",         "beta",           "beta_ramp_iters",
                   "ssim_window",    "ssim_sigma",     "lr_position",
                   "lr_position_final", "lr_scale",    "lr_rotation",
                   "lr_opacity",     "lr_appearance",  "lr_calibration",
                   "densify",        "densify_from",   "densify_until",
                   "densify_every",  "densify_grad_threshold", "prune_opacity",
                   "opacity_reset_every", "checkpoint_every", "log_every",
                   "deterministic",  "init_random_count", "init_opacity"});
    TrainConfig f;
    f.variant = appearance_from_string(c.get_string("variant", "lambert"));
    f.iterations = c.get_int("iterations", f.iterations);
    f.seed = c.get_u64("seed", f.seed);
    f.loss.lambda = c.get_double("lambda", f.loss.lambda);
    f.loss.beta = c.get_double("beta", f.loss.beta);
    f.beta_ramp_iters = c.get_int("beta_ramp_iters", f.beta_ramp_iters);
    f.loss.ssim_window = c.get_int("ssim_window", f.loss.ssim_window);
    f.loss.ssim_sigma = c.get_double("ssim_sigma", f.loss.ssim_sigma);
    f.lr_position = c.get_double("lr_position", f.lr_position);
    f.lr_position_final = c.get_double("lr_position_final", f.lr_position_final);
    f.lr_scale = c.get_double("lr_scale", f.lr_scale);
    f.lr_rotation = c.get_double("lr_rotation", f.lr_rotation);
    f.lr_opacity = c.get_double("lr_opacity", f.lr_opacity);
    f.lr_appearance = c.get_double("lr_appearance", f.lr_appearance);
    f.lr_calibration = c.get_double("lr_calibration", f.lr_calibration);
    f.densify = c.get_bool("densify", f.densify);
    f.densify_from = c.get_int("densify_from", f.densify_from);
    f.densify_until = c.get_int("densify_until", f.densify_until);
    f.densify_every = c.get_int("densify_every", f.densify_every);
    f.densify_grad_threshold = c.get_double("densify_grad_threshold", f.densify_grad_threshold);
    f.prune_opacity = c.get_double("prune_opacity", f.prune_opacity);
    f.opacity_reset_every = c.get_int("opacity_reset_every", f.opacity_reset_every);
    f.checkpoint_every = c.get_int("checkpoint_every", f.checkpoint_every);
    f.log_every = c.get_int("log_every", f.log_every);
    f.deterministic = c.get_bool("deterministic", f.deterministic);
    f.init_random_count = c.get_int("init_random_count", f.init_random_count);
    f.init_opacity = c.get_double("init_opacity", f.init_opacity);
    f.check();
    return f;
}

void AdamMoments::init(const SplatSet& s, std::size_t n_views) {
    const std::size_t n = s.size();
    m_pos.assign(n, Vec3::Zero());
    v_pos.assign(n, Vec3::Zero());
    m_lns.assign(n, Vec2::Zero());
    v_lns.assign(n, Vec2::Zero());
    m_rot.assign(n, Vec4::Zero());
    v_rot.assign(n, Vec4::Zero());
    m_op.assign(n, 0.0);
    v_op.assign(n, 0.0);
    m_alb.assign(n, 0.0);
    v_alb.assign(n, 0.0);
    if (s.variant == Appearance::SH) {
        m_sh.assign(n, ShCoeffs::Zero());
        v_sh.assign(n, ShCoeffs::Zero());
    }
    m_cal.assign(n_views, Vec2::Zero());
    v_cal.assign(n_views, Vec2::Zero());
}

namespace {

// Eigen fixed vectors default-construct uninitialized, so the zero row for
// parent < 0 entries is spelled explicitly.
template <typename T>
void remap_rows(std::vector<T>* m, std::vector<T>* v, const std::vector<int>& parent,
                const T& zero) {
    std::vector<T> nm(parent.size(), zero), nv(parent.size(), zero);
    for (std::size_t i = 0; i < parent.size(); ++i) {
        if (parent[i] >= 0) {
            nm[i] = (*m)[parent[i]];
            nv[i] = (*v)[parent[i]];
        }
    }
    *m = std::move(nm);
    *v = std::move(nv);
}

}  // namespace

void AdamMoments::remap(const std::vector<int>& parent, bool sh) {
    remap_rows(&m_pos, &v_pos, parent, Vec3(Vec3::Zero()));
    remap_rows(&m_lns, &v_lns, parent, Vec2(Vec2::Zero()));
    remap_rows(&m_rot, &v_rot, parent, Vec4(Vec4::Zero()));
    remap_rows(&m_op, &v_op, parent, 0.0);
    remap_rows(&m_alb, &v_alb, parent, 0.0);
    if (sh) remap_rows(&m_sh, &v_sh, parent, ShCoeffs(ShCoeffs::Zero()));
}

namespace {

// One elementwise Adam step with global-iteration bias correction.
inline double adam_step(double g, double* m, double* v, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    const double mhat = *m / bc1;
    const double vhat = *v / bc2;
    return lr * mhat / (std::sqrt(vhat) + eps);
}

std::string checkpoint_name(int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_%06d.bin", iteration);
    return buf;
}

}  // namespace

TrainState train(const SceneDataset& dataset, const TrainConfig& cfg, const std::string& out_dir,
                 std::vector<TrainLogRow>* log, const SplatSet* initial) {
    cfg.check();
    dataset.check();
    if (initial && initial->variant != cfg.variant)
        throw ValidationError("initial splat set variant does not match the training config");
    const std::vector<std::size_t> train_views = dataset.train_indices();
    if (train_views.empty()) throw ValidationError("dataset has no training views");

    TrainState state;
    state.rng = Rng(cfg.seed);

    double mean_intensity = 0.0;
    {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t vi : train_views) {
            const Image& img = dataset.views[vi].image;
            for (std::size_t i = 0; i < img.pixel_count(); ++i) sum += img[i];
            count += img.pixel_count();
        }
        mean_intensity = count ? sum / count : 0.5;
    }

    if (initial) {
        initial->check();
        state.splats = *initial;
    } else {
        InitOptions init;
        init.variant = cfg.variant;
        init.seed = cfg.seed;
        init.random_count = cfg.init_random_count;
        init.mean_intensity = mean_intensity;
        init.init_opacity = cfg.init_opacity;
        state.splats = init_from_points(dataset.init_points, init);
    }
    state.scene_extent = std::max(state.splats.extent(), 1e-9);
    state.calibrations.assign(dataset.views.size(), ImageCalibration{});
    state.moments.init(state.splats, dataset.views.size());

    std::vector<ViewContext> views = dataset.views;

    std::ofstream csv;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        csv.open(fs::path(out_dir) / "train_log.csv");
        csv << "iteration,loss,loss_intensity,loss_normal,splat_count\n";
    }
    const auto emit_log = [&](const TrainLogRow& row) {
        if (log) log->push_back(row);
        if (csv)
            csv << row.iteration << ',' << row.loss << ',' << row.loss_intensity << ','
                << row.loss_normal << ',' << row.splat_count << '\n';
    };
    const auto save_ckpt = [&](const std::string& name) {
        if (!out_dir.empty()) save_checkpoint(state.splats, (fs::path(out_dir) / name).string());
    };

    for (int it = 1; it <= cfg.iterations; ++it) {
        state.iteration = it;
        const std::size_t vi =
            train_views[state.rng.uniform_int(static_cast<int>(train_views.size()))];
        ViewContext& view = views[vi];
        view.calibration = state.calibrations[vi];

        LossConfig lcfg = cfg.loss;
        lcfg.beta = cfg.loss.beta * std::min(1.0, static_cast<double>(it) / cfg.beta_ramp_iters);

        LossEval le;
        try {
            le = view_loss(state.splats, view, lcfg, true, cfg.deterministic);
        } catch (const NonFiniteLossError&) {
            save_ckpt("checkpoint_diverged.bin");
            throw DivergedLossError("training diverged at iteration " + std::to_string(it));
        }

        // Adam. Position lr decays exponentially over the whole run.
        const double frac = static_cast<double>(it) / cfg.iterations;
        const double lr_pos = cfg.lr_position *
                              std::pow(cfg.lr_position_final / cfg.lr_position, frac);
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, it);
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, it);
        const auto step = [&](double g, double* m, double* v, double lr) {
            return adam_step(g, m, v, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
        };

        SplatSet& sp = state.splats;
        AdamMoments& mo = state.moments;
        const GradientSet& gr = le.grads;
        for (std::size_t k = 0; k < sp.size(); ++k) {
            for (int d = 0; d < 3; ++d)
                sp.positions[k][d] -=
                    step(gr.d_position[k][d], &mo.m_pos[k][d], &mo.v_pos[k][d], lr_pos);
            for (int d = 0; d < 2; ++d)
                sp.log_scales[k][d] -=
                    step(gr.d_log_scale[k][d], &mo.m_lns[k][d], &mo.v_lns[k][d], cfg.lr_scale);
            for (int d = 0; d < 4; ++d)
                sp.rotations[k][d] -=
                    step(gr.d_rotation[k][d], &mo.m_rot[k][d], &mo.v_rot[k][d], cfg.lr_rotation);
            const double qn = sp.rotations[k].norm();
            if (qn > 1e-12) sp.rotations[k] /= qn;
            sp.raw_opacities[k] -=
                step(gr.d_raw_opacity[k], &mo.m_op[k], &mo.v_op[k], cfg.lr_opacity);
            if (sp.variant == Appearance::SH) {
                for (int d = 0; d < kShCoeffCount; ++d)
                    sp.sh[k][d] -=
                        step(gr.d_sh[k][d], &mo.m_sh[k][d], &mo.v_sh[k][d], cfg.lr_appearance);
            } else {
                sp.raw_albedos[k] -=
                    step(gr.d_raw_albedo[k], &mo.m_alb[k], &mo.v_alb[k], cfg.lr_appearance);
            }
            sp.grad_accum[k] += gr.densify_stat[k];
            sp.grad_count[k] += gr.touched[k];
        }
        ImageCalibration& cal = state.calibrations[vi];
        cal.scale -= step(gr.d_cal_scale, &mo.m_cal[vi][0], &mo.v_cal[vi][0], cfg.lr_calibration);
        cal.bias -= step(gr.d_cal_bias, &mo.m_cal[vi][1], &mo.v_cal[vi][1], cfg.lr_calibration);
        cal.scale = std::max(cal.scale, 1e-6);

        if (cfg.densify && it % cfg.densify_every == 0 && it >= cfg.densify_from &&
            it <= cfg.densify_until) {
            DensifyOptions dopts;
            dopts.grad_threshold = cfg.densify_grad_threshold;
            dopts.opacity_floor = cfg.prune_opacity;
            dopts.scene_extent = state.scene_extent;
            DensifyResult res = densify_and_prune(sp, dopts, state.rng);
            state.moments.remap(res.parent, sp.variant == Appearance::SH);
            state.splats = std::move(res.splats);
        }
        if (cfg.densify && it % cfg.opacity_reset_every == 0) {
            const double cap = logit(0.01);
            for (double& raw : state.splats.raw_opacities) raw = std::min(raw, cap);
        }

        if (it % cfg.log_every == 0 || it == 1 || it == cfg.iterations)
            emit_log({it, le.value, le.intensity_term, le.normal_term,
                      static_cast<int>(state.splats.size())});
        if (it % cfg.checkpoint_every == 0) save_ckpt(checkpoint_name(it));
    }

    save_ckpt("checkpoint_final.bin");
    return state;
}

}  // namespace psplat
