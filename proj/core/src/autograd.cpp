#include "photosplat/autograd.hpp"

#include <cmath>
#include <sstream>

namespace psplat {

void GradientSet::init(const SplatSet& s) {
    const std::size_t n = s.size();
    d_position.assign(n, Vec3::Zero());
    d_log_scale.assign(n, Vec2::Zero());
    d_rotation.assign(n, Vec4::Zero());
    d_raw_opacity.assign(n, 0.0);
    d_raw_albedo.assign(n, 0.0);
    if (s.variant == Appearance::SH) d_sh.assign(n, ShCoeffs::Zero());
    d_cal_scale = 0.0;
    d_cal_bias = 0.0;
    densify_stat.assign(n, 0.0);
    touched.assign(n, 0);
}

void GradientSet::check_finite() const {
    const auto bad = [](double v) { return !std::isfinite(v); };
    for (const auto& v : d_position)
        if (v.hasNaN() || !v.allFinite()) throw NonFiniteLossError("gradient not finite");
    for (const auto& v : d_log_scale)
        if (!v.allFinite()) throw NonFiniteLossError("gradient not finite");
    for (const auto& v : d_rotation)
        if (!v.allFinite()) throw NonFiniteLossError("gradient not finite");
    for (double v : d_raw_opacity)
        if (bad(v)) throw NonFiniteLossError("gradient not finite");
    for (double v : d_raw_albedo)
        if (bad(v)) throw NonFiniteLossError("gradient not finite");
    for (const auto& v : d_sh)
        if (!v.allFinite()) throw NonFiniteLossError("gradient not finite");
    if (bad(d_cal_scale) || bad(d_cal_bias)) throw NonFiniteLossError("gradient not finite");
}

namespace {

// Per-splat sums built up over the pixel sweep, chained into parameter
// space once per splat at the end of the view.
struct SplatAccum {
    Vec3 g_pos = Vec3::Zero();
    Vec3 g_tu = Vec3::Zero();
    Vec3 g_tv = Vec3::Zero();
    Vec3 g_tw = Vec3::Zero();
    Vec2 g_lns = Vec2::Zero();
    double g_rawop = 0.0;
    double g_c = 0.0;          // d / d per-view intensity c_k
    Vec3 g_npay = Vec3::Zero();  // d / d blended-normal payload n_k
    double g_albpay = 0.0;       // d / d albedo payload
    bool touched = false;
};

// Projection Jacobian of pixel coordinates w.r.t. the world point.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Vec3& p_world) {
    const Vec3 pc = cam.to_camera(p_world);
    Eigen::Matrix<double, 2, 3> j;
    j.row(0) = (cam.fx / pc.z()) * cam.rotation.row(0) -
               (cam.fx * pc.x() / (pc.z() * pc.z())) * cam.rotation.row(2);
    j.row(1) = (cam.fy / pc.z()) * cam.rotation.row(1) -
               (cam.fy * pc.y() / (pc.z() * pc.z())) * cam.rotation.row(2);
    return j;
}

}  // namespace

GradientSet backward(const SplatSet& s, const ViewContext& view, const RenderBundle& bundle,
                     const MapGrads& grads) {
    s.check();
    if (!bundle.has_tape)
        throw MissingContributorsError("backward needs a render with the tape retained");
    const CameraModel& cam = view.camera;
    const int h = cam.height, w = cam.width;
    const bool physics = is_physics(s.variant);

    GradientSet out;
    out.init(s);
    std::vector<SplatAccum> acc(s.size());

    const bool has_i = !grads.d_intensity.empty();
    const bool has_d = !grads.d_depth.empty();
    const bool has_n = !grads.d_normal[0].empty();
    const bool has_a = physics && !grads.d_albedo.empty();
    const bool has_w = !grads.d_accumulation.empty();

    const Eigen::RowVector3d cam_row2 = cam.rotation.row(2);
    std::vector<double> transmittance;  // scratch, T before each entry

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            const std::uint32_t lo = bundle.tape_offsets[pix];
            const std::uint32_t hi = bundle.tape_offsets[pix + 1];
            const double gi = has_i ? grads.d_intensity[pix] : 0.0;
            if (gi != 0.0) out.d_cal_bias += gi;
            if (lo == hi) continue;

            const double g_blend = gi * view.calibration.scale;
            const Vec3 gn = has_n ? Vec3(grads.d_normal[0][pix], grads.d_normal[1][pix],
                                         grads.d_normal[2][pix])
                                  : Vec3::Zero();
            const double ga = has_a ? grads.d_albedo[pix] : 0.0;
            double gw = has_w ? grads.d_accumulation[pix] : 0.0;
            double gp = 0.0;  // depth payload channel
            if (has_d && grads.d_depth[pix] != 0.0) {
                const double a_sum = bundle.accumulation[pix];
                const double d_val = bundle.depth[pix];
                gp = grads.d_depth[pix] / a_sum;
                gw -= grads.d_depth[pix] * d_val / a_sum;
            }

            const Ray ray = pixel_ray(cam, Vec2(x, y));
            const double r2d = cam_row2 * ray.direction;

            transmittance.clear();
            double t_run = 1.0;
            double blend = 0.0;
            for (std::uint32_t i = lo; i < hi; ++i) {
                const TapeEntry& e = bundle.tape[i];
                transmittance.push_back(t_run);
                blend += t_run * e.a * bundle.per_splat[e.splat].intensity;
                t_run *= 1.0 - e.a;
            }
            if (gi != 0.0) out.d_cal_scale += gi * blend;

            // Reverse sweep with suffix sums of omega-weighted payloads.
            double s_c = 0.0, s_z = 0.0, s_alb = 0.0, s_one = 0.0;
            Vec3 s_n = Vec3::Zero();
            for (std::uint32_t i = hi; i-- > lo;) {
                const TapeEntry& e = bundle.tape[i];
                const SplatViewEval& ev = bundle.per_splat[e.splat];
                SplatAccum& a_k = acc[e.splat];
                a_k.touched = true;
                const double t_i = transmittance[i - lo];
                const double w_i = t_i * e.a;

                a_k.g_c += g_blend * w_i;
                a_k.g_npay += gn * w_i;
                if (has_a) a_k.g_albpay += ga * w_i;
                const double gz = gp * w_i;

                const double onem = 1.0 - e.a;
                double dlda = g_blend * t_i * ev.intensity + gn.dot(ev.normal) * t_i +
                              gp * t_i * e.z + ga * t_i * ev.albedo + gw * t_i;
                if (onem > 1e-12)
                    dlda -= (g_blend * s_c + gn.dot(s_n) + gp * s_z + ga * s_alb + gw * s_one) /
                            onem;

                const double dldalpha = dlda * e.ghat;
                a_k.g_rawop += dldalpha * ev.alpha * (1.0 - ev.alpha);
                const double dldghat = dlda * ev.alpha;

                // Geometry shared by the splat-space branch and the depth payload.
                const Vec3 tw = ev.axes.col(2);
                const double den = tw.dot(ray.direction);
                const double t_ray = tw.dot(ev.position - ray.origin) / den;
                const Vec3 delta = ray.origin + t_ray * ray.direction - ev.position;

                if (e.branch == 0) {
                    const double dldu = dldghat * (-e.u * e.ghat);
                    const double dldv = dldghat * (-e.v * e.ghat);
                    const Vec3 tu = ev.axes.col(0);
                    const Vec3 tv = ev.axes.col(1);
                    const double tud = tu.dot(ray.direction);
                    const double tvd = tv.dot(ray.direction);
                    a_k.g_pos += dldu * ((tud / den) * tw - tu) / ev.scale.x() +
                                 dldv * ((tvd / den) * tw - tv) / ev.scale.y();
                    a_k.g_tu += (dldu / ev.scale.x()) * delta;
                    a_k.g_tv += (dldv / ev.scale.y()) * delta;
                    a_k.g_tw += (-(dldu * tud / ev.scale.x() + dldv * tvd / ev.scale.y()) / den) *
                                delta;
                    a_k.g_lns.x() += dldu * -e.u;
                    a_k.g_lns.y() += dldv * -e.v;
                } else {
                    const Vec2 dpx(x - ev.center_px.x(), y - ev.center_px.y());
                    const Vec2 dld_center = dldghat * 2.0 * e.ghat * dpx;
                    a_k.g_pos += projection_jacobian(cam, ev.position).transpose() * dld_center;
                }
                if (gz != 0.0) {
                    a_k.g_pos += gz * (r2d / den) * tw;
                    a_k.g_tw += gz * (-r2d / den) * delta;
                }

                s_c += w_i * ev.intensity;
                s_n += w_i * ev.normal;
                s_z += w_i * e.z;
                s_alb += w_i * ev.albedo;
                s_one += w_i;
            }
        }
    }

    // Per-splat chains: appearance, frame orientation, squashes.
    for (std::size_t k = 0; k < s.size(); ++k) {
        SplatAccum& a_k = acc[k];
        if (!a_k.touched) continue;
        const SplatViewEval& ev = bundle.per_splat[k];
        out.touched[k] = 1;

        Vec3 dldn = a_k.g_npay;
        if (physics) {
            out.d_raw_albedo[k] += a_k.g_c * ev.intensity + a_k.g_albpay * ev.albedo;
            dldn += a_k.g_c * ev.albedo * (ev.disk.d_mu0 * view.sun + ev.disk.d_mu * ev.e);
            const Vec3 dlde =
                a_k.g_c * ev.albedo * (ev.disk.d_mu * ev.normal + ev.disk.d_cphi * view.sun);
            // e = (C - p)/range
            a_k.g_pos += -(dlde - ev.e * ev.e.dot(dlde)) / ev.range;
        } else if (!ev.sh_clamped && a_k.g_c != 0.0) {
            out.d_sh[k] += a_k.g_c * ev.basis;
            const Vec3 dir = -ev.e;  // camera -> splat
            const Vec3 dlddir = a_k.g_c * (sh_basis_jacobian(dir).transpose() * s.sh[k]);
            // dir = (p - C)/range
            a_k.g_pos += (dlddir - dir * dir.dot(dlddir)) / ev.range;
        }
        a_k.g_tw += ev.flip * dldn;

        const UnitQuaternion q = s.orientation(k);
        const auto jac = rotation_matrix_jacobian(q);
        Vec4 dldqhat;
        for (int m = 0; m < 4; ++m)
            dldqhat[m] = jac[m].col(0).dot(a_k.g_tu) + jac[m].col(1).dot(a_k.g_tv) +
                         jac[m].col(2).dot(a_k.g_tw);
        const Vec4 qraw = s.rotations[k];
        const double qnorm = qraw.norm();
        const Vec4 qhat = qraw / qnorm;
        out.d_rotation[k] += (dldqhat - qhat * qhat.dot(dldqhat)) / qnorm;

        out.d_position[k] += a_k.g_pos;
        out.d_log_scale[k] += a_k.g_lns;
        out.d_raw_opacity[k] += a_k.g_rawop;
        out.densify_stat[k] = (projection_jacobian(cam, ev.position) * a_k.g_pos).norm();
    }
    return out;
}

LossEval view_loss(const SplatSet& s, const ViewContext& view, const LossConfig& cfg,
                   bool with_grads, bool exhaustive) {
    RenderOptions ropts;
    ropts.with_tape = with_grads;
    ropts.exhaustive = exhaustive;
    const RenderBundle bundle = render(s, view, ropts);

    const IntensityLoss il = loss_intensity(bundle.intensity, view.image, cfg);
    LossEval out;
    out.intensity_term = il.value;

    NormalLoss nl;
    if (cfg.beta > 0.0) {
        nl = loss_normal(bundle, view.camera);
        out.normal_term = nl.value;
    }
    out.value = il.value + cfg.beta * out.normal_term;
    if (!std::isfinite(out.value)) throw NonFiniteLossError("view loss is not finite");

    if (with_grads) {
        MapGrads mg;
        mg.d_intensity = il.d_render;
        if (cfg.beta > 0.0) {
            mg.d_depth = nl.d_depth;
            mg.d_accumulation = nl.d_accumulation;
            for (int c = 0; c < 3; ++c) mg.d_normal[c] = nl.d_normal[c];
            for (std::size_t i = 0; i < mg.d_depth.pixel_count(); ++i) {
                mg.d_depth[i] *= cfg.beta;
                mg.d_accumulation[i] *= cfg.beta;
                for (int c = 0; c < 3; ++c) mg.d_normal[c][i] *= cfg.beta;
            }
        }
        out.grads = backward(s, view, bundle, mg);
    }
    return out;
}

double FdReport::worst_rel() const {
    double worst = 0.0;
    for (const auto& [name, r] : classes) worst = std::max(worst, r.max_rel);
    return worst;
}

std::string FdReport::to_text() const {
    std::ostringstream os;
    os << "gradient check (central differences)\n";
    os << "loss at evaluation point: " << loss << "\n";
    for (const auto& [name, r] : classes) {
        os << "  " << name << ": max_rel " << r.max_rel << "  max_abs " << r.max_abs
           << "  checked " << r.checked;
        if (r.excluded) os << "  excluded " << r.excluded << " (kink within fd step)";
        os << "\n";
    }
    if (!tie_splats.empty()) {
        os << "tie splats:";
        for (int k : tie_splats) os << ' ' << k;
        os << "\n";
    }
    return os.str();
}

FdReport fd_check(const SplatSet& s, const ViewContext& view, const LossConfig& cfg, double step) {
    const LossEval base = view_loss(s, view, cfg, true);
    FdReport report;
    report.loss = base.value;

    // Tie detection on the unperturbed render.
    {
        RenderOptions ropts;
        ropts.with_tape = true;
        const RenderBundle bundle = render(s, view, ropts);
        const int w = view.camera.width;
        for (std::size_t pix = 0; pix + 1 < bundle.tape_offsets.size(); ++pix) {
            const int x = static_cast<int>(pix) % w;
            const int y = static_cast<int>(pix) / w;
            for (std::uint32_t i = bundle.tape_offsets[pix]; i < bundle.tape_offsets[pix + 1];
                 ++i) {
                const TapeEntry& e = bundle.tape[i];
                const SplatViewEval& ev = bundle.per_splat[e.splat];
                const double g1 = std::exp(-0.5 * (e.u * e.u + e.v * e.v));
                const double dx = x - ev.center_px.x();
                const double dy = y - ev.center_px.y();
                const double g2 = std::exp(-(dx * dx + dy * dy));
                if (std::abs(g1 - g2) <= 1e-9) report.tie_splats.push_back(e.splat);
            }
        }
        std::sort(report.tie_splats.begin(), report.tie_splats.end());
        report.tie_splats.erase(std::unique(report.tie_splats.begin(), report.tie_splats.end()),
                                report.tie_splats.end());
    }
    const auto tied = [&](std::size_t k) {
        return std::binary_search(report.tie_splats.begin(), report.tie_splats.end(),
                                  static_cast<int>(k));
    };

    SplatSet probe = s;
    ViewContext vprobe = view;
    const auto fd_loss = [&]() { return view_loss(probe, vprobe, cfg, false).value; };
    const auto central = [&](double* param, double h) {
        const double save = *param;
        *param = save + h;
        const double up = fd_loss();
        *param = save - h;
        const double dn = fd_loss();
        *param = save;
        return (up - dn) / (2.0 * h);
    };
    // A central difference only estimates a derivative where the loss is
    // smooth across the whole probe interval. The loss is piecewise smooth:
    // the max-rule tie, the alpha skip threshold, the transmittance early
    // stop, reflectance terminator guards and the L1 sign all introduce
    // kinks. Halving the step exposes them: smooth components agree to
    // O(step^2), while a crossed kink shifts the estimate at one scale but
    // not the other. Inconsistent components are excluded, not compared —
    // a genuinely wrong analytic gradient still fails, because there fd is
    // self-consistent and disagrees with the backward pass.
    struct FdSample {
        double fd = 0.0;
        bool smooth = true;
    };
    constexpr double kFdAbsFloor = 1e-6;
    const auto probe_fd = [&](double* param) {
        FdSample out;
        out.fd = central(param, step);
        const double half = central(param, 0.5 * step);
        const double resid = std::abs(out.fd - half);
        const double scale = std::max(std::abs(out.fd), std::abs(half));
        out.smooth = resid <= std::max(kFdAbsFloor, 5e-4 * scale);
        return out;
    };
    const auto record = [&](FdClassResult* r, const FdSample& fd, double an, bool excluded) {
        if (excluded || !fd.smooth) {
            ++r->excluded;
            return;
        }
        ++r->checked;
        const double abs_err = std::abs(fd.fd - an);
        const double denom = std::max(std::abs(fd.fd), std::abs(an));
        r->max_abs = std::max(r->max_abs, abs_err);
        // Disagreements below the absolute floor are beneath the resolution
        // the step-halving gate certifies for fd, so only errors above it
        // enter the relative statistic.
        if (abs_err > kFdAbsFloor) r->max_rel = std::max(r->max_rel, abs_err / denom);
    };

    FdClassResult& c_pos = report.classes["position"];
    FdClassResult& c_scale = report.classes["scale"];
    FdClassResult& c_rot = report.classes["rotation"];
    FdClassResult& c_op = report.classes["opacity"];
    FdClassResult& c_app = report.classes["appearance"];
    FdClassResult& c_cal = report.classes["calibration"];

    for (std::size_t k = 0; k < s.size(); ++k) {
        const bool ex = tied(k);
        for (int d = 0; d < 3; ++d)
            record(&c_pos, ex ? FdSample{} : probe_fd(&probe.positions[k][d]),
                   base.grads.d_position[k][d], ex);
        for (int d = 0; d < 2; ++d)
            record(&c_scale, ex ? FdSample{} : probe_fd(&probe.log_scales[k][d]),
                   base.grads.d_log_scale[k][d], ex);
        for (int d = 0; d < 4; ++d)
            record(&c_rot, ex ? FdSample{} : probe_fd(&probe.rotations[k][d]),
                   base.grads.d_rotation[k][d], ex);
        record(&c_op, ex ? FdSample{} : probe_fd(&probe.raw_opacities[k]),
               base.grads.d_raw_opacity[k], ex);
        if (is_physics(s.variant)) {
            record(&c_app, ex ? FdSample{} : probe_fd(&probe.raw_albedos[k]),
                   base.grads.d_raw_albedo[k], ex);
        } else {
            for (int d = 0; d < kShCoeffCount; ++d)
                record(&c_app, ex ? FdSample{} : probe_fd(&probe.sh[k][d]), base.grads.d_sh[k][d],
                       ex);
        }
    }
    record(&c_cal, probe_fd(&vprobe.calibration.scale), base.grads.d_cal_scale, false);
    record(&c_cal, probe_fd(&vprobe.calibration.bias), base.grads.d_cal_bias, false);
    return report;
}

}  // namespace psplat
