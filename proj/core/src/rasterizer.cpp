#include "photosplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace psplat {

namespace {

// Extremes over theta of (A + B cos + C sin)/(D + E cos + F sin); valid when
// the denominator keeps one sign. False on the degenerate cases the caller
// must treat conservatively.
bool rational_trig_extremes(double A, double B, double C, double D, double E, double F,
                            double* lo, double* hi) {
    const auto value = [&](double c, double s) { return (A + B * c + C * s) / (D + E * c + F * s); };
    const double al = A * E - B * D;
    const double be = C * D - A * F;
    const double ga = C * E - B * F;
    const double r = std::hypot(al, be);
    if (r < 1e-300) {
        if (std::abs(ga) > 0.0) return false;
        *lo = *hi = value(1.0, 0.0);
        return true;
    }
    if (std::abs(ga) > r) return false;
    const double phi = std::atan2(al, be);
    const double d = std::acos(std::clamp(-ga / r, -1.0, 1.0));
    const double v1 = value(std::cos(phi + d), std::sin(phi + d));
    const double v2 = value(std::cos(phi - d), std::sin(phi - d));
    *lo = std::min(v1, v2);
    *hi = std::max(v1, v2);
    return true;
}

}  // namespace

bool bound(const SplatFrame& frame, double alpha, const CameraModel& cam, int* x0, int* y0,
           int* x1, int* y1) {
    if (cam.width <= 0 || cam.height <= 0) return false;
    if (alpha < kBlendSkip) return false;  // alpha*ghat can never reach the threshold
    const auto pp = project(cam, frame.position);
    if (!pp) return false;

    // Support radius in sigma units: where alpha*G drops below the skip
    // threshold, never tighter than the conventional 3 sigma.
    const double r = std::max(3.0, std::sqrt(std::max(0.0, 2.0 * std::log(255.0 * alpha))));
    const Mat3 ax = frame.axes();
    const Vec3 pc = cam.to_camera(frame.position);
    const Vec3 ac = cam.rotation * (r * frame.scale_u * ax.col(0));
    const Vec3 bc = cam.rotation * (r * frame.scale_v * ax.col(1));

    double ulo, uhi, vlo, vhi;
    // The boundary circle must stay in front of the camera for the projected
    // extremes to be finite; otherwise fall back to the whole image.
    bool ok = pc.z() - std::hypot(ac.z(), bc.z()) > kDepthEpsilon;
    ok = ok && rational_trig_extremes(cam.fx * pc.x() + cam.cx * pc.z(),
                                      cam.fx * ac.x() + cam.cx * ac.z(),
                                      cam.fx * bc.x() + cam.cx * bc.z(), pc.z(), ac.z(), bc.z(),
                                      &ulo, &uhi);
    ok = ok && rational_trig_extremes(cam.fy * pc.y() + cam.cy * pc.z(),
                                      cam.fy * ac.y() + cam.cy * ac.z(),
                                      cam.fy * bc.y() + cam.cy * bc.z(), pc.z(), ac.z(), bc.z(),
                                      &vlo, &vhi);
    if (!ok) {
        ulo = 0;
        uhi = cam.width - 1;
        vlo = 0;
        vhi = cam.height - 1;
    }
    // The screen-space filter is centered on the projected center; keeping it
    // inside explicitly guards against rounding at grazing geometry.
    ulo = std::min(ulo, pp->pixel.x());
    uhi = std::max(uhi, pp->pixel.x());
    vlo = std::min(vlo, pp->pixel.y());
    vhi = std::max(vhi, pp->pixel.y());

    *x0 = std::max(0, static_cast<int>(std::ceil(ulo - kScreenFilterDilation)));
    *x1 = std::min(cam.width - 1, static_cast<int>(std::floor(uhi + kScreenFilterDilation)));
    *y0 = std::max(0, static_cast<int>(std::ceil(vlo - kScreenFilterDilation)));
    *y1 = std::min(cam.height - 1, static_cast<int>(std::floor(vhi + kScreenFilterDilation)));
    return *x0 <= *x1 && *y0 <= *y1;
}

std::vector<SplatViewEval> eval_splats_for_view(const SplatSet& s, const ViewContext& view) {
    const CameraModel& cam = view.camera;
    const Vec3 cam_center = cam.center();
    std::vector<SplatViewEval> out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        SplatViewEval& ev = out[k];
        ev.position = s.positions[k];
        ev.scale = s.scales(k);
        ev.axes = rotation_matrix(s.orientation(k));
        ev.alpha = s.opacity(k);

        const auto pp = project(cam, ev.position);
        if (!pp) continue;
        ev.center_px = pp->pixel;
        ev.center_z = pp->depth;

        SplatFrame frame{ev.position, ev.scale.x(), ev.scale.y(), s.orientation(k)};
        if (!bound(frame, ev.alpha, cam, &ev.x0, &ev.y0, &ev.x1, &ev.y1)) continue;

        const Vec3 to_cam = cam_center - ev.position;
        ev.range = to_cam.norm();
        if (ev.range < 1e-12) continue;
        ev.e = to_cam / ev.range;
        const Vec3 tw = ev.axes.col(2);
        ev.flip = tw.dot(ev.e) >= 0.0 ? 1.0 : -1.0;
        ev.normal = ev.flip * tw;

        if (s.variant == Appearance::SH) {
            ev.basis = sh_basis(-ev.e);
            const double raw = ev.basis.dot(s.sh[k]) + 0.5;
            ev.sh_clamped = raw < 0.0;
            ev.intensity = ev.sh_clamped ? 0.0 : raw;
        } else {
            ev.albedo = s.albedo(k);
            ev.disk = disk_eval(s.variant, ev.normal.dot(view.sun), ev.normal.dot(ev.e),
                                view.sun.dot(ev.e));
            ev.intensity = ev.albedo * ev.disk.value;
        }
        ev.culled = false;
    }
    return out;
}

namespace {

struct ShadeContext {
    const std::vector<SplatViewEval>* evals;
    const CameraModel* cam;
    Eigen::RowVector3d cam_row2;
    double cam_tz;
    bool physics;
};

// Front-to-back compositing of one pixel. Candidates must already be in
// ascending center-depth order; rect_check prunes by the per-splat pixel
// rect (the exhaustive oracle passes false and visits every splat).
void shade_pixel(const ShadeContext& ctx, int x, int y, const std::uint32_t* cand, std::size_t n,
                 bool rect_check, RenderBundle* b, std::vector<TapeEntry>* tape) {
    const Ray ray = pixel_ray(*ctx.cam, Vec2(x, y));
    double T = 1.0;
    double acc_i = 0.0, acc_d = 0.0, acc_a = 0.0, acc_w = 0.0;
    Vec3 acc_n = Vec3::Zero();
    for (std::size_t idx = 0; idx < n; ++idx) {
        const SplatViewEval& ev = (*ctx.evals)[cand[idx]];
        if (rect_check && (x < ev.x0 || x > ev.x1 || y < ev.y0 || y > ev.y1)) continue;

        const Vec3 tw = ev.axes.col(2);
        const double den = tw.dot(ray.direction);
        if (std::abs(den) < 1e-9) continue;
        const double t = tw.dot(ev.position - ray.origin) / den;
        if (t <= kDepthEpsilon) continue;
        const Vec3 point = ray.origin + t * ray.direction;
        const Vec3 delta = point - ev.position;
        const double u = ev.axes.col(0).dot(delta) / ev.scale.x();
        const double v = ev.axes.col(1).dot(delta) / ev.scale.y();

        const double g1 = std::exp(-0.5 * (u * u + v * v));
        const double dx = x - ev.center_px.x();
        const double dy = y - ev.center_px.y();
        const double g2 = std::exp(-(dx * dx + dy * dy));
        const int branch = g1 >= g2 ? 0 : 1;
        const double ghat = branch == 0 ? g1 : g2;
        const double a = ev.alpha * ghat;
        if (a < kBlendSkip) continue;

        const double zhit = ctx.cam_row2 * point + ctx.cam_tz;
        const double w_i = T * a;
        acc_i += w_i * ev.intensity;
        acc_d += w_i * zhit;
        acc_n += w_i * ev.normal;
        if (ctx.physics) acc_a += w_i * ev.albedo;
        acc_w += w_i;
        if (tape)
            tape->push_back(TapeEntry{static_cast<std::int32_t>(cand[idx]), branch, u, v, ghat, a,
                                      zhit});
        T *= 1.0 - a;
        if (T < kTransmittanceStop) break;
    }
    b->intensity.at(y, x) = acc_i;
    b->depth.at(y, x) = acc_w > 0.0 ? acc_d / acc_w : -1.0;
    for (int c = 0; c < 3; ++c) b->normal[c].at(y, x) = acc_n[c];
    if (ctx.physics) b->albedo.at(y, x) = acc_a;
    b->accumulation.at(y, x) = acc_w;
}

}  // namespace

RenderBundle render(const SplatSet& s, const ViewContext& view, const RenderOptions& opts) {
    s.check();
    const CameraModel& cam = view.camera;
    const int h = cam.height, w = cam.width;
    const bool physics = is_physics(s.variant);

    RenderBundle b;
    b.intensity = Image(h, w, 0.0);
    b.depth = Image(h, w, -1.0);
    for (int c = 0; c < 3; ++c) b.normal[c] = Image(h, w, 0.0);
    if (physics) b.albedo = Image(h, w, 0.0);
    b.accumulation = Image(h, w, 0.0);
    if (h <= 0 || w <= 0) return b;

    b.per_splat = eval_splats_for_view(s, view);
    for (std::size_t k = 0; k < b.per_splat.size(); ++k)
        if (!b.per_splat[k].culled) b.order.push_back(static_cast<std::uint32_t>(k));
    std::sort(b.order.begin(), b.order.end(), [&](std::uint32_t i, std::uint32_t j) {
        const double zi = b.per_splat[i].center_z, zj = b.per_splat[j].center_z;
        return zi != zj ? zi < zj : i < j;
    });

    ShadeContext ctx;
    ctx.evals = &b.per_splat;
    ctx.cam = &cam;
    ctx.cam_row2 = cam.rotation.row(2);
    ctx.cam_tz = cam.translation.z();
    ctx.physics = physics;

    std::vector<std::vector<TapeEntry>> pixel_tapes;
    if (opts.with_tape) pixel_tapes.resize(static_cast<std::size_t>(h) * w);
    const auto tape_at = [&](int y, int x) -> std::vector<TapeEntry>* {
        return opts.with_tape ? &pixel_tapes[static_cast<std::size_t>(y) * w + x] : nullptr;
    };

    if (opts.exhaustive) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                shade_pixel(ctx, x, y, b.order.data(), b.order.size(), false, &b, tape_at(y, x));
    } else {
        const int tiles_x = (w + kTileSize - 1) / kTileSize;
        const int tiles_y = (h + kTileSize - 1) / kTileSize;
        const int n_tiles = tiles_x * tiles_y;
        std::vector<std::vector<std::uint32_t>> tile_lists(n_tiles);
        for (std::uint32_t k : b.order) {
            const SplatViewEval& ev = b.per_splat[k];
            for (int ty = ev.y0 / kTileSize; ty <= ev.y1 / kTileSize; ++ty)
                for (int tx = ev.x0 / kTileSize; tx <= ev.x1 / kTileSize; ++tx)
                    tile_lists[ty * tiles_x + tx].push_back(k);
        }
        const auto run_tile = [&](int tile) {
            const int tx = tile % tiles_x, ty = tile / tiles_x;
            const auto& list = tile_lists[tile];
            for (int y = ty * kTileSize; y < std::min(h, (ty + 1) * kTileSize); ++y)
                for (int x = tx * kTileSize; x < std::min(w, (tx + 1) * kTileSize); ++x)
                    shade_pixel(ctx, x, y, list.data(), list.size(), true, &b, tape_at(y, x));
        };
        const int threads = std::max(1, std::min(opts.threads, n_tiles));
        if (threads == 1) {
            for (int tile = 0; tile < n_tiles; ++tile) run_tile(tile);
        } else {
            // Static partition; every pixel is owned by exactly one tile so
            // the result does not depend on the thread count.
            std::vector<std::thread> pool;
            for (int tid = 0; tid < threads; ++tid)
                pool.emplace_back([&, tid] {
                    for (int tile = tid; tile < n_tiles; tile += threads) run_tile(tile);
                });
            for (auto& th : pool) th.join();
        }
    }

    // Per-image affine calibration, applied uniformly after blending.
    for (std::size_t i = 0; i < b.intensity.pixel_count(); ++i)
        b.intensity[i] = view.calibration.scale * b.intensity[i] + view.calibration.bias;

    if (opts.with_tape) {
        b.has_tape = true;
        b.tape_offsets.resize(static_cast<std::size_t>(h) * w + 1);
        b.tape_offsets[0] = 0;
        std::size_t total = 0;
        for (std::size_t i = 0; i < pixel_tapes.size(); ++i) {
            total += pixel_tapes[i].size();
            b.tape_offsets[i + 1] = static_cast<std::uint32_t>(total);
        }
        b.tape.reserve(total);
        for (auto& pt : pixel_tapes) b.tape.insert(b.tape.end(), pt.begin(), pt.end());
    }
    return b;
}

}  // namespace psplat
