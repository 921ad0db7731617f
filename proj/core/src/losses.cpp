#include "photosplat/losses.hpp"

#include <cmath>

namespace psplat {

void LossConfig::check() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in [0,1]");
    if (!(beta >= 0.0)) throw ValidationError("beta must be >= 0");
    if (ssim_window < 3 || ssim_window % 2 == 0)
        throw ValidationError("SSIM window must be odd and >= 3");
    if (!(ssim_sigma > 0.0)) throw ValidationError("SSIM sigma must be positive");
}

namespace {

// Symmetric (edge-repeating mirror) index: ...cba|abc...|cba...
int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> g(window);
    const int r = window / 2;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        g[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

Image conv_rows(const Image& in, const std::vector<double>& g) {
    const int h = in.height(), w = in.width(), r = static_cast<int>(g.size()) / 2;
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += g[i + r] * in.at(y, reflect_index(x + i, w));
            out.at(y, x) = s;
        }
    return out;
}

Image conv_cols(const Image& in, const std::vector<double>& g) {
    const int h = in.height(), w = in.width(), r = static_cast<int>(g.size()) / 2;
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += g[i + r] * in.at(reflect_index(y + i, h), x);
            out.at(y, x) = s;
        }
    return out;
}

Image conv2(const Image& in, const std::vector<double>& g) { return conv_cols(conv_rows(in, g), g); }

// Exact adjoints of the padded convolutions: scatter with the same taps.
Image conv_rows_adj(const Image& in, const std::vector<double>& g) {
    const int h = in.height(), w = in.width(), r = static_cast<int>(g.size()) / 2;
    Image out(h, w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = in.at(y, x);
            for (int i = -r; i <= r; ++i) out.at(y, reflect_index(x + i, w)) += g[i + r] * v;
        }
    return out;
}

Image conv_cols_adj(const Image& in, const std::vector<double>& g) {
    const int h = in.height(), w = in.width(), r = static_cast<int>(g.size()) / 2;
    Image out(h, w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = in.at(y, x);
            for (int i = -r; i <= r; ++i) out.at(reflect_index(y + i, h), x) += g[i + r] * v;
        }
    return out;
}

Image conv2_adj(const Image& in, const std::vector<double>& g) {
    return conv_rows_adj(conv_cols_adj(in, g), g);
}

struct SsimFields {
    Image mu_x, mu_y, sxx, syy, sxy, map;
    double mean = 0.0;
};

SsimFields ssim_fields(const Image& x, const Image& y, const LossConfig& cfg) {
    const std::vector<double> g = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
    SsimFields f;
    f.mu_x = conv2(x, g);
    f.mu_y = conv2(y, g);
    Image xx(x.height(), x.width()), yy(x.height(), x.width()), xy(x.height(), x.width());
    for (std::size_t i = 0; i < x.pixel_count(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    f.sxx = conv2(xx, g);
    f.syy = conv2(yy, g);
    f.sxy = conv2(xy, g);
    f.map = Image(x.height(), x.width());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.pixel_count(); ++i) {
        const double mx = f.mu_x[i], my = f.mu_y[i];
        const double vx = f.sxx[i] - mx * mx;
        const double vy = f.syy[i] - my * my;
        const double cxy = f.sxy[i] - mx * my;
        const double a1 = 2.0 * mx * my + cfg.ssim_c1;
        const double a2 = 2.0 * cxy + cfg.ssim_c2;
        const double b1 = mx * mx + my * my + cfg.ssim_c1;
        const double b2 = vx + vy + cfg.ssim_c2;
        f.map[i] = (a1 * a2) / (b1 * b2);
        sum += f.map[i];
    }
    f.mean = sum / static_cast<double>(x.pixel_count());
    return f;
}

}  // namespace

double mssim(const Image& a, const Image& b, const LossConfig& cfg) {
    if (!a.same_shape(b)) throw ShapeMismatchError("mssim: image shapes differ");
    if (a.empty()) throw ShapeMismatchError("mssim: empty images");
    return ssim_fields(a, b, cfg).mean;
}

IntensityLoss loss_intensity(const Image& render, const Image& truth, const LossConfig& cfg) {
    cfg.check();
    if (!render.same_shape(truth)) throw ShapeMismatchError("loss_intensity: image shapes differ");
    if (render.empty()) throw ShapeMismatchError("loss_intensity: empty images");
    const double inv_n = 1.0 / static_cast<double>(render.pixel_count());

    IntensityLoss out;
    out.d_render = Image(render.height(), render.width(), 0.0);

    double l1 = 0.0;
    for (std::size_t i = 0; i < render.pixel_count(); ++i) {
        const double d = render[i] - truth[i];
        l1 += std::abs(d);
        out.d_render[i] = (1.0 - cfg.lambda) * inv_n * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
    out.l1 = l1 * inv_n;

    if (cfg.lambda > 0.0) {
        const std::vector<double> g = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
        const SsimFields f = ssim_fields(render, truth, cfg);
        out.ssim = f.mean;
        // d SSIM_p / d x_q = W_pq (alpha_p + beta_p (y_q - mu_y p) + gamma_p (x_q - mu_x p))
        Image al(render.height(), render.width()), be(render.height(), render.width()),
            ga(render.height(), render.width()), be_my(render.height(), render.width()),
            ga_mx(render.height(), render.width());
        for (std::size_t i = 0; i < render.pixel_count(); ++i) {
            const double mx = f.mu_x[i], my = f.mu_y[i];
            const double vx = f.sxx[i] - mx * mx;
            const double vy = f.syy[i] - my * my;
            const double cxy = f.sxy[i] - mx * my;
            const double a1 = 2.0 * mx * my + cfg.ssim_c1;
            const double a2 = 2.0 * cxy + cfg.ssim_c2;
            const double b1 = mx * mx + my * my + cfg.ssim_c1;
            const double b2 = vx + vy + cfg.ssim_c2;
            const double s = f.map[i];
            al[i] = 2.0 * my * a2 / (b1 * b2) - 2.0 * mx * s / b1;
            be[i] = 2.0 * a1 / (b1 * b2);
            ga[i] = -2.0 * s / b2;
            be_my[i] = be[i] * my;
            ga_mx[i] = ga[i] * mx;
        }
        const Image t_al = conv2_adj(al, g);
        const Image t_be = conv2_adj(be, g);
        const Image t_ga = conv2_adj(ga, g);
        const Image t_be_my = conv2_adj(be_my, g);
        const Image t_ga_mx = conv2_adj(ga_mx, g);
        for (std::size_t i = 0; i < render.pixel_count(); ++i) {
            const double dmssim = inv_n * (t_al[i] + truth[i] * t_be[i] - t_be_my[i] +
                                           render[i] * t_ga[i] - t_ga_mx[i]);
            out.d_render[i] -= cfg.lambda * dmssim;
        }
    }
    out.value = (1.0 - cfg.lambda) * out.l1 + cfg.lambda * (1.0 - out.ssim);
    return out;
}

NormalLoss loss_normal(const RenderBundle& bundle, const CameraModel& cam) {
    const int h = bundle.depth.height(), w = bundle.depth.width();
    if (h != cam.height || w != cam.width)
        throw ShapeMismatchError("loss_normal: bundle does not match camera size");

    NormalLoss out;
    out.d_accumulation = Image(h, w, 0.0);
    for (int c = 0; c < 3; ++c) out.d_normal[c] = Image(h, w, 0.0);
    out.d_depth = Image(h, w, 0.0);

    const auto ray_cam = [&](int x, int y) {
        return Vec3((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
    };
    const auto valid = [&](int x, int y) { return bundle.depth.at(y, x) >= 0.0; };

    // First pass: count and sum; the normalization constant is needed before
    // gradients can be written, so the geometry is recomputed in pass two.
    struct PixelTerm {
        int x, y;
        Vec3 a, b, m, mhat, nd_world;
        double sign, mlen;
    };
    std::vector<PixelTerm> terms;
    double sum = 0.0;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            if (!valid(x, y) || !valid(x - 1, y) || !valid(x + 1, y) || !valid(x, y - 1) ||
                !valid(x, y + 1))
                continue;
            PixelTerm t;
            t.x = x;
            t.y = y;
            const Vec3 pxp = bundle.depth.at(y, x + 1) * ray_cam(x + 1, y);
            const Vec3 pxm = bundle.depth.at(y, x - 1) * ray_cam(x - 1, y);
            const Vec3 pyp = bundle.depth.at(y + 1, x) * ray_cam(x, y + 1);
            const Vec3 pym = bundle.depth.at(y - 1, x) * ray_cam(x, y - 1);
            t.a = 0.5 * (pxp - pxm);
            t.b = 0.5 * (pyp - pym);
            t.m = t.a.cross(t.b);
            t.mlen = t.m.norm();
            if (t.mlen < 1e-18) continue;
            t.mhat = t.m / t.mlen;
            t.sign = t.mhat.dot(ray_cam(x, y)) > 0.0 ? -1.0 : 1.0;
            t.nd_world = cam.rotation.transpose() * (t.sign * t.mhat);
            const Vec3 blended(bundle.normal[0].at(y, x), bundle.normal[1].at(y, x),
                               bundle.normal[2].at(y, x));
            sum += bundle.accumulation.at(y, x) - blended.dot(t.nd_world);
            terms.push_back(t);
        }
    }
    out.valid_count = static_cast<int>(terms.size());
    if (terms.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(terms.size());
    out.value = sum * inv_n;

    for (const PixelTerm& t : terms) {
        out.d_accumulation.at(t.y, t.x) += inv_n;
        const Vec3 blended(bundle.normal[0].at(t.y, t.x), bundle.normal[1].at(t.y, t.x),
                           bundle.normal[2].at(t.y, t.x));
        for (int c = 0; c < 3; ++c) out.d_normal[c].at(t.y, t.x) -= inv_n * t.nd_world[c];

        const Vec3 g_nd = -inv_n * blended;               // d value / d nd_world
        const Vec3 g_cam = cam.rotation * g_nd;           // to camera frame
        const Vec3 g_mhat = t.sign * g_cam;
        const Vec3 g_m = (g_mhat - t.mhat * t.mhat.dot(g_mhat)) / t.mlen;
        const Vec3 g_a = t.b.cross(g_m);
        const Vec3 g_b = g_m.cross(t.a);
        out.d_depth.at(t.y, t.x + 1) += 0.5 * g_a.dot(ray_cam(t.x + 1, t.y));
        out.d_depth.at(t.y, t.x - 1) -= 0.5 * g_a.dot(ray_cam(t.x - 1, t.y));
        out.d_depth.at(t.y + 1, t.x) += 0.5 * g_b.dot(ray_cam(t.x, t.y + 1));
        out.d_depth.at(t.y - 1, t.x) -= 0.5 * g_b.dot(ray_cam(t.x, t.y - 1));
    }
    return out;
}

}  // namespace psplat
