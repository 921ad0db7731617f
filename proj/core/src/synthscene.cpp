#include "photosplat/synthscene.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace psplat {

namespace {

constexpr double kDegree = M_PI / 180.0;

// Cell index and local coordinate for a clamped bilinear lookup.
struct CellRef {
    int ix, iy;
    double u, v;  // in [0, 1] within the cell
};

CellRef locate(const Heightfield& h, double x, double y) {
    const double sp = h.spacing();
    const double gx = std::clamp((x + 0.5 * h.size) / sp, 0.0, static_cast<double>(h.n - 1));
    const double gy = std::clamp((y + 0.5 * h.size) / sp, 0.0, static_cast<double>(h.n - 1));
    CellRef c;
    c.ix = std::min(static_cast<int>(gx), h.n - 2);
    c.iy = std::min(static_cast<int>(gy), h.n - 2);
    c.u = gx - c.ix;
    c.v = gy - c.iy;
    return c;
}

}  // namespace

double Heightfield::height(double x, double y) const {
    const CellRef c = locate(*this, x, y);
    const double z00 = z[c.iy * n + c.ix];
    const double z10 = z[c.iy * n + c.ix + 1];
    const double z01 = z[(c.iy + 1) * n + c.ix];
    const double z11 = z[(c.iy + 1) * n + c.ix + 1];
    return z00 * (1 - c.u) * (1 - c.v) + z10 * c.u * (1 - c.v) + z01 * (1 - c.u) * c.v +
           z11 * c.u * c.v;
}

Vec3 Heightfield::normal(double x, double y) const {
    const CellRef c = locate(*this, x, y);
    const double z00 = z[c.iy * n + c.ix];
    const double z10 = z[c.iy * n + c.ix + 1];
    const double z01 = z[(c.iy + 1) * n + c.ix];
    const double z11 = z[(c.iy + 1) * n + c.ix + 1];
    const double sp = spacing();
    const double dzdx = ((z10 - z00) * (1 - c.v) + (z11 - z01) * c.v) / sp;
    const double dzdy = ((z01 - z00) * (1 - c.u) + (z11 - z10) * c.u) / sp;
    return Vec3(-dzdx, -dzdy, 1.0).normalized();
}

double Heightfield::albedo_at(double x, double y) const {
    const CellRef c = locate(*this, x, y);
    const double a00 = albedo[c.iy * n + c.ix];
    const double a10 = albedo[c.iy * n + c.ix + 1];
    const double a01 = albedo[(c.iy + 1) * n + c.ix];
    const double a11 = albedo[(c.iy + 1) * n + c.ix + 1];
    return a00 * (1 - c.u) * (1 - c.v) + a10 * c.u * (1 - c.v) + a01 * (1 - c.u) * c.v +
           a11 * c.u * c.v;
}

double Heightfield::min_height() const { return *std::min_element(z.begin(), z.end()); }
double Heightfield::max_height() const { return *std::max_element(z.begin(), z.end()); }

void Heightfield::check() const {
    if (n < 2) throw ValidationError("heightfield grid must be at least 2x2");
    if (!(size > 0)) throw ValidationError("heightfield size must be positive");
    const std::size_t cells = static_cast<std::size_t>(n) * n;
    if (z.size() != cells || albedo.size() != cells)
        throw ValidationError("heightfield grid arrays must be n*n");
    for (double v : z)
        if (!std::isfinite(v)) throw ValidationError("heightfield elevation not finite");
    for (double a : albedo)
        if (!(a > 0.0 && a <= 1.0)) throw ValidationError("heightfield albedo outside (0, 1]");
}

void TerrainSpec::check() const {
    if (grid_n < 2) throw ValidationError("grid_n must be at least 2");
    if (!(size > 0)) throw ValidationError("size must be positive");
    if (crater_count < 0 || spot_count < 0) throw ValidationError("feature counts must be >= 0");
    if (!(crater_radius_min > 0 && crater_radius_max >= crater_radius_min))
        throw ValidationError("crater radius range must be positive and ordered");
    if (!(spot_radius_min > 0 && spot_radius_max >= spot_radius_min))
        throw ValidationError("spot radius range must be positive and ordered");
    if (!(crater_depth_frac > 0 && rim_height_frac >= 0 && rim_width_frac > 0))
        throw ValidationError("crater profile fractions must be positive");
    if (!(base_albedo > 0 && base_albedo <= 1))
        throw ValidationError("base_albedo must be in (0, 1]");
    if (!(spot_amplitude >= 0 && spot_amplitude < 1))
        throw ValidationError("spot_amplitude must be in [0, 1)");
}

Heightfield make_terrain(const TerrainSpec& spec, std::uint64_t seed) {
    spec.check();
    Rng rng(seed);

    Heightfield h;
    h.size = spec.size;
    h.n = spec.grid_n;
    h.base_albedo = spec.base_albedo;
    h.z.assign(static_cast<std::size_t>(h.n) * h.n, 0.0);
    h.albedo.assign(static_cast<std::size_t>(h.n) * h.n, spec.base_albedo);

    for (int k = 0; k < spec.crater_count; ++k) {
        Crater c;
        c.center = Vec2(rng.uniform(-0.35, 0.35) * spec.size, rng.uniform(-0.35, 0.35) * spec.size);
        c.radius = rng.uniform(spec.crater_radius_min, spec.crater_radius_max);
        c.depth = spec.crater_depth_frac * c.radius;
        h.craters.push_back(c);
    }

    struct Spot {
        Vec2 center;
        double sigma, amp;
    };
    std::vector<Spot> spots;
    for (int k = 0; k < spec.spot_count; ++k) {
        Spot s;
        s.center = Vec2(rng.uniform(-0.45, 0.45) * spec.size, rng.uniform(-0.45, 0.45) * spec.size);
        s.sigma = 0.5 * rng.uniform(spec.spot_radius_min, spec.spot_radius_max);
        s.amp = rng.uniform(-spec.spot_amplitude, spec.spot_amplitude);
        spots.push_back(s);
    }

    for (int iy = 0; iy < h.n; ++iy) {
        const double y = h.node_coord(iy);
        for (int ix = 0; ix < h.n; ++ix) {
            const double x = h.node_coord(ix);
            double elev = 0.0;
            for (const Crater& c : h.craters) {
                const double rho = (Vec2(x, y) - c.center).norm();
                if (rho < c.radius) {
                    const double q = rho / c.radius;
                    elev -= c.depth * (1.0 - q * q);  // parabolic bowl
                }
                const double rim_sigma = spec.rim_width_frac * c.radius;
                const double dr = (rho - c.radius) / rim_sigma;
                elev += spec.rim_height_frac * c.depth * std::exp(-0.5 * dr * dr);
            }
            double alb = spec.base_albedo;
            for (const Spot& s : spots) {
                const double rho2 = (Vec2(x, y) - s.center).squaredNorm();
                alb *= 1.0 + s.amp * std::exp(-0.5 * rho2 / (s.sigma * s.sigma));
            }
            h.z[iy * h.n + ix] = elev;
            // Cap keeps oracle intensities below 1 even for the
            // Lommel-Seeliger peak at oblique geometry.
            h.albedo[iy * h.n + ix] = std::clamp(alb, 0.05, 0.8);
        }
    }
    return h;
}

TerrainTracer::TerrainTracer(const Heightfield& h) : h_(&h) {
    h.check();
    const double margin = h.spacing();
    zlo_ = h.min_height() - margin;
    zhi_ = h.max_height() + margin;
}

namespace {

// Intersects [lo, hi] along one axis with the running ray interval.
bool clip_axis(double o, double d, double lo, double hi, double* t0, double* t1) {
    if (std::abs(d) < 1e-15) return o >= lo && o <= hi;
    double ta = (lo - o) / d;
    double tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    *t0 = std::max(*t0, ta);
    *t1 = std::min(*t1, tb);
    return *t0 <= *t1;
}

}  // namespace

TerrainHit TerrainTracer::trace(const Ray& ray) const {
    const Heightfield& h = *h_;
    const double half = 0.5 * h.size;
    double t0 = kDepthEpsilon, t1 = std::numeric_limits<double>::max();
    if (!clip_axis(ray.origin.x(), ray.direction.x(), -half, half, &t0, &t1) ||
        !clip_axis(ray.origin.y(), ray.direction.y(), -half, half, &t0, &t1) ||
        !clip_axis(ray.origin.z(), ray.direction.z(), zlo_, zhi_, &t0, &t1))
        return {};

    const auto above = [&](double t) {
        const Vec3 p = ray.origin + t * ray.direction;
        return p.z() - h.height(p.x(), p.y());
    };
    if (above(t0) <= 0.0) return {};  // entering below ground; treated as a miss

    // Lateral steps of half a grid cell cannot skip a bilinear feature.
    const double maxc = std::max({std::abs(ray.direction.x()), std::abs(ray.direction.y()),
                                  std::abs(ray.direction.z())});
    const double dt = 0.5 * h.spacing() / maxc;

    double t_prev = t0;
    bool bracketed = false;
    double lo = 0.0, hi = 0.0;
    for (double t = t0 + dt;; t += dt) {
        if (t > t1) t = t1;
        if (above(t) <= 0.0) {
            lo = t_prev;
            hi = t;
            bracketed = true;
            break;
        }
        if (t >= t1) break;
        t_prev = t;
    }
    if (!bracketed) return {};

    const double tol = 1e-6 * h.size;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) > 0.0 ? lo : hi) = mid;
    }

    TerrainHit hit;
    hit.hit = true;
    hit.t = 0.5 * (lo + hi);
    hit.position = ray.origin + hit.t * ray.direction;
    hit.normal = h.normal(hit.position.x(), hit.position.y());
    hit.albedo = h.albedo_at(hit.position.x(), hit.position.y());
    return hit;
}

TerrainHit trace_terrain(const Heightfield& h, const Ray& ray) {
    return TerrainTracer(h).trace(ray);
}

OracleMaps oracle_render(const Heightfield& h, const CameraModel& cam, const SunSpec& sun,
                         Appearance variant, double scale, double bias, bool shadows) {
    if (!is_physics(variant))
        throw ValidationError("oracle render requires a physics reflectance variant");
    const TerrainTracer tracer(h);

    OracleMaps m;
    m.intensity = Image(cam.height, cam.width, 0.0);
    m.depth = Image(cam.height, cam.width, -1.0);
    for (auto& c : m.normal) c = Image(cam.height, cam.width, 0.0);
    m.albedo = Image(cam.height, cam.width, 0.0);

    const double shadow_lift = 1e-3 * h.spacing();
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Ray ray = pixel_ray(cam, Vec2(x, y));
            const TerrainHit hit = tracer.trace(ray);
            if (!hit.hit) continue;

            const Vec3 to_cam = -ray.direction;
            double d = disk_eval(variant, hit.normal.dot(sun.direction), hit.normal.dot(to_cam),
                                 sun.direction.dot(to_cam))
                           .value;
            if (shadows && d > 0.0) {
                const Ray sray{hit.position + shadow_lift * hit.normal, sun.direction};
                if (tracer.trace(sray).hit) d = 0.0;
            }
            m.intensity.at(y, x) = scale * (hit.albedo * d) + bias;
            m.depth.at(y, x) = cam.to_camera(hit.position).z();
            for (int c = 0; c < 3; ++c) m.normal[c].at(y, x) = hit.normal[c];
            m.albedo.at(y, x) = hit.albedo;
        }
    }
    return m;
}

void DatasetSpec::check() const {
    if (n_views < 3) throw ValidationError("n_views must be at least 3");
    if (orbit.width < 1 || orbit.height < 1) throw ValidationError("image size must be positive");
    if (!(orbit.distance > 0)) throw ValidationError("orbit distance must be positive");
    if (!(orbit.fov_deg > 0 && orbit.fov_deg < 180))
        throw ValidationError("fov_deg must be in (0, 180)");
    if (!(sun.phase_min_deg >= 0 && sun.phase_max_deg >= sun.phase_min_deg &&
          sun.phase_max_deg < 180))
        throw ValidationError("phase range must be ordered within [0, 180)");
    if (gt_point_count < 1 || init_point_count < 0)
        throw ValidationError("point counts must be positive");
    if (!is_physics(variant))
        throw ValidationError("dataset rendering requires a physics reflectance variant");
}

int held_out_view_count(int n_views) { return std::max(1, n_views / 10); }

namespace {

Vec3 rotate_about(const Vec3& v, const Vec3& axis, double angle) {
    return rotation_matrix(UnitQuaternion::from_axis_angle(axis, angle)) * v;
}

// Sun direction at an exact phase angle from the camera direction, rotated
// within the vertical plane. The lower candidate is preferred (stronger
// shading) unless it dips under the elevation floor.
Vec3 sun_at_phase(const Vec3& e_cam, double phase, double min_elevation) {
    Vec3 axis = Vec3(0, 0, 1).cross(e_cam);
    if (axis.norm() < 1e-9) axis = Vec3(1, 0, 0);
    axis.normalize();
    const Vec3 a = rotate_about(e_cam, axis, phase);
    const Vec3 b = rotate_about(e_cam, axis, -phase);
    const Vec3& lower = a.z() <= b.z() ? a : b;
    const Vec3& upper = a.z() <= b.z() ? b : a;
    const Vec3 pick = std::asin(std::clamp(lower.z(), -1.0, 1.0)) >= min_elevation ? lower : upper;
    return pick.normalized();
}

}  // namespace

SceneDataset make_dataset(const Heightfield& h, const DatasetSpec& spec) {
    spec.check();
    h.check();
    Rng rng(spec.seed);

    const OrbitSpec& orbit = spec.orbit;
    const double fx = 0.5 * orbit.width / std::tan(0.5 * orbit.fov_deg * kDegree);
    const int n_test = held_out_view_count(spec.n_views);

    SceneDataset out;
    out.name = "synthetic";
    out.has_gt = true;

    for (int i = 0; i < spec.n_views; ++i) {
        const double frac = spec.n_views > 1 ? static_cast<double>(i) / (spec.n_views - 1) : 0.0;
        const double az = (orbit.azimuth_start_deg +
                           frac * (orbit.azimuth_end_deg - orbit.azimuth_start_deg) +
                           rng.uniform(-2.0, 2.0)) *
                          kDegree;
        const double el =
            (orbit.elevation_deg +
             rng.uniform(-orbit.elevation_jitter_deg, orbit.elevation_jitter_deg)) *
            kDegree;
        const Vec3 eye = orbit.distance *
                         Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                              std::sin(el));

        ViewContext view;
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", i);
        view.name = name;
        view.camera = CameraModel::look_at(eye, Vec3::Zero(), Vec3(0, 0, 1), fx, fx, orbit.width,
                                           orbit.height);
        const double phase = rng.uniform(spec.sun.phase_min_deg, spec.sun.phase_max_deg) * kDegree;
        view.sun = sun_at_phase(eye.normalized(), phase, spec.sun.min_elevation_deg * kDegree);
        view.split = i >= spec.n_views - n_test ? "test" : "train";

        OracleMaps maps =
            oracle_render(h, view.camera, SunSpec{view.sun}, spec.variant, 1.0, 0.0, spec.shadows);
        view.image = std::move(maps.intensity);
        out.views.push_back(std::move(view));

        ViewGroundTruth gt;
        gt.normal = std::move(maps.normal);
        gt.albedo = std::move(maps.albedo);
        out.gt.push_back(std::move(gt));
    }

    // Surface samples keep a margin so bilinear lookups stay interior.
    const double span = 0.49 * h.size;
    for (int k = 0; k < spec.gt_point_count; ++k) {
        const double x = rng.uniform(-span, span);
        const double y = rng.uniform(-span, span);
        out.gt_points.emplace_back(x, y, h.height(x, y));
    }
    const double noise = spec.init_noise_frac * h.size;
    for (int k = 0; k < spec.init_point_count; ++k) {
        const double x = rng.uniform(-span, span);
        const double y = rng.uniform(-span, span);
        Vec3 p(x, y, h.height(x, y));
        p += noise * Vec3(rng.normal(), rng.normal(), rng.normal());
        out.init_points.push_back(p);
    }

    out.check();
    return out;
}

TerrainSpec default_terrain() { return TerrainSpec{}; }

DatasetSpec default_dataset_spec(Appearance variant, std::uint64_t seed) {
    DatasetSpec spec;
    spec.variant = variant;
    spec.seed = seed;
    return spec;
}

}  // namespace psplat
