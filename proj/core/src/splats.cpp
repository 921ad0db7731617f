#include "photosplat/splats.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

namespace psplat {

void SplatSet::reserve(std::size_t n) {
    positions.reserve(n);
    log_scales.reserve(n);
    rotations.reserve(n);
    raw_opacities.reserve(n);
    raw_albedos.reserve(n);
    if (variant == Appearance::SH) sh.reserve(n);
    grad_accum.reserve(n);
    grad_count.reserve(n);
}

void SplatSet::push_back(const Vec3& p, const Vec2& log_scale, const Vec4& rot, double raw_opacity,
                         double raw_albedo, const ShCoeffs& coeffs) {
    positions.push_back(p);
    log_scales.push_back(log_scale);
    rotations.push_back(rot);
    raw_opacities.push_back(raw_opacity);
    raw_albedos.push_back(raw_albedo);
    if (variant == Appearance::SH) sh.push_back(coeffs);
    grad_accum.push_back(0.0);
    grad_count.push_back(0);
}

void SplatSet::reset_grad_stats() {
    std::fill(grad_accum.begin(), grad_accum.end(), 0.0);
    std::fill(grad_count.begin(), grad_count.end(), 0);
}

void SplatSet::check() const {
    const std::size_t n = size();
    const bool ok = log_scales.size() == n && rotations.size() == n &&
                    raw_opacities.size() == n && raw_albedos.size() == n &&
                    grad_accum.size() == n && grad_count.size() == n &&
                    (variant != Appearance::SH || sh.size() == n);
    if (!ok) throw ShapeMismatchError("SplatSet arrays out of sync");
}

Vec3 SplatSet::bbox_min() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    for (const auto& p : positions) lo = lo.cwiseMin(p);
    return lo;
}

Vec3 SplatSet::bbox_max() const {
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const auto& p : positions) hi = hi.cwiseMax(p);
    return hi;
}

double SplatSet::extent() const {
    if (positions.empty()) return 0.0;
    return (bbox_max() - bbox_min()).norm();
}

namespace {

Vec4 random_unit_quaternion(Rng& rng) {
    Vec4 q;
    do {
        q = Vec4(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    } while (q.norm() < 1e-9);
    return q / q.norm();
}

// Mean distance to the 3 nearest neighbours, brute force; init point
// clouds are a few thousand points at most.
std::vector<double> knn_mean_distance(const std::vector<Vec3>& pts, int k) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, 0.0);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) d2[j] = (pts[j] - pts[i]).squaredNorm();
        d2[i] = std::numeric_limits<double>::max();
        const int kk = std::min<std::size_t>(k, n - 1);
        std::partial_sort(d2.begin(), d2.begin() + kk, d2.end());
        double sum = 0.0;
        for (int m = 0; m < kk; ++m) sum += std::sqrt(d2[m]);
        out[i] = kk > 0 ? sum / kk : 0.0;
    }
    return out;
}

}  // namespace

SplatSet init_from_points(const std::vector<Vec3>& points, const InitOptions& opts) {
    std::vector<Vec3> pts = points;
    Rng rng(opts.seed);
    if (pts.empty()) {
        if (opts.random_count <= 0)
            throw EmptyInitError("init_from_points: no points and no random count");
        pts.reserve(opts.random_count);
        for (int i = 0; i < opts.random_count; ++i)
            pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    }

    Vec3 lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double diag = (hi - lo).norm();
    const double fallback_scale = 0.01 * (diag > 0.0 ? diag : 1.0);

    std::vector<double> nn = knn_mean_distance(pts, 3);

    SplatSet s;
    s.variant = opts.variant;
    s.reserve(pts.size());
    const double raw_opacity = logit(opts.init_opacity);
    const double raw_albedo = std::log(opts.init_albedo);
    ShCoeffs coeffs = ShCoeffs::Zero();
    if (opts.variant == Appearance::SH) {
        coeffs[0] = (opts.mean_intensity - 0.5) / sh_basis(Vec3(0, 0, 1))[0];
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double scale = nn[i] > 0.0 ? nn[i] : fallback_scale;
        s.push_back(pts[i], Vec2::Constant(std::log(scale)), random_unit_quaternion(rng),
                    raw_opacity, raw_albedo, coeffs);
    }
    s.check();
    return s;
}

DensifyResult densify_and_prune(const SplatSet& s, const DensifyOptions& opts, Rng& rng) {
    s.check();
    DensifyResult out;
    out.splats.variant = s.variant;
    out.splats.reserve(s.size());

    const auto keep = [&](std::size_t k, const Vec3& pos, const Vec2& log_scale, int parent) {
        out.splats.push_back(pos, log_scale, s.rotations[k], s.raw_opacities[k], s.raw_albedos[k],
                             s.variant == Appearance::SH ? s.sh[k] : ShCoeffs::Zero());
        out.parent.push_back(parent);
    };

    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s.opacity(k) < opts.opacity_floor) {
            ++out.pruned;
            continue;
        }
        const double mean_grad = s.grad_count[k] > 0 ? s.grad_accum[k] / s.grad_count[k] : 0.0;
        if (mean_grad <= opts.grad_threshold) {
            keep(k, s.positions[k], s.log_scales[k], static_cast<int>(k));
            continue;
        }
        const Vec2 sc = s.scales(k);
        if (sc.maxCoeff() < opts.clone_scale_fraction * opts.scene_extent) {
            keep(k, s.positions[k], s.log_scales[k], static_cast<int>(k));
            keep(k, s.positions[k], s.log_scales[k], -1);
            ++out.cloned;
        } else {
            const Vec2 child_scale =
                s.log_scales[k] - Vec2::Constant(std::log(opts.split_scale_divisor));
            const Mat3 r = rotation_matrix(s.orientation(k));
            for (int c = 0; c < 2; ++c) {
                const Vec3 offset =
                    r.col(0) * (sc.x() * rng.normal()) + r.col(1) * (sc.y() * rng.normal());
                keep(k, s.positions[k] + offset, child_scale, c == 0 ? static_cast<int>(k) : -1);
            }
            ++out.split;
        }
    }
    out.splats.reset_grad_stats();
    out.splats.check();
    return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'S', 'C', '1'};

void write_f32_column(std::ofstream& f, const std::vector<float>& col) {
    f.write(reinterpret_cast<const char*>(col.data()),
            static_cast<std::streamsize>(col.size() * sizeof(float)));
}

std::vector<float> read_f32_column(std::ifstream& f, std::size_t n) {
    std::vector<float> col(n);
    f.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!f) throw MissingFileError("checkpoint truncated");
    return col;
}

}  // namespace

void save_checkpoint(const SplatSet& s, const std::string& path) {
    s.check();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot write checkpoint: " + path);
    f.write(kCheckpointMagic, 4);
    const std::uint32_t variant = static_cast<std::uint32_t>(s.variant);
    const std::uint64_t n = s.size();
    f.write(reinterpret_cast<const char*>(&variant), 4);
    f.write(reinterpret_cast<const char*>(&n), 8);

    const auto column = [&](auto getter) {
        std::vector<float> col(n);
        for (std::size_t k = 0; k < n; ++k) col[k] = static_cast<float>(getter(k));
        write_f32_column(f, col);
    };
    for (int d = 0; d < 3; ++d)
        column([&](std::size_t k) { return s.positions[k][d]; });
    for (int d = 0; d < 2; ++d)
        column([&](std::size_t k) { return s.log_scales[k][d]; });
    for (int d = 0; d < 4; ++d)
        column([&](std::size_t k) { return s.rotations[k][d]; });
    column([&](std::size_t k) { return s.raw_opacities[k]; });
    if (s.variant == Appearance::SH) {
        for (int d = 0; d < kShCoeffCount; ++d)
            column([&](std::size_t k) { return s.sh[k][d]; });
    } else {
        column([&](std::size_t k) { return s.raw_albedos[k]; });
    }
}

SplatSet load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot read checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw MalformedPoseError("not a checkpoint file: " + path);
    std::uint32_t variant = 0;
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&variant), 4);
    f.read(reinterpret_cast<char*>(&n), 8);
    if (!f || variant > 3) throw MalformedPoseError("bad checkpoint header");

    SplatSet s;
    s.variant = static_cast<Appearance>(variant);
    s.positions.resize(n);
    s.log_scales.resize(n);
    s.rotations.resize(n);
    s.raw_opacities.resize(n);
    s.raw_albedos.assign(n, 0.0);
    if (s.variant == Appearance::SH) s.sh.assign(n, ShCoeffs::Zero());
    s.grad_accum.assign(n, 0.0);
    s.grad_count.assign(n, 0);

    const auto column = [&](auto setter) {
        const auto col = read_f32_column(f, n);
        for (std::size_t k = 0; k < n; ++k) setter(k, static_cast<double>(col[k]));
    };
    for (int d = 0; d < 3; ++d)
        column([&](std::size_t k, double v) { s.positions[k][d] = v; });
    for (int d = 0; d < 2; ++d)
        column([&](std::size_t k, double v) { s.log_scales[k][d] = v; });
    for (int d = 0; d < 4; ++d)
        column([&](std::size_t k, double v) { s.rotations[k][d] = v; });
    column([&](std::size_t k, double v) { s.raw_opacities[k] = v; });
    if (s.variant == Appearance::SH) {
        for (int d = 0; d < kShCoeffCount; ++d)
            column([&](std::size_t k, double v) { s.sh[k][d] = v; });
    } else {
        column([&](std::size_t k, double v) { s.raw_albedos[k] = v; });
    }
    s.check();
    return s;
}

void export_point_cloud_ply(const SplatSet& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot write PLY: " + path);
    f << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << s.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "property float opacity\nproperty float albedo\n"
      << "end_header\n";
    for (std::size_t k = 0; k < s.size(); ++k) {
        const Vec3 n = rotation_matrix(s.orientation(k)).col(2);
        const float row[8] = {static_cast<float>(s.positions[k].x()),
                              static_cast<float>(s.positions[k].y()),
                              static_cast<float>(s.positions[k].z()),
                              static_cast<float>(n.x()),
                              static_cast<float>(n.y()),
                              static_cast<float>(n.z()),
                              static_cast<float>(s.opacity(k)),
                              static_cast<float>(s.albedo(k))};
        f.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
}

}  // namespace psplat
