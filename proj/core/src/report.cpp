#include "photosplat/report.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "photosplat/icp.hpp"
#include "photosplat/losses.hpp"
#include "photosplat/mesh.hpp"
#include "photosplat/rasterizer.hpp"

namespace psplat {

void MetricReport::check() const {
    for (const SplitMetrics* s : {&train, &test}) {
        if (s->normal_error_deg && !(*s->normal_error_deg >= 0.0 && *s->normal_error_deg <= 180.0))
            throw ValidationError("normal error outside [0, 180] degrees");
        if (s->albedo_rel_error && !(*s->albedo_rel_error >= 0.0))
            throw ValidationError("albedo error must be nonnegative");
        if (!s->psnr_infinite && !std::isfinite(s->psnr_db))
            throw ValidationError("PSNR must be finite or flagged infinite");
    }
    if (hausdorff_normalized && !(*hausdorff_normalized >= 0.0))
        throw ValidationError("Hausdorff distance must be nonnegative");
}

namespace {

// Pixel pools gathered over all views of one split.
struct SplitPool {
    int views = 0;
    double se_sum = 0.0;  // squared intensity error
    std::size_t px_count = 0;
    double ssim_sum = 0.0;
    double angle_sum = 0.0;  // radians over masked pixels
    std::size_t mask_count = 0;
    std::vector<double> alb_pred, alb_true;  // masked pixels for one split-level fit
    double lpips_sum = 0.0;
    int lpips_count = 0;
};

void accumulate_view(SplitPool& pool, const SplatSet& splats, const ViewContext& view,
                     const ViewGroundTruth* gt, const std::map<std::string, double>& lpips) {
    ViewContext calibrated = view;
    calibrated.calibration = ImageCalibration{};
    const RenderBundle bundle = render(splats, calibrated, RenderOptions{});

    // Checkpoints carry no per-image calibration, so refit the affine
    // exposure to the observation — the same freedom training has.
    const AffineFit fit = fit_affine(bundle.intensity, view.image);
    Image rendered = bundle.intensity;
    for (std::size_t i = 0; i < rendered.pixel_count(); ++i)
        rendered[i] = fit.scale * rendered[i] + fit.offset;

    pool.views += 1;
    for (std::size_t i = 0; i < rendered.pixel_count(); ++i) {
        const double d = rendered[i] - view.image[i];
        pool.se_sum += d * d;
    }
    pool.px_count += rendered.pixel_count();
    pool.ssim_sum += mssim(rendered, view.image, LossConfig{});

    const auto it = lpips.find(view.name);
    if (it != lpips.end()) {
        pool.lpips_sum += it->second;
        pool.lpips_count += 1;
    }

    if (!gt) return;
    const Image mask = overlap_mask(bundle.accumulation, gt->normal);
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (mask[i] <= 0.5) continue;
        Vec3 n(bundle.normal[0][i], bundle.normal[1][i], bundle.normal[2][i]);
        const double len = n.norm();
        double dot = 0.0;
        if (len > 1e-12) {
            n /= len;
            for (int c = 0; c < 3; ++c) dot += n[c] * gt->normal[c][i];
        }
        pool.angle_sum += std::acos(std::clamp(dot, -1.0, 1.0));
        pool.mask_count += 1;
        if (is_physics(splats.variant)) {
            // The blended albedo is an omega-weighted sum; dividing by the
            // accumulation gives the mean surface albedo under the pixel.
            pool.alb_pred.push_back(bundle.albedo[i] / bundle.accumulation[i]);
            pool.alb_true.push_back(gt->albedo[i]);
        }
    }
}

SplitMetrics finalize(const SplitPool& pool, bool physics, bool has_gt) {
    SplitMetrics m;
    m.view_count = pool.views;
    if (pool.views == 0) return m;

    const double mse = pool.se_sum / static_cast<double>(pool.px_count);
    if (mse == 0.0)
        m.psnr_infinite = true;
    else
        m.psnr_db = 10.0 * std::log10(1.0 / mse);
    m.ssim = pool.ssim_sum / pool.views;
    m.valid_pixels = pool.mask_count;
    if (pool.lpips_count > 0) m.lpips = pool.lpips_sum / pool.lpips_count;

    if (has_gt && pool.mask_count > 0) {
        m.normal_error_deg = pool.angle_sum / pool.mask_count * (180.0 / M_PI);
        if (physics) {
            const std::size_t n = pool.alb_pred.size();
            double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sx += pool.alb_pred[i];
                sy += pool.alb_true[i];
                sxx += pool.alb_pred[i] * pool.alb_pred[i];
                sxy += pool.alb_pred[i] * pool.alb_true[i];
            }
            const double nn = static_cast<double>(n);
            const double var = sxx - sx * sx / nn;
            if (var > 1e-12 * nn) {
                const double scale = (sxy - sx * sy / nn) / var;
                const double offset = (sy - scale * sx) / nn;
                double sum = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    sum += std::abs(pool.alb_true[i] - (scale * pool.alb_pred[i] + offset)) /
                           pool.alb_true[i];
                m.albedo_rel_error = sum / nn;
            }
        }
    }
    return m;
}

}  // namespace

MetricReport evaluate(const SplatSet& splats, const SceneDataset& dataset,
                      const EvalOptions& opts) {
    dataset.check();
    splats.check();

    MetricReport report;
    report.scene = dataset.name;
    report.variant = appearance_to_string(splats.variant);
    report.splat_count = splats.size();

    SplitPool train_pool, test_pool;
    for (std::size_t vi = 0; vi < dataset.views.size(); ++vi) {
        const ViewContext& view = dataset.views[vi];
        const ViewGroundTruth* gt = dataset.has_gt ? &dataset.gt[vi] : nullptr;
        SplitPool& pool = view.split == "test" ? test_pool : train_pool;
        accumulate_view(pool, splats, view, gt, opts.lpips);
    }
    const bool physics = is_physics(splats.variant);
    report.train = finalize(train_pool, physics, dataset.has_gt);
    report.test = finalize(test_pool, physics, dataset.has_gt);

    if (opts.with_mesh && !dataset.gt_points.empty()) {
        const double voxel = opts.voxel > 0.0 ? opts.voxel : default_voxel_size(splats);
        const TriangleMesh mesh =
            extract_mesh(splats, dataset.views, voxel, opts.trunc_voxels * voxel);
        if (!mesh.vertices.empty()) {
            const RigidTransform t = align_icp(mesh.vertices, dataset.gt_points);
            report.hausdorff_normalized =
                hausdorff_normalized(t.apply(mesh.vertices), dataset.gt_points);
        }
    }

    report.check();
    return report;
}

namespace {

nlohmann::json split_json(const SplitMetrics& m) {
    nlohmann::json j;
    j["view_count"] = m.view_count;
    j["psnr_db"] = m.psnr_infinite ? nlohmann::json() : nlohmann::json(m.psnr_db);
    j["psnr_infinite"] = m.psnr_infinite;
    j["ssim"] = m.ssim;
    j["normal_error_deg"] =
        m.normal_error_deg ? nlohmann::json(*m.normal_error_deg) : nlohmann::json();
    j["albedo_rel_error"] =
        m.albedo_rel_error ? nlohmann::json(*m.albedo_rel_error) : nlohmann::json();
    j["valid_pixels"] = m.valid_pixels;
    if (m.lpips) j["lpips"] = *m.lpips;
    return j;
}

void split_csv(std::ostringstream& out, const char* name, const SplitMetrics& m) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string();
    };
    out << name << ",psnr_db," << (m.psnr_infinite ? "inf" : std::to_string(m.psnr_db)) << '\n';
    out << name << ",ssim," << m.ssim << '\n';
    out << name << ",normal_error_deg," << opt(m.normal_error_deg) << '\n';
    out << name << ",albedo_rel_error," << opt(m.albedo_rel_error) << '\n';
    out << name << ",valid_pixels," << m.valid_pixels << '\n';
    if (m.lpips) out << name << ",lpips," << *m.lpips << '\n';
}

}  // namespace

std::string report_json(const MetricReport& r) {
    nlohmann::json j;
    j["scene"] = r.scene;
    j["variant"] = r.variant;
    j["splat_count"] = r.splat_count;
    j["train"] = split_json(r.train);
    j["test"] = split_json(r.test);
    j["hausdorff_normalized"] =
        r.hausdorff_normalized ? nlohmann::json(*r.hausdorff_normalized) : nlohmann::json();
    return j.dump(2) + "\n";
}

std::string report_csv(const MetricReport& r) {
    std::ostringstream out;
    out << "split,metric,value\n";
    split_csv(out, "train", r.train);
    split_csv(out, "test", r.test);
    if (r.hausdorff_normalized) out << "all,hausdorff_normalized," << *r.hausdorff_normalized << '\n';
    return out.str();
}

void write_report(const MetricReport& r, const std::string& json_path,
                  const std::string& csv_path) {
    if (!json_path.empty()) {
        std::ofstream f(json_path);
        if (!f) throw Error("cannot open " + json_path + " for writing");
        f << report_json(r);
    }
    if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        if (!f) throw Error("cannot open " + csv_path + " for writing");
        f << report_csv(r);
    }
}

std::map<std::string, double> read_lpips_sidecar(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingFileError("cannot open lpips sidecar " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("lpips sidecar " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError("lpips sidecar must be a JSON object");
    std::map<std::string, double> out;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number()) throw ValidationError("lpips sidecar values must be numbers");
        out[key] = value.get<double>();
    }
    return out;
}

}  // namespace psplat
