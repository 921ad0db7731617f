#pragma once

#include <map>
#include <optional>

#include "photosplat/dataset.hpp"
#include "photosplat/metrics.hpp"
#include "photosplat/splats.hpp"

namespace psplat {

// Aggregate metrics over one split's views. PSNR comes from the pooled MSE
// of every pixel in the split; SSIM is the per-view mean; angular and
// albedo errors pool masked pixels across views.
struct SplitMetrics {
    int view_count = 0;
    double psnr_db = 0.0;
    bool psnr_infinite = false;
    double ssim = 0.0;
    std::optional<double> normal_error_deg;   // needs ground-truth normals
    std::optional<double> albedo_rel_error;   // physics variants with GT only
    std::size_t valid_pixels = 0;             // masked pixels behind the two errors
    std::optional<double> lpips;              // sidecar mean when provided
};

struct MetricReport {
    std::string scene;
    std::string variant;
    std::size_t splat_count = 0;
    SplitMetrics train;
    SplitMetrics test;
    std::optional<double> hausdorff_normalized;  // one value per model

    void check() const;  // range invariants
};

struct EvalOptions {
    bool with_mesh = false;   // adds the Hausdorff pipeline (slow)
    double voxel = 0.0;       // 0: scene diagonal / 256
    double trunc_voxels = 4.0;
    std::map<std::string, double> lpips;  // view name -> precomputed value
};

// Renders every dataset view from the model, fits the per-image affine
// calibration to the observed image (checkpoints carry no calibrations),
// and aggregates the metrics per split.
MetricReport evaluate(const SplatSet& splats, const SceneDataset& dataset,
                      const EvalOptions& opts = {});

std::string report_json(const MetricReport& r);
std::string report_csv(const MetricReport& r);
void write_report(const MetricReport& r, const std::string& json_path,
                  const std::string& csv_path);

// Sidecar of precomputed perceptual distances: a JSON object mapping image
// names to values. Never computed in-repo.
std::map<std::string, double> read_lpips_sidecar(const std::string& path);

}  // namespace psplat
