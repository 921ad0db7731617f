#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "photosplat/geometry.hpp"
#include "photosplat/image.hpp"
#include "photosplat/reflectance.hpp"

namespace psplat {

// Everything needed to render and score one view.
struct ViewContext {
    std::string name;  // image file name within images/
    CameraModel camera;
    Vec3 sun = Vec3(0, 0, 1);  // unit, world frame, toward the Sun
    ImageCalibration calibration;
    Image image;  // normalized [0,1] grayscale
    std::string split = "train";
};

// Per-view ground truth rendered by the synthetic oracle. Normal components
// are world-frame; invalid pixels carry a zero normal and zero albedo.
struct ViewGroundTruth {
    std::array<Image, 3> normal;
    Image albedo;
};

struct SceneDataset {
    std::string name = "scene";
    std::vector<ViewContext> views;
    std::vector<Vec3> init_points;  // empty when absent

    bool has_gt = false;
    std::vector<ViewGroundTruth> gt;  // parallel to views when has_gt
    std::vector<Vec3> gt_points;

    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> test_indices() const;
    void check() const;
};

// Directory layout (see docs/formats.md): images/NNNNN.png, cameras.txt,
// optional init_points.ply, optional gt/{normal,albedo}_NNNNN.png and
// gt/points.ply. Poses serialize as text with 17 significant digits so the
// round trip is lossless.
SceneDataset load_dataset(const std::string& dir);
void save_dataset(const SceneDataset& d, const std::string& dir);

// Minimal PLY point support: reader accepts ascii / binary_little_endian
// vertex elements with float or double x,y,z (other properties skipped);
// writer emits binary_little_endian float32 x,y,z.
std::vector<Vec3> read_ply_points(const std::string& path);
void write_ply_points(const std::string& path, const std::vector<Vec3>& points);

}  // namespace psplat
