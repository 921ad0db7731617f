#pragma once

#include <array>
#include <string>
#include <vector>

#include "photosplat/common.hpp"

namespace psplat {

// Single-channel raster, row-major doubles. Intensities live in [0,1] by
// convention; depth/albedo maps reuse the container with their own units.
class Image {
public:
    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : height_(height), width_(width), pixels_(static_cast<std::size_t>(height) * width, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t pixel_count() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    double& at(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double& operator[](std::size_t i) { return pixels_[i]; }
    double operator[](std::size_t i) const { return pixels_[i]; }

    double* data() { return pixels_.data(); }
    const double* data() const { return pixels_.data(); }

    bool same_shape(const Image& o) const { return height_ == o.height_ && width_ == o.width_; }
    void fill(double v) { std::fill(pixels_.begin(), pixels_.end(), v); }

private:
    int height_ = 0, width_ = 0;
    std::vector<double> pixels_;
};

// PNG I/O. Reads normalize by the bit-depth maximum; grayscale conversion
// takes the first channel (inputs are grayscale or grayscale-replicated).
// Writes clamp to [0,1] and round to the requested depth.
Image read_png_gray(const std::string& path);
std::array<Image, 3> read_png_rgb(const std::string& path);
void write_png_gray(const std::string& path, const Image& img, int bit_depth = 16);
void write_png_rgb(const std::string& path, const Image& r, const Image& g, const Image& b,
                   int bit_depth = 16);

// Raw float map: magic "PSM1", uint32 height/width/channels (little-endian),
// then channel-planar row-major float32 data. See docs/formats.md.
void write_raw_map(const std::string& path, const std::vector<const Image*>& channels);
std::vector<Image> read_raw_map(const std::string& path);

}  // namespace psplat
