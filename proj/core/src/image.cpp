#include "photosplat/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace psplat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngDecoded {
    int height = 0, width = 0, channels = 0;
    double maxval = 255.0;
    std::vector<std::uint16_t> samples;  // row-major, channel-interleaved
};

PngDecoded decode_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw MissingFileError("cannot open PNG: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png_create_info_struct failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> raster;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("failed to decode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);

    raster.resize(rowbytes * height);
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = raster.data() + y * rowbytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    PngDecoded out;
    out.height = static_cast<int>(height);
    out.width = static_cast<int>(width);
    out.channels = channels;
    out.maxval = bit_depth == 16 ? 65535.0 : 255.0;
    out.samples.resize(static_cast<std::size_t>(height) * width * channels);
    if (bit_depth == 16) {
        // PNG 16-bit samples are big-endian on the wire.
        for (std::size_t i = 0; i < out.samples.size(); ++i)
            out.samples[i] = static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1]);
    } else {
        for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = raster[i];
    }
    return out;
}

void encode_png(const std::string& path, const std::vector<const Image*>& planes, int bit_depth) {
    if (planes.empty() || (planes.size() != 1 && planes.size() != 3))
        throw ValidationError("PNG write expects 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16) throw ValidationError("PNG bit depth must be 8 or 16");
    const Image& first = *planes[0];
    for (const Image* p : planes)
        if (!p->same_shape(first)) throw ShapeMismatchError("PNG channel shape mismatch");
    if (first.height() <= 0 || first.width() <= 0)
        throw ValidationError("cannot write empty PNG");

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw MissingFileError("cannot write PNG: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> raster;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed to encode PNG: " + path);
    }
    png_init_io(png, f.get());

    const int h = first.height(), w = first.width();
    const int nch = static_cast<int>(planes.size());
    const int color = nch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, w, h, bit_depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
    const std::size_t rowbytes = static_cast<std::size_t>(w) * nch * bytes_per_sample;
    raster.resize(rowbytes * h);
    for (int y = 0; y < h; ++y) {
        png_byte* row = raster.data() + static_cast<std::size_t>(y) * rowbytes;
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < nch; ++c) {
                const auto q =
                    static_cast<std::uint16_t>(std::lround(clamp01(planes[c]->at(y, x)) * maxval));
                png_byte* dst = row + (static_cast<std::size_t>(x) * nch + c) * bytes_per_sample;
                if (bit_depth == 16) {
                    dst[0] = static_cast<png_byte>(q >> 8);
                    dst[1] = static_cast<png_byte>(q & 0xff);
                } else {
                    dst[0] = static_cast<png_byte>(q);
                }
            }
        }
    }
    row_ptrs.resize(h);
    for (int y = 0; y < h; ++y) row_ptrs[y] = raster.data() + static_cast<std::size_t>(y) * rowbytes;
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png_gray(const std::string& path) {
    const PngDecoded d = decode_png(path);
    Image img(d.height, d.width);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            img.at(y, x) =
                d.samples[(static_cast<std::size_t>(y) * d.width + x) * d.channels] / d.maxval;
    return img;
}

std::array<Image, 3> read_png_rgb(const std::string& path) {
    const PngDecoded d = decode_png(path);
    std::array<Image, 3> out = {Image(d.height, d.width), Image(d.height, d.width),
                                Image(d.height, d.width)};
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const int src = d.channels >= 3 ? c : 0;
                out[c].at(y, x) =
                    d.samples[(static_cast<std::size_t>(y) * d.width + x) * d.channels + src] /
                    d.maxval;
            }
    return out;
}

void write_png_gray(const std::string& path, const Image& img, int bit_depth) {
    encode_png(path, {&img}, bit_depth);
}

void write_png_rgb(const std::string& path, const Image& r, const Image& g, const Image& b,
                   int bit_depth) {
    encode_png(path, {&r, &g, &b}, bit_depth);
}

void write_raw_map(const std::string& path, const std::vector<const Image*>& channels) {
    if (channels.empty()) throw ValidationError("raw map needs at least one channel");
    for (const Image* p : channels)
        if (!p->same_shape(*channels[0])) throw ShapeMismatchError("raw map channel shapes differ");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot write raw map: " + path);
    const char magic[4] = {'P', 'S', 'M', '1'};
    const std::uint32_t h = channels[0]->height(), w = channels[0]->width(),
                        nch = static_cast<std::uint32_t>(channels.size());
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&h), 4);
    f.write(reinterpret_cast<const char*>(&w), 4);
    f.write(reinterpret_cast<const char*>(&nch), 4);
    std::vector<float> plane(channels[0]->pixel_count());
    for (const Image* p : channels) {
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = static_cast<float>((*p)[i]);
        f.write(reinterpret_cast<const char*>(plane.data()),
                static_cast<std::streamsize>(plane.size() * sizeof(float)));
    }
}

std::vector<Image> read_raw_map(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot read raw map: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "PSM1", 4) != 0)
        throw ValidationError("not a raw map file: " + path);
    std::uint32_t h = 0, w = 0, nch = 0;
    f.read(reinterpret_cast<char*>(&h), 4);
    f.read(reinterpret_cast<char*>(&w), 4);
    f.read(reinterpret_cast<char*>(&nch), 4);
    if (!f || nch == 0) throw ValidationError("bad raw map header: " + path);
    std::vector<Image> out;
    std::vector<float> plane(static_cast<std::size_t>(h) * w);
    for (std::uint32_t c = 0; c < nch; ++c) {
        f.read(reinterpret_cast<char*>(plane.data()),
               static_cast<std::streamsize>(plane.size() * sizeof(float)));
        if (!f) throw ValidationError("raw map truncated: " + path);
        Image img(static_cast<int>(h), static_cast<int>(w));
        for (std::size_t i = 0; i < plane.size(); ++i) img[i] = plane[i];
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace psplat
