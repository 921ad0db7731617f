#include "photosplat/dataset.hpp"

#include <Eigen/SVD>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace psplat {

std::vector<std::size_t> SceneDataset::train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].split == "train") out.push_back(i);
    return out;
}

std::vector<std::size_t> SceneDataset::test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].split != "train") out.push_back(i);
    return out;
}

void SceneDataset::check() const {
    for (const auto& v : views) {
        if (v.image.height() != v.camera.height || v.image.width() != v.camera.width)
            throw DimensionMismatchError("view " + v.name + ": image does not match camera size");
        if (std::abs(v.sun.norm() - 1.0) > 1e-9)
            throw MalformedPoseError("view " + v.name + ": sun vector not unit length");
        if (v.split != "train" && v.split != "test")
            throw ValidationError("view " + v.name + ": unknown split tag '" + v.split + "'");
    }
    if (has_gt && gt.size() != views.size())
        throw ShapeMismatchError("ground-truth maps do not cover all views");
}

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Rotation sanity: re-orthonormalize small drift (warn), reject beyond 1e-3.
Mat3 checked_rotation(const Mat3& r, const std::string& who) {
    const double err = (r * r.transpose() - Mat3::Identity()).norm();
    if (err <= 1e-12) return r;
    if (err > 1e-3)
        throw MalformedPoseError(who + ": rotation not orthonormal (residual " +
                                 std::to_string(err) + ")");
    std::cerr << "warning: " << who << ": re-orthonormalizing rotation (residual " << err << ")\n";
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 fixed = svd.matrixU() * svd.matrixV().transpose();
    if (fixed.determinant() < 0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1;
        fixed = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return fixed;
}

}  // namespace

SceneDataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    const fs::path cams = root / "cameras.txt";
    if (!fs::exists(cams)) throw MissingFileError("missing " + cams.string());

    SceneDataset d;
    d.name = root.filename().string();

    std::ifstream f(cams);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ViewContext v;
        Mat3 r;
        std::vector<double> nums(19);
        ss >> v.name;
        for (double& x : nums) ss >> x;
        ss >> v.split;
        if (!ss)
            throw MalformedPoseError("cameras.txt line " + std::to_string(lineno) +
                                     ": expected name, 19 numbers, split tag");
        v.camera.fx = nums[0];
        v.camera.fy = nums[1];
        v.camera.cx = nums[2];
        v.camera.cy = nums[3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = nums[4 + 3 * i + j];
        v.camera.rotation = checked_rotation(r, "view " + v.name);
        v.camera.translation = Vec3(nums[13], nums[14], nums[15]);
        v.sun = Vec3(nums[16], nums[17], nums[18]);
        if (v.sun.norm() < 1e-9)
            throw MalformedPoseError("view " + v.name + ": zero sun vector");
        v.sun.normalize();

        const fs::path img = root / "images" / v.name;
        if (!fs::exists(img)) throw MissingFileError("view " + v.name + ": missing " + img.string());
        v.image = read_png_gray(img.string());
        v.camera.width = v.image.width();
        v.camera.height = v.image.height();
        d.views.push_back(std::move(v));
    }
    if (d.views.empty()) throw ValidationError("dataset has no views: " + dir);

    if (fs::exists(root / "init_points.ply"))
        d.init_points = read_ply_points((root / "init_points.ply").string());

    const fs::path gt_dir = root / "gt";
    if (fs::exists(gt_dir)) {
        d.has_gt = true;
        d.gt.resize(d.views.size());
        for (std::size_t i = 0; i < d.views.size(); ++i) {
            const fs::path stem = fs::path(d.views[i].name).stem();
            const fs::path n_path = gt_dir / ("normal_" + stem.string() + ".png");
            const fs::path a_path = gt_dir / ("albedo_" + stem.string() + ".png");
            if (!fs::exists(n_path) || !fs::exists(a_path))
                throw MissingFileError("view " + d.views[i].name + ": missing ground-truth maps");
            const auto rgb = read_png_rgb(n_path.string());
            for (int c = 0; c < 3; ++c) {
                d.gt[i].normal[c] = Image(rgb[c].height(), rgb[c].width());
                for (std::size_t p = 0; p < rgb[c].pixel_count(); ++p)
                    d.gt[i].normal[c][p] = 2.0 * rgb[c][p] - 1.0;
            }
            d.gt[i].albedo = read_png_gray(a_path.string());
        }
        if (fs::exists(gt_dir / "points.ply"))
            d.gt_points = read_ply_points((gt_dir / "points.ply").string());
    }
    d.check();
    return d;
}

void save_dataset(const SceneDataset& d, const std::string& dir) {
    d.check();
    const fs::path root(dir);
    fs::create_directories(root / "images");

    std::ofstream f(root / "cameras.txt");
    if (!f) throw MissingFileError("cannot write cameras.txt under " + dir);
    f << "# image fx fy cx cy R[9 row-major] t[3] sun[3] split\n";
    for (const auto& v : d.views) {
        f << v.name;
        const double nums[16] = {v.camera.fx,
                                 v.camera.fy,
                                 v.camera.cx,
                                 v.camera.cy,
                                 v.camera.rotation(0, 0),
                                 v.camera.rotation(0, 1),
                                 v.camera.rotation(0, 2),
                                 v.camera.rotation(1, 0),
                                 v.camera.rotation(1, 1),
                                 v.camera.rotation(1, 2),
                                 v.camera.rotation(2, 0),
                                 v.camera.rotation(2, 1),
                                 v.camera.rotation(2, 2),
                                 v.camera.translation.x(),
                                 v.camera.translation.y(),
                                 v.camera.translation.z()};
        for (double x : nums) f << ' ' << format_g17(x);
        for (int i = 0; i < 3; ++i) f << ' ' << format_g17(v.sun[i]);
        f << ' ' << v.split << '\n';
        write_png_gray((root / "images" / v.name).string(), v.image, 16);
    }

    if (!d.init_points.empty())
        write_ply_points((root / "init_points.ply").string(), d.init_points);

    if (d.has_gt) {
        fs::create_directories(root / "gt");
        for (std::size_t i = 0; i < d.views.size(); ++i) {
            const std::string stem = fs::path(d.views[i].name).stem().string();
            std::array<Image, 3> enc;
            for (int c = 0; c < 3; ++c) {
                enc[c] = Image(d.gt[i].normal[c].height(), d.gt[i].normal[c].width());
                for (std::size_t p = 0; p < enc[c].pixel_count(); ++p)
                    enc[c][p] = 0.5 * (d.gt[i].normal[c][p] + 1.0);
            }
            write_png_rgb((root / "gt" / ("normal_" + stem + ".png")).string(), enc[0], enc[1],
                          enc[2], 16);
            write_png_gray((root / "gt" / ("albedo_" + stem + ".png")).string(), d.gt[i].albedo,
                           16);
        }
        if (!d.gt_points.empty())
            write_ply_points((root / "gt" / "points.ply").string(), d.gt_points);
    }
}

namespace {

struct PlyProperty {
    std::string type;
    std::string name;
};

std::size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    throw ValidationError("unsupported PLY property type: " + t);
}

double read_ply_scalar(const char* p, const std::string& t) {
    if (t == "float" || t == "float32") {
        float v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (t == "double" || t == "float64") {
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    throw ValidationError("PLY coordinate must be float or double, got " + t);
}

}  // namespace

std::vector<Vec3> read_ply_points(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot read PLY: " + path);
    std::string line;
    std::getline(f, line);
    if (line.rfind("ply", 0) != 0) throw ValidationError("not a PLY file: " + path);

    std::string format;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> props;
    bool in_vertex = false;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "format") {
            ss >> format;
        } else if (tok == "comment") {
            continue;
        } else if (tok == "element") {
            std::string ename;
            std::size_t n;
            ss >> ename >> n;
            in_vertex = ename == "vertex";
            if (in_vertex) vertex_count = n;
        } else if (tok == "property") {
            if (!in_vertex) continue;
            PlyProperty p;
            ss >> p.type;
            if (p.type == "list") throw ValidationError("list property in PLY vertex element");
            ss >> p.name;
            props.push_back(p);
        } else if (tok == "end_header") {
            break;
        }
    }
    int ix = -1, iy = -1, iz = -1;
    std::size_t stride = 0;
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < props.size(); ++i) {
        offsets.push_back(stride);
        stride += ply_type_size(props[i].type);
        if (props[i].name == "x") ix = static_cast<int>(i);
        if (props[i].name == "y") iy = static_cast<int>(i);
        if (props[i].name == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw ValidationError("PLY vertex element lacks x/y/z: " + path);

    std::vector<Vec3> pts;
    pts.reserve(vertex_count);
    if (format == "ascii") {
        for (std::size_t k = 0; k < vertex_count; ++k) {
            std::vector<double> row(props.size());
            for (double& v : row) f >> v;
            if (!f) throw ValidationError("PLY truncated: " + path);
            pts.emplace_back(row[ix], row[iy], row[iz]);
        }
    } else if (format == "binary_little_endian") {
        std::vector<char> row(stride);
        for (std::size_t k = 0; k < vertex_count; ++k) {
            f.read(row.data(), static_cast<std::streamsize>(stride));
            if (!f) throw ValidationError("PLY truncated: " + path);
            pts.emplace_back(read_ply_scalar(row.data() + offsets[ix], props[ix].type),
                             read_ply_scalar(row.data() + offsets[iy], props[iy].type),
                             read_ply_scalar(row.data() + offsets[iz], props[iz].type));
        }
    } else {
        throw ValidationError("unsupported PLY format: " + format);
    }
    return pts;
}

void write_ply_points(const std::string& path, const std::vector<Vec3>& points) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MissingFileError("cannot write PLY: " + path);
    f << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "end_header\n";
    for (const auto& p : points) {
        const float row[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                              static_cast<float>(p.z())};
        f.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
}

}  // namespace psplat
