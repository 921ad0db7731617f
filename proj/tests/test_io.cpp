#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "photosplat/config.hpp"
#include "photosplat/dataset.hpp"

using namespace psplat;
using psplat::testing::scratch_dir;

namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, Rng& rng) {
    Image img(h, w);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) img[i] = rng.uniform();
    return img;
}

SceneDataset small_dataset(int n_views, bool with_gt) {
    SceneDataset d;
    d.name = "roundtrip";
    Rng rng(90);
    for (int i = 0; i < n_views; ++i) {
        ViewContext v;
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", i);
        v.name = name;
        const double az = 2.0 * M_PI * i / n_views;
        v.camera = CameraModel::look_at(
            Vec3(4 * std::cos(az), 4 * std::sin(az), 3.0), Vec3::Zero(), Vec3(0, 0, 1),
            24.0 + i, 25.0 + i, 16, 16);
        v.sun = Vec3(0.3, 0.2 * i, 1.0).normalized();
        v.split = i + 1 == n_views ? "test" : "train";
        v.image = random_image(16, 16, rng);
        d.views.push_back(std::move(v));
    }
    d.init_points = {Vec3(0.125, -0.25, 0.5), Vec3(1.0, 2.0, -3.0)};
    if (with_gt) {
        d.has_gt = true;
        for (int i = 0; i < n_views; ++i) {
            ViewGroundTruth g;
            for (int c = 0; c < 3; ++c) g.normal[c] = Image(16, 16, 0.0);
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) {
                    Vec3 n(rng.normal(), rng.normal(), rng.normal());
                    n.normalize();
                    for (int c = 0; c < 3; ++c) g.normal[c].at(y, x) = n[c];
                }
            g.albedo = random_image(16, 16, rng);
            d.gt.push_back(std::move(g));
        }
        d.gt_points = {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5), Vec3(-1, 0, 1)};
    }
    return d;
}

// Rewrites one whitespace-separated field on the first non-comment line.
void patch_cameras_field(const std::string& dir, int field, const std::string& value) {
    const fs::path path = fs::path(dir) / "cameras.txt";
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    for (std::string& l : lines) {
        if (l.empty() || l[0] == '#') continue;
        std::istringstream ss(l);
        std::vector<std::string> fields;
        std::string tok;
        while (ss >> tok) fields.push_back(tok);
        fields[static_cast<std::size_t>(field)] = value;
        std::string rebuilt;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) rebuilt += ' ';
            rebuilt += fields[i];
        }
        l = rebuilt;
        break;
    }
    std::ofstream out(path);
    for (const std::string& l : lines) out << l << '\n';
}

}  // namespace

TEST_CASE("png io") {
    const std::string dir = scratch_dir("png_io");
    Rng rng(91);
    SUBCASE("16-bit grayscale round trip is accurate to one quantum") {
        const Image img = random_image(9, 13, rng);
        const std::string path = dir + "/g16.png";
        write_png_gray(path, img, 16);
        const Image back = read_png_gray(path);
        REQUIRE(back.width() == 13);
        REQUIRE(back.height() == 9);
        for (std::size_t i = 0; i < img.pixel_count(); ++i)
            CHECK(std::abs(back[i] - img[i]) <= 0.5 / 65535.0 + 1e-12);
    }
    SUBCASE("8-bit grayscale round trip is accurate to one quantum") {
        const Image img = random_image(7, 7, rng);
        const std::string path = dir + "/g8.png";
        write_png_gray(path, img, 8);
        const Image back = read_png_gray(path);
        for (std::size_t i = 0; i < img.pixel_count(); ++i)
            CHECK(std::abs(back[i] - img[i]) <= 0.5 / 255.0 + 1e-12);
    }
    SUBCASE("rgb round trip keeps channels separate") {
        const Image r = random_image(6, 8, rng), g = random_image(6, 8, rng),
                    b = random_image(6, 8, rng);
        const std::string path = dir + "/rgb.png";
        write_png_rgb(path, r, g, b);
        const std::array<Image, 3> back = read_png_rgb(path);
        for (std::size_t i = 0; i < r.pixel_count(); ++i) {
            CHECK(std::abs(back[0][i] - r[i]) <= 0.5 / 65535.0 + 1e-12);
            CHECK(std::abs(back[1][i] - g[i]) <= 0.5 / 65535.0 + 1e-12);
            CHECK(std::abs(back[2][i] - b[i]) <= 0.5 / 65535.0 + 1e-12);
        }
    }
    SUBCASE("out-of-range values are clamped, not wrapped") {
        Image img(2, 2, 0.0);
        img.at(0, 0) = -0.25;
        img.at(0, 1) = 1.75;
        const std::string path = dir + "/clamp.png";
        write_png_gray(path, img, 16);
        const Image back = read_png_gray(path);
        CHECK(back.at(0, 0) == 0.0);
        CHECK(back.at(0, 1) == 1.0);
    }
    SUBCASE("reading a missing file throws") {
        CHECK_THROWS_AS((void)read_png_gray(dir + "/nope.png"), MissingFileError);
    }
    fs::remove_all(dir);
}

TEST_CASE("raw map io") {
    const std::string dir = scratch_dir("raw_io");
    Rng rng(92);
    SUBCASE("multi-channel round trip at float precision") {
        const Image a = random_image(5, 11, rng);
        const Image b = random_image(5, 11, rng);
        const std::string path = dir + "/maps.bin";
        write_raw_map(path, {&a, &b});
        const std::vector<Image> back = read_raw_map(path);
        REQUIRE(back.size() == 2);
        REQUIRE(back[0].width() == 11);
        for (std::size_t i = 0; i < a.pixel_count(); ++i) {
            CHECK(back[0][i] == doctest::Approx(a[i]).epsilon(1e-6));
            CHECK(back[0][i] == static_cast<double>(static_cast<float>(a[i])));
            CHECK(back[1][i] == static_cast<double>(static_cast<float>(b[i])));
        }
    }
    SUBCASE("float-representable values survive exactly") {
        Image img(3, 3, 0.0);
        for (std::size_t i = 0; i < 9; ++i) img[i] = static_cast<double>(i) / 256.0 - 1.5;
        const std::string path = dir + "/exact.bin";
        write_raw_map(path, {&img});
        const std::vector<Image> back = read_raw_map(path);
        for (std::size_t i = 0; i < 9; ++i) CHECK(back[0][i] == img[i]);
    }
    SUBCASE("bad magic is rejected") {
        const std::string path = dir + "/junk.bin";
        std::ofstream(path) << "not a map";
        CHECK_THROWS_AS((void)read_raw_map(path), ValidationError);
    }
    fs::remove_all(dir);
}

TEST_CASE("ply points io") {
    const std::string dir = scratch_dir("ply_io");
    SUBCASE("round trip at float precision") {
        const std::vector<Vec3> pts = {Vec3(0.5, -0.25, 3.0), Vec3(1e-3, 2.5, -0.125)};
        const std::string path = dir + "/p.ply";
        write_ply_points(path, pts);
        const std::vector<Vec3> back = read_ply_points(path);
        REQUIRE(back.size() == 2);
        for (std::size_t i = 0; i < 2; ++i)
            for (int c = 0; c < 3; ++c)
                CHECK(back[i][c] == static_cast<double>(static_cast<float>(pts[i][c])));
    }
    SUBCASE("ascii ply with extra properties parses") {
        const std::string path = dir + "/ascii.ply";
        std::ofstream f(path);
        f << "ply\nformat ascii 1.0\nelement vertex 2\n"
          << "property float x\nproperty float y\nproperty float z\n"
          << "property uchar red\nend_header\n"
          << "1.5 2.5 3.5 200\n-1 0 4 10\n";
        f.close();
        const std::vector<Vec3> pts = read_ply_points(path);
        REQUIRE(pts.size() == 2);
        CHECK((pts[0] - Vec3(1.5, 2.5, 3.5)).norm() < 1e-12);
        CHECK((pts[1] - Vec3(-1, 0, 4)).norm() < 1e-12);
    }
    SUBCASE("missing file throws") {
        CHECK_THROWS_AS((void)read_ply_points(dir + "/none.ply"), MissingFileError);
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset round trip") {
    const std::string dir = scratch_dir("dataset_io");
    const SceneDataset d = small_dataset(4, true);
    save_dataset(d, dir);
    const SceneDataset back = load_dataset(dir);

    SUBCASE("views, poses, and splits survive") {
        REQUIRE(back.views.size() == d.views.size());
        for (std::size_t i = 0; i < d.views.size(); ++i) {
            const ViewContext& a = d.views[i];
            const ViewContext& b = back.views[i];
            CHECK(a.name == b.name);
            CHECK(a.split == b.split);
            // 17-significant-digit text round trip is exact for doubles.
            CHECK(a.camera.fx == b.camera.fx);
            CHECK(a.camera.fy == b.camera.fy);
            CHECK(a.camera.cx == b.camera.cx);
            CHECK(a.camera.cy == b.camera.cy);
            CHECK((a.camera.rotation - b.camera.rotation).norm() == 0.0);
            CHECK((a.camera.translation - b.camera.translation).norm() == 0.0);
            CHECK((a.sun - b.sun).norm() < 1e-15);
            CHECK(b.camera.width == 16);
            for (std::size_t p = 0; p < a.image.pixel_count(); ++p)
                CHECK(std::abs(a.image[p] - b.image[p]) <= 0.5 / 65535.0 + 1e-12);
        }
        CHECK(back.train_indices().size() == 3);
        CHECK(back.test_indices().size() == 1);
    }
    SUBCASE("points and ground truth survive") {
        REQUIRE(back.init_points.size() == 2);
        for (std::size_t i = 0; i < 2; ++i)
            for (int c = 0; c < 3; ++c)
                CHECK(back.init_points[i][c] ==
                      static_cast<double>(static_cast<float>(d.init_points[i][c])));
        REQUIRE(back.has_gt);
        REQUIRE(back.gt.size() == d.views.size());
        CHECK(back.gt_points.size() == 3);
        for (std::size_t i = 0; i < d.views.size(); ++i) {
            for (int c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < d.gt[i].normal[c].pixel_count(); ++p)
                    CHECK(std::abs(back.gt[i].normal[c][p] - d.gt[i].normal[c][p]) <=
                          1.0 / 65535.0 + 1e-12);
            for (std::size_t p = 0; p < d.gt[i].albedo.pixel_count(); ++p)
                CHECK(std::abs(back.gt[i].albedo[p] - d.gt[i].albedo[p]) <=
                      0.5 / 65535.0 + 1e-12);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset validation on load") {
    SUBCASE("missing cameras.txt") {
        const std::string dir = scratch_dir("dataset_missing");
        CHECK_THROWS_AS((void)load_dataset(dir), MissingFileError);
        fs::remove_all(dir);
    }
    SUBCASE("zero sun vector names the offending view") {
        const std::string dir = scratch_dir("dataset_sun");
        save_dataset(small_dataset(3, false), dir);
        for (int f = 17; f <= 19; ++f) patch_cameras_field(dir, f, "0");
        try {
            (void)load_dataset(dir);
            FAIL("expected MalformedPoseError");
        } catch (const MalformedPoseError& e) {
            CHECK(std::string(e.what()).find("00000.png") != std::string::npos);
        }
        fs::remove_all(dir);
    }
    SUBCASE("slightly drifted rotations are re-orthonormalized") {
        const std::string dir = scratch_dir("dataset_drift");
        const SceneDataset d = small_dataset(3, false);
        save_dataset(d, dir);
        const double r00 = d.views[0].camera.rotation(0, 0);
        std::ostringstream val;
        val.precision(17);
        val << r00 + 2e-5;
        patch_cameras_field(dir, 5, val.str());
        const SceneDataset back = load_dataset(dir);
        const Mat3 r = back.views[0].camera.rotation;
        CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("badly corrupted rotations are rejected") {
        const std::string dir = scratch_dir("dataset_badrot");
        save_dataset(small_dataset(3, false), dir);
        patch_cameras_field(dir, 5, "2.0");
        CHECK_THROWS_AS((void)load_dataset(dir), MalformedPoseError);
        fs::remove_all(dir);
    }
    SUBCASE("truncated pose line is rejected") {
        const std::string dir = scratch_dir("dataset_short");
        save_dataset(small_dataset(3, false), dir);
        patch_cameras_field(dir, 20, "");  // drop the split tag
        CHECK_THROWS_AS((void)load_dataset(dir), MalformedPoseError);
        fs::remove_all(dir);
    }
}

TEST_CASE("config parsing") {
    SUBCASE("values, comments, and whitespace") {
        const Config c = Config::from_string(
            "# a comment\n"
            "alpha = 3\n"
            "  beta=  2.5 \n"
            "\n"
            "name = some_scene\n"
            "flag = true\n"
            "big = 12345678901\n");
        CHECK(c.get_int("alpha", 0) == 3);
        CHECK(c.get_double("beta", 0.0) == doctest::Approx(2.5));
        CHECK(c.get_string("name", "") == "some_scene");
        CHECK(c.get_bool("flag", false));
        CHECK(c.get_u64("big", 0) == 12345678901ull);
        CHECK(c.get_int("missing", 7) == 7);
        CHECK(c.has("alpha"));
        CHECK_FALSE(c.has("missing"));
    }
    SUBCASE("unparsable values throw") {
        const Config c = Config::from_string("alpha = banana\n");
        CHECK_THROWS_AS((void)c.get_int("alpha", 0), ValidationError);
        CHECK_THROWS_AS((void)c.get_double("alpha", 0.0), ValidationError);
        CHECK_THROWS_AS((void)c.get_bool("alpha", false), ValidationError);
    }
    SUBCASE("check_known flags stray keys") {
        const Config c = Config::from_string("alpha = 1\ntypo_key = 2\n");
        CHECK_THROWS_AS(c.check_known({"alpha"}), ValidationError);
        const Config ok = Config::from_string("alpha = 1\n");
        ok.check_known({"alpha", "beta"});
    }
    SUBCASE("file loading") {
        const std::string dir = scratch_dir("config_io");
        const std::string path = dir + "/run.cfg";
        std::ofstream(path) << "iterations = 12\n";
        const Config c = Config::load(path);
        CHECK(c.get_int("iterations", 0) == 12);
        CHECK_THROWS_AS((void)Config::load(dir + "/none.cfg"), MissingFileError);
        fs::remove_all(dir);
    }
}
