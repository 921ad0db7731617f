#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "photosplat/mesh.hpp"

using namespace psplat;
using psplat::testing::scratch_dir;

namespace {

// A disk-splat tiling of the plane z = 0 over [-1, 1]^2.
SplatSet plane_splats(int per_side, double half_extent) {
    SplatSet s;
    s.variant = Appearance::Lambert;
    const double spacing = 2.0 * half_extent / (per_side - 1);
    const Vec4 q = quaternion_from_normal(Vec3(0, 0, 1)).vec();
    for (int iy = 0; iy < per_side; ++iy)
        for (int ix = 0; ix < per_side; ++ix) {
            const Vec3 p(-half_extent + ix * spacing, -half_extent + iy * spacing, 0.0);
            s.push_back(p, Vec2::Constant(std::log(0.8 * spacing)), q, logit(0.995),
                        std::log(0.5), ShCoeffs::Zero());
        }
    s.check();
    return s;
}

// Tangent splats covering a sphere, poses drawn by area-uniform sampling.
SplatSet sphere_splats(int count, double radius, std::uint64_t seed) {
    SplatSet s;
    s.variant = Appearance::Lambert;
    Rng rng(seed);
    const double spacing = radius * std::sqrt(12.6 / count);  // ~sphere area / count
    for (int i = 0; i < count; ++i) {
        Vec3 n(rng.normal(), rng.normal(), rng.normal());
        if (n.norm() < 1e-9) n = Vec3(0, 0, 1);
        n.normalize();
        s.push_back(radius * n, Vec2::Constant(std::log(spacing)),
                    quaternion_from_normal(n).vec(), logit(0.995), std::log(0.5),
                    ShCoeffs::Zero());
    }
    s.check();
    return s;
}

std::vector<ViewContext> orbit_views(int count, double distance, double elevation_deg, int size,
                                     double fx) {
    std::vector<ViewContext> views;
    const double el = elevation_deg * M_PI / 180.0;
    for (int i = 0; i < count; ++i) {
        const double az = 2.0 * M_PI * i / count;
        ViewContext v;
        v.name = "mesh_view_" + std::to_string(i);
        v.camera = CameraModel::look_at(
            distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                            std::sin(el)),
            Vec3::Zero(), Vec3(0, 0, 1), fx, fx, size, size);
        v.sun = Vec3(0, 0, 1);
        views.push_back(std::move(v));
    }
    return views;
}

}  // namespace

TEST_CASE("extract_mesh") {
    SUBCASE("a splat plane meshes to the plane within one voxel") {
        const SplatSet s = plane_splats(11, 1.0);
        const std::vector<ViewContext> views = orbit_views(6, 5.0, 55.0, 64, 64);
        const double voxel = 0.05;
        const TriangleMesh mesh = extract_mesh(s, views, voxel, 4 * voxel);
        REQUIRE(!mesh.vertices.empty());
        REQUIRE(!mesh.triangles.empty());
        int near_center = 0;
        for (const Vec3& v : mesh.vertices) {
            if (std::hypot(v.x(), v.y()) > 0.8) continue;  // ignore the rim
            ++near_center;
            CHECK(std::abs(v.z()) <= voxel);
        }
        CHECK(near_center > 20);
        for (const auto& t : mesh.triangles)
            for (const std::uint32_t idx : t) CHECK(idx < mesh.vertices.size());
    }
    SUBCASE("a splat sphere meshes to the sphere within two voxels") {
        const double radius = 1.0;
        const SplatSet s = sphere_splats(600, radius, 31);
        std::vector<ViewContext> views = orbit_views(8, 4.0, 25.0, 64, 64);
        const std::vector<ViewContext> north = orbit_views(4, 4.0, 70.0, 64, 64);
        const std::vector<ViewContext> south = orbit_views(4, 4.0, -50.0, 64, 64);
        views.insert(views.end(), north.begin(), north.end());
        views.insert(views.end(), south.begin(), south.end());
        const double voxel = 0.06;
        const TriangleMesh mesh = extract_mesh(s, views, voxel, 4 * voxel);
        REQUIRE(mesh.vertices.size() > 100);
        for (const Vec3& v : mesh.vertices)
            CHECK(std::abs(v.norm() - radius) <= 2 * voxel);
    }
    SUBCASE("views that miss the volume raise EmptyVolumeError") {
        const SplatSet s = plane_splats(5, 1.0);
        std::vector<ViewContext> views = orbit_views(3, 5.0, 55.0, 32, 32);
        for (ViewContext& v : views)
            v.camera = CameraModel::look_at(v.camera.center(), v.camera.center() * 2.0,
                                            Vec3(0, 0, 1), 32, 32, 32, 32);  // look away
        CHECK_THROWS_AS((void)extract_mesh(s, views, 0.05, 0.2), EmptyVolumeError);
    }
    SUBCASE("truncation below two voxels is rejected") {
        const SplatSet s = plane_splats(5, 1.0);
        const std::vector<ViewContext> views = orbit_views(3, 5.0, 55.0, 32, 32);
        CHECK_THROWS_AS((void)extract_mesh(s, views, 0.05, 0.05), ValidationError);
    }
    SUBCASE("default voxel size tracks the scene diagonal") {
        const SplatSet s = plane_splats(5, 1.0);
        const double diag = (s.bbox_max() - s.bbox_min()).norm();
        CHECK(default_voxel_size(s) == doctest::Approx(diag / 256.0).epsilon(1e-12));
    }
}

TEST_CASE("mesh file writers") {
    namespace fs = std::filesystem;
    TriangleMesh mesh;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    mesh.triangles = {{0, 1, 2}, {0, 1, 3}};
    const std::string dir = scratch_dir("mesh_io");

    SUBCASE("ply has a well-formed header and the right counts") {
        const std::string path = (fs::path(dir) / "m.ply").string();
        write_mesh_ply(path, mesh);
        std::ifstream in(path, std::ios::binary);
        REQUIRE(in.good());
        std::string line;
        std::getline(in, line);
        CHECK(line == "ply");
        bool saw_vertex = false, saw_face = false;
        while (std::getline(in, line) && line != "end_header") {
            if (line.find("element vertex 4") != std::string::npos) saw_vertex = true;
            if (line.find("element face 2") != std::string::npos) saw_face = true;
        }
        CHECK(saw_vertex);
        CHECK(saw_face);
    }
    SUBCASE("obj lists one v line per vertex and one f line per triangle") {
        const std::string path = (fs::path(dir) / "m.obj").string();
        write_mesh_obj(path, mesh);
        std::ifstream in(path);
        REQUIRE(in.good());
        int v_lines = 0, f_lines = 0;
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("v ", 0) == 0) ++v_lines;
            if (line.rfind("f ", 0) == 0) {
                ++f_lines;
                std::istringstream ss(line.substr(2));
                int a = 0, b = 0, c = 0;
                ss >> a >> b >> c;
                CHECK(a >= 1);
                CHECK(b >= 1);
                CHECK(c >= 1);
                CHECK(a <= 4);
                CHECK(b <= 4);
                CHECK(c <= 4);
            }
        }
        CHECK(v_lines == 4);
        CHECK(f_lines == 2);
    }
    fs::remove_all(dir);
}
