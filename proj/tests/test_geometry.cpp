#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "photosplat/geometry.hpp"

using namespace psplat;

namespace {

Mat4 homogeneous_world_from_splat(const SplatFrame& f) {
    Mat4 t = Mat4::Identity();
    const Mat3 r = rotation_matrix(f.orientation);
    t.block<3, 1>(0, 0) = f.scale_u * r.col(0);
    t.block<3, 1>(0, 1) = f.scale_v * r.col(1);
    t.block<3, 1>(0, 2) = Vec3::Zero();
    t.block<3, 1>(0, 3) = f.position;
    return t;
}

UnitQuaternion random_quaternion(Rng& rng) {
    Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    if (q.norm() < 1e-6) q = Vec4(1, 0, 0, 0);
    return UnitQuaternion::from_vec(q);
}

}  // namespace

TEST_CASE("quaternion basics") {
    SUBCASE("identity maps to identity matrix") {
        CHECK(rotation_matrix(UnitQuaternion::identity()).isApprox(Mat3::Identity(), 1e-15));
    }
    SUBCASE("axis-angle 90 degrees about z") {
        const auto q = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
        const Mat3 r = rotation_matrix(q);
        CHECK((r * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);
        CHECK((r * Vec3::UnitY() + Vec3::UnitX()).norm() < 1e-12);
    }
    SUBCASE("unit norm and proper rotation after every construction") {
        Rng rng(7);
        for (int i = 0; i < 200; ++i) {
            const auto q = random_quaternion(rng);
            CHECK(std::abs(q.norm() - 1.0) < 1e-9);
            const Mat3 r = rotation_matrix(q);
            CHECK(orthonormal(r));
            CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
        }
    }
    SUBCASE("double cover: q and -q give the same matrix") {
        Rng rng(8);
        for (int i = 0; i < 50; ++i) {
            const auto q = random_quaternion(rng);
            const auto neg = UnitQuaternion::from_vec(-q.vec());
            CHECK(rotation_matrix(q).isApprox(rotation_matrix(neg), 1e-12));
        }
    }
    SUBCASE("columns form a right-handed frame with t_w = t_u x t_v") {
        Rng rng(9);
        for (int i = 0; i < 50; ++i) {
            const Mat3 r = rotation_matrix(random_quaternion(rng));
            CHECK((r.col(0).cross(r.col(1)) - r.col(2)).norm() < 1e-12);
        }
    }
    SUBCASE("quaternion_from_normal aligns +z with the target") {
        Rng rng(10);
        for (int i = 0; i < 100; ++i) {
            Vec3 n(rng.normal(), rng.normal(), rng.normal());
            if (n.norm() < 1e-6) n = Vec3::UnitZ();
            n.normalize();
            const Mat3 r = rotation_matrix(quaternion_from_normal(n));
            CHECK((r.col(2) - n).norm() < 1e-9);
        }
    }
}

TEST_CASE("rotation_matrix_jacobian matches tangent-projected finite differences") {
    Rng rng(11);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = random_quaternion(rng);
        const auto jac = rotation_matrix_jacobian(q);
        const Vec4 qv = q.vec();
        for (int m = 0; m < 4; ++m) {
            Vec4 up = qv, dn = qv;
            up[m] += h;
            dn[m] -= h;
            const Mat3 fd = (rotation_matrix(UnitQuaternion::from_vec(up)) -
                             rotation_matrix(UnitQuaternion::from_vec(dn))) /
                            (2 * h);
            // rotation_matrix normalizes its argument, so the measured
            // derivative is the unit-sphere Jacobian composed with the
            // tangent projector (I - q q^T).
            Mat3 an = Mat3::Zero();
            for (int k = 0; k < 4; ++k) {
                const double proj = (k == m ? 1.0 : 0.0) - qv[k] * qv[m];
                an += jac[k] * proj;
            }
            CHECK((fd - an).norm() < 1e-6);
        }
    }
}

TEST_CASE("world_from_splat") {
    SUBCASE("identity frame") {
        SplatFrame f;
        const Vec3 p = world_from_splat(f, Vec2(0.3, -0.2));
        CHECK((p - Vec3(0.3, -0.2, 0.0)).norm() < 1e-15);
    }
    SUBCASE("center maps to center for any frame") {
        Rng rng(12);
        for (int i = 0; i < 20; ++i) {
            SplatFrame f;
            f.position = Vec3(rng.normal(), rng.normal(), rng.normal());
            f.scale_u = std::exp(rng.normal());
            f.scale_v = std::exp(rng.normal());
            f.orientation = random_quaternion(rng);
            CHECK((world_from_splat(f, Vec2::Zero()) - f.position).norm() < 1e-15);
        }
    }
    SUBCASE("90 degree rotation about z with anisotropic scale") {
        SplatFrame f;
        f.scale_u = 2.0;
        f.scale_v = 1.0;
        f.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
        CHECK((world_from_splat(f, Vec2(1, 0)) - Vec3(0, 2, 0)).norm() < 1e-12);
    }
    SUBCASE("equals the homogeneous matrix product") {
        Rng rng(13);
        for (int i = 0; i < 50; ++i) {
            SplatFrame f;
            f.position = Vec3(rng.normal(), rng.normal(), rng.normal());
            f.scale_u = std::exp(0.3 * rng.normal());
            f.scale_v = std::exp(0.3 * rng.normal());
            f.orientation = random_quaternion(rng);
            const Vec2 local(rng.normal(), rng.normal());
            const Vec4 hom(local.x(), local.y(), rng.normal(), 1.0);  // third coord ignored
            const Vec4 via_matrix = homogeneous_world_from_splat(f) * hom;
            const Vec3 direct = world_from_splat(f, local);
            CHECK((via_matrix.head<3>() - direct).norm() <
                  1e-9 * std::max(1.0, direct.norm()));
        }
    }
}

TEST_CASE("project") {
    SUBCASE("boresight maps to the principal point") {
        CameraModel cam;
        cam.fx = cam.fy = 100.0;
        cam.cx = 64.0;
        cam.cy = 48.0;
        cam.width = 128;
        cam.height = 96;
        const auto p = project(cam, Vec3(0, 0, 5));
        REQUIRE(p.has_value());
        CHECK((p->pixel - Vec2(64, 48)).norm() < 1e-12);
        CHECK(p->depth == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("similar triangles") {
        CameraModel cam;
        cam.fx = cam.fy = 100.0;
        cam.cx = cam.cy = 64.0;
        cam.width = cam.height = 128;
        const auto p = project(cam, Vec3(0.1, 0, 1));
        REQUIRE(p.has_value());
        CHECK((p->pixel - Vec2(74, 64)).norm() < 1e-12);
        CHECK(p->depth == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("point behind the camera is culled") {
        CameraModel cam;
        cam.fx = cam.fy = 100.0;
        cam.width = cam.height = 64;
        CHECK_FALSE(project(cam, Vec3(0, 0, -1)).has_value());
        CHECK_FALSE(project(cam, Vec3(0, 0, 0)).has_value());
    }
    SUBCASE("random pose equals explicit matrix chain") {
        Rng rng(14);
        for (int i = 0; i < 100; ++i) {
            CameraModel cam;
            cam.fx = 80 + 40 * rng.uniform();
            cam.fy = 80 + 40 * rng.uniform();
            cam.cx = 32 + rng.uniform();
            cam.cy = 32 + rng.uniform();
            cam.width = cam.height = 64;
            cam.rotation = rotation_matrix(random_quaternion(rng));
            cam.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
            const Vec3 x(rng.normal(), rng.normal(), rng.normal());
            const Vec3 xc = cam.rotation * x + cam.translation;
            const auto p = project(cam, x);
            if (xc.z() <= kDepthEpsilon) {
                CHECK_FALSE(p.has_value());
                continue;
            }
            REQUIRE(p.has_value());
            const Vec2 expected(cam.fx * xc.x() / xc.z() + cam.cx,
                                cam.fy * xc.y() / xc.z() + cam.cy);
            CHECK((p->pixel - expected).norm() < 1e-9 * std::max(1.0, expected.norm()));
            CHECK(p->depth == doctest::Approx(xc.z()).epsilon(1e-12));
        }
    }
}

TEST_CASE("pixel_ray") {
    CameraModel cam;
    cam.fx = cam.fy = 120.0;
    cam.cx = 63.5;
    cam.cy = 47.5;
    cam.width = 128;
    cam.height = 96;
    Rng rng(15);
    cam.rotation = rotation_matrix(random_quaternion(rng));
    cam.translation = Vec3(0.4, -0.2, 1.1);

    SUBCASE("principal point gives the boresight") {
        const Ray r = pixel_ray(cam, Vec2(cam.cx, cam.cy));
        CHECK((r.origin - cam.center()).norm() < 1e-12);
        CHECK((r.direction - cam.boresight()).norm() < 1e-12);
    }
    SUBCASE("one-focal-length offset is a 45 degree ray") {
        CameraModel ident;
        ident.fx = ident.fy = 100.0;
        ident.cx = ident.cy = 50.0;
        ident.width = ident.height = 100;
        const Ray r = pixel_ray(ident, Vec2(ident.cx + ident.fx, ident.cy));
        CHECK((r.direction - Vec3(1, 0, 1).normalized()).norm() < 1e-12);
    }
    SUBCASE("project round-trips 1000 random pixels") {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const Vec2 px(rng.uniform(0.0, cam.width - 1.0), rng.uniform(0.0, cam.height - 1.0));
            const Ray r = pixel_ray(cam, px);
            CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
            const double t = rng.uniform(0.5, 20.0);
            const auto back = project(cam, r.origin + t * r.direction);
            REQUIRE(back.has_value());
            worst = std::max(worst, (back->pixel - px).norm());
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("projection chain is invariant under a global rigid rotation") {
    Rng rng(16);
    const Mat3 g = rotation_matrix(random_quaternion(rng));
    for (int i = 0; i < 50; ++i) {
        SplatFrame f;
        f.position = Vec3(rng.normal(), rng.normal(), rng.normal());
        f.scale_u = std::exp(0.2 * rng.normal());
        f.scale_v = std::exp(0.2 * rng.normal());
        f.orientation = random_quaternion(rng);
        CameraModel cam;
        cam.fx = cam.fy = 100.0;
        cam.cx = cam.cy = 32.0;
        cam.width = cam.height = 64;
        cam.rotation = rotation_matrix(random_quaternion(rng));
        cam.translation = Vec3(rng.normal(), rng.normal(), 4.0 + rng.uniform());

        // Rotate the world: surface points and camera pose follow x -> g x.
        const Mat3 r1 = rotation_matrix(f.orientation);
        const Mat3 r2 = g * r1;
        const Vec2 local(rng.normal(), rng.normal());
        const Vec3 x1 =
            f.position + f.scale_u * local.x() * r1.col(0) + f.scale_v * local.y() * r1.col(1);
        const Vec3 x2 = g * f.position + f.scale_u * local.x() * r2.col(0) +
                        f.scale_v * local.y() * r2.col(1);
        CHECK((g * x1 - x2).norm() < 1e-12 * std::max(1.0, x1.norm()));

        CameraModel cam2 = cam;
        cam2.rotation = cam.rotation * g.transpose();
        const auto p1 = project(cam, x1);
        const auto p2 = project(cam2, g * x1);
        REQUIRE(p1.has_value() == p2.has_value());
        if (p1) {
            CHECK((p1->pixel - p2->pixel).norm() < 1e-9);
            CHECK(p1->depth == doctest::Approx(p2->depth).epsilon(1e-12));
        }
    }
}

TEST_CASE("look_at geometry") {
    const Vec3 eye(3, -2, 5);
    const CameraModel cam = CameraModel::look_at(eye, Vec3::Zero(), Vec3::UnitZ(), 100, 100, 64, 64);
    CHECK((cam.center() - eye).norm() < 1e-12);
    CHECK((cam.boresight() + eye.normalized()).norm() < 1e-12);  // looks toward origin
    CHECK(orthonormal(cam.rotation));
    const auto p = project(cam, Vec3::Zero());
    REQUIRE(p.has_value());
    CHECK((p->pixel - Vec2(cam.cx, cam.cy)).norm() < 1e-9);
    CHECK(p->depth == doctest::Approx(eye.norm()).epsilon(1e-12));
}
