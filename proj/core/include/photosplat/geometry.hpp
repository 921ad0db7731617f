#pragma once

#include <optional>

#include "photosplat/common.hpp"

namespace psplat {

// Unit quaternion (w, x, y, z), passive attitude convention. The single
// quaternion->matrix conversion below is the source of truth for how
// orientations turn into frames everywhere in the project.
struct UnitQuaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static UnitQuaternion identity() { return {}; }
    static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);
    static UnitQuaternion from_vec(const Vec4& wxyz);

    Vec4 vec() const { return Vec4(w, x, y, z); }
    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    UnitQuaternion normalized() const;
};

// R whose columns are the rotated frame's basis vectors expressed in the
// parent frame; q and -q map to the same R.
Mat3 rotation_matrix(const UnitQuaternion& q);

// Derivative of rotation_matrix w.r.t. each component of the *unit*
// quaternion, in (w, x, y, z) order.
std::array<Mat3, 4> rotation_matrix_jacobian(const UnitQuaternion& q);

// Least-rotation quaternion aligning (0,0,1) with the given unit vector.
UnitQuaternion quaternion_from_normal(const Vec3& n);

// Oriented planar Gaussian: center p_W, in-plane scales, and orientation
// whose first two matrix columns span the disk. The third column is the
// disk normal by construction.
struct SplatFrame {
    Vec3 position = Vec3::Zero();
    double scale_u = 1.0;
    double scale_v = 1.0;
    UnitQuaternion orientation;

    Mat3 axes() const { return rotation_matrix(orientation); }
    Vec3 tangent_u() const { return axes().col(0); }
    Vec3 tangent_v() const { return axes().col(1); }
    Vec3 normal() const { return axes().col(2); }
};

// Maps local disk coordinates (u, v) to the world frame.
Vec3 world_from_splat(const SplatFrame& frame, const Vec2& local);

// Near-plane depth below which points are culled.
inline constexpr double kDepthEpsilon = 1e-6;

// Pinhole camera. world->camera is x_C = R_cw * x_W + translation; the
// camera z-axis is the boresight, x runs along image columns (width) and
// y along rows (height).
struct CameraModel {
    double fx = 1.0, fy = 1.0;  // focal lengths, px
    double cx = 0.0, cy = 0.0;  // principal point, px
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int width = 0, height = 0;

    Vec3 center() const { return -rotation.transpose() * translation; }
    Vec3 boresight() const { return rotation.row(2).transpose(); }
    Vec3 to_camera(const Vec3& x_world) const { return rotation * x_world + translation; }

    // Camera placed at `eye` looking at `target`; `up` fixes the roll.
    static CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                               double fy, int width, int height);
};

struct PixelPoint {
    Vec2 pixel;
    double depth;  // camera-frame z
};

// std::nullopt when the point lies at or behind the near plane.
std::optional<PixelPoint> project(const CameraModel& cam, const Vec3& x_world);

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit
};

// World-frame ray through the (continuous) pixel coordinate.
Ray pixel_ray(const CameraModel& cam, const Vec2& pixel);

// Ray/splat-plane intersection in local disk coordinates.
struct SplatHit {
    Vec2 local;
    double t;      // ray parameter
    Vec3 point;    // world-frame intersection
};

std::optional<SplatHit> intersect(const SplatFrame& frame, const Ray& ray);

bool orthonormal(const Mat3& r, double tol = 1e-9);

}  // namespace psplat
