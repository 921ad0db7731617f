#include "photosplat/geometry.hpp"

namespace psplat {

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), s * a.x(), s * a.y(), s * a.z()};
}

UnitQuaternion UnitQuaternion::from_vec(const Vec4& wxyz) {
    return UnitQuaternion{wxyz[0], wxyz[1], wxyz[2], wxyz[3]}.normalized();
}

UnitQuaternion UnitQuaternion::normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
}

Mat3 rotation_matrix(const UnitQuaternion& qin) {
    const UnitQuaternion q = qin.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

std::array<Mat3, 4> rotation_matrix_jacobian(const UnitQuaternion& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 dw, dx, dy, dz;
    dw << 0, -2 * z, 2 * y,
        2 * z, 0, -2 * x,
        -2 * y, 2 * x, 0;
    dx << 0, 2 * y, 2 * z,
        2 * y, -4 * x, -2 * w,
        2 * z, 2 * w, -4 * x;
    dy << -4 * y, 2 * x, 2 * w,
        2 * x, 0, 2 * z,
        -2 * w, 2 * z, -4 * y;
    dz << -4 * z, -2 * w, 2 * x,
        2 * w, -4 * z, 2 * y,
        2 * x, 2 * y, 0;
    return {dw, dx, dy, dz};
}

UnitQuaternion quaternion_from_normal(const Vec3& n) {
    const Vec3 zhat(0, 0, 1);
    const double c = clamp01(0.5 * (1.0 + zhat.dot(n)));
    if (c < 1e-12) {  // n == -z, rotate half turn about x
        return {0, 1, 0, 0};
    }
    Vec3 axis = zhat.cross(n);
    const double s = axis.norm();
    if (s < 1e-15) return UnitQuaternion::identity();
    axis /= s;
    const double angle = std::atan2(s, zhat.dot(n));
    return UnitQuaternion::from_axis_angle(axis, angle);
}

Vec3 world_from_splat(const SplatFrame& frame, const Vec2& local) {
    const Mat3 r = frame.axes();
    return frame.position + frame.scale_u * local.x() * r.col(0) +
           frame.scale_v * local.y() * r.col(1);
}

CameraModel CameraModel::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                                 double fy, int width, int height) {
    const Vec3 fwd = (target - eye).normalized();
    Vec3 right = fwd.cross(up);
    if (right.norm() < 1e-12) right = fwd.cross(Vec3(1, 0, 0));
    right.normalize();
    const Vec3 down = fwd.cross(right);  // +y runs down the image rows
    Mat3 r_cw;
    r_cw.row(0) = right.transpose();
    r_cw.row(1) = down.transpose();
    r_cw.row(2) = fwd.transpose();
    CameraModel cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.rotation = r_cw;
    cam.translation = -r_cw * eye;
    cam.width = width;
    cam.height = height;
    return cam;
}

std::optional<PixelPoint> project(const CameraModel& cam, const Vec3& x_world) {
    const Vec3 xc = cam.to_camera(x_world);
    if (xc.z() <= kDepthEpsilon) return std::nullopt;
    return PixelPoint{Vec2(cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy),
                      xc.z()};
}

Ray pixel_ray(const CameraModel& cam, const Vec2& pixel) {
    const Vec3 dir_cam((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0);
    return Ray{cam.center(), (cam.rotation.transpose() * dir_cam).normalized()};
}

std::optional<SplatHit> intersect(const SplatFrame& frame, const Ray& ray) {
    const Mat3 r = frame.axes();
    const Vec3 t_w = r.col(2);
    const double den = t_w.dot(ray.direction);
    if (std::abs(den) < 1e-9) return std::nullopt;
    const double t = t_w.dot(frame.position - ray.origin) / den;
    if (t <= kDepthEpsilon) return std::nullopt;
    const Vec3 x = ray.origin + t * ray.direction;
    const Vec3 d = x - frame.position;
    return SplatHit{Vec2(r.col(0).dot(d) / frame.scale_u, r.col(1).dot(d) / frame.scale_v), t, x};
}

bool orthonormal(const Mat3& r, double tol) {
    return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace psplat
