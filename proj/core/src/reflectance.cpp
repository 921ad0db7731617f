#include "photosplat/reflectance.hpp"

namespace psplat {

const char* to_string(Appearance a) {
    switch (a) {
        case Appearance::SH: return "sh";
        case Appearance::Lambert: return "lambert";
        case Appearance::LommelSeeliger: return "lommel-seeliger";
        case Appearance::LunarLambert: return "lunar-lambert";
    }
    return "?";
}

Appearance appearance_from_string(const std::string& s) {
    if (s == "sh") return Appearance::SH;
    if (s == "lambert") return Appearance::Lambert;
    if (s == "lommel-seeliger" || s == "ls") return Appearance::LommelSeeliger;
    if (s == "lunar-lambert" || s == "ll" || s == "mcewen") return Appearance::LunarLambert;
    throw ValidationError("unknown appearance model: " + s);
}

std::string appearance_to_string(Appearance a) {
    switch (a) {
        case Appearance::SH: return "sh";
        case Appearance::Lambert: return "lambert";
        case Appearance::LommelSeeliger: return "lommel-seeliger";
        case Appearance::LunarLambert: return "lunar-lambert";
    }
    throw ValidationError("unknown appearance enum value");
}

static double clamped(double x) { return x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x); }

PhotometricAngles angles(const Vec3& normal, const SunSpec& sun, const Vec3& to_camera) {
    PhotometricAngles a;
    a.incidence = std::acos(clamped(normal.dot(sun.direction)));
    a.emission = std::acos(clamped(normal.dot(to_camera)));
    a.phase = std::acos(clamped(sun.direction.dot(to_camera)));
    return a;
}

double phase_weight(double phase_radians) {
    return std::exp(-phase_radians * (180.0 / M_PI) / 60.0);
}

double disk_lambert(const PhotometricAngles& a) {
    return std::max(std::cos(a.incidence), 0.0);
}

double disk_lommel_seeliger(const PhotometricAngles& a) {
    const double mu0 = std::max(std::cos(a.incidence), 0.0);
    if (mu0 <= 0.0) return 0.0;
    const double mu = std::max(std::cos(a.emission), 0.0);
    return 2.0 * mu0 / std::max(mu0 + mu, kDiskDenominatorFloor);
}

double disk_lunar_lambert(const PhotometricAngles& a) {
    const double g = phase_weight(a.phase);
    return (1.0 - g) * disk_lambert(a) + g * disk_lommel_seeliger(a);
}

double disk_value(Appearance model, const PhotometricAngles& a) {
    switch (model) {
        case Appearance::Lambert: return disk_lambert(a);
        case Appearance::LommelSeeliger: return disk_lommel_seeliger(a);
        case Appearance::LunarLambert: return disk_lunar_lambert(a);
        case Appearance::SH: break;
    }
    throw ValidationError("disk_value: not a physics model");
}

DiskEval disk_eval(Appearance model, double mu0, double mu, double cphi) {
    DiskEval e;
    const bool lit = mu0 > 0.0;
    const double m0 = lit ? mu0 : 0.0;
    const double m = mu > 0.0 ? mu : 0.0;

    double lam = m0;
    double dlam_mu0 = lit ? 1.0 : 0.0;

    double ls = 0.0, dls_mu0 = 0.0, dls_mu = 0.0;
    if (lit) {
        const double den = std::max(m0 + m, kDiskDenominatorFloor);
        ls = 2.0 * m0 / den;
        if (m0 + m > kDiskDenominatorFloor) {
            dls_mu0 = 2.0 * m / (den * den);
            dls_mu = (mu > 0.0) ? -2.0 * m0 / (den * den) : 0.0;
        } else {
            dls_mu0 = 2.0 / den;
        }
    }

    switch (model) {
        case Appearance::Lambert:
            e.value = lam;
            e.d_mu0 = dlam_mu0;
            break;
        case Appearance::LommelSeeliger:
            e.value = ls;
            e.d_mu0 = dls_mu0;
            e.d_mu = dls_mu;
            break;
        case Appearance::LunarLambert: {
            const double c = clamped(cphi);
            const double phi = std::acos(c);
            const double g = phase_weight(phi);
            e.value = (1.0 - g) * lam + g * ls;
            e.d_mu0 = (1.0 - g) * dlam_mu0 + g * dls_mu0;
            e.d_mu = g * dls_mu;
            // dg/dphi = -g * 3/pi (60 deg in radians), dphi/dcphi = -1/sqrt(1-c^2)
            const double s2 = 1.0 - c * c;
            if (s2 > 1e-12 && std::abs(cphi) < 1.0) {
                const double dg = (-g * 3.0 / M_PI) * (-1.0 / std::sqrt(s2));
                e.d_cphi = dg * (ls - lam);
            }
            break;
        }
        case Appearance::SH:
            throw ValidationError("disk_eval: not a physics model");
    }
    return e;
}

namespace {
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};
}  // namespace

ShCoeffs sh_basis(const Vec3& dir) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    const double xx = x * x, yy = y * y, zz = z * z;
    ShCoeffs b;
    b[0] = kC0;
    b[1] = -kC1 * y;
    b[2] = kC1 * z;
    b[3] = -kC1 * x;
    b[4] = kC2[0] * x * y;
    b[5] = kC2[1] * y * z;
    b[6] = kC2[2] * (2.0 * zz - xx - yy);
    b[7] = kC2[3] * x * z;
    b[8] = kC2[4] * (xx - yy);
    b[9] = kC3[0] * y * (3.0 * xx - yy);
    b[10] = kC3[1] * x * y * z;
    b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    b[14] = kC3[5] * z * (xx - yy);
    b[15] = kC3[6] * x * (xx - 3.0 * yy);
    return b;
}

Eigen::Matrix<double, kShCoeffCount, 3> sh_basis_jacobian(const Vec3& dir) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    const double xx = x * x, yy = y * y, zz = z * z;
    Eigen::Matrix<double, kShCoeffCount, 3> j;
    j.setZero();
    j.row(1) = Vec3(0, -kC1, 0);
    j.row(2) = Vec3(0, 0, kC1);
    j.row(3) = Vec3(-kC1, 0, 0);
    j.row(4) = kC2[0] * Vec3(y, x, 0);
    j.row(5) = kC2[1] * Vec3(0, z, y);
    j.row(6) = kC2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    j.row(7) = kC2[3] * Vec3(z, 0, x);
    j.row(8) = kC2[4] * Vec3(2 * x, -2 * y, 0);
    j.row(9) = kC3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
    j.row(10) = kC3[1] * Vec3(y * z, x * z, x * y);
    j.row(11) = kC3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    j.row(12) = kC3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    j.row(13) = kC3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    j.row(14) = kC3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
    j.row(15) = kC3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
    return j;
}

double eval_sh(const ShCoeffs& coeffs, const Vec3& view_dir) {
    return std::max(sh_basis(view_dir).dot(coeffs) + 0.5, 0.0);
}

double splat_intensity(Appearance model, const ShCoeffs* sh, double albedo, const Vec3& normal,
                       const SunSpec& sun, const Vec3& to_camera, const ImageCalibration&) {
    if (model == Appearance::SH) {
        return eval_sh(*sh, -to_camera);
    }
    return albedo * disk_value(model, angles(normal, sun, to_camera));
}

}  // namespace psplat
