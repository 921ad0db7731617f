#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace psplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Base for all recoverable errors raised by the library. Subcommands map
// these to exit code 1 (validation) or 2 (runtime), see tools/.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : Error {
    using Error::Error;
};

struct EmptyInitError : ValidationError {
    using ValidationError::ValidationError;
};
struct ShapeMismatchError : ValidationError {
    using ValidationError::ValidationError;
};
struct MissingFileError : ValidationError {
    using ValidationError::ValidationError;
};
struct MalformedPoseError : ValidationError {
    using ValidationError::ValidationError;
};
struct DimensionMismatchError : ValidationError {
    using ValidationError::ValidationError;
};
struct EmptyMaskError : ValidationError {
    using ValidationError::ValidationError;
};
struct EmptySetError : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateGeometryError : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateFitError : ValidationError {
    using ValidationError::ValidationError;
};

struct MissingContributorsError : Error {
    using Error::Error;
};
struct NonFiniteLossError : Error {
    using Error::Error;
};
struct DivergedLossError : Error {
    using Error::Error;
};
struct EmptyVolumeError : Error {
    using Error::Error;
};

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distributions below are hand-rolled so streams are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {  // [0, 1)
        return (engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int n) {  // [0, n)
        return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
    }

    double normal() {  // Box-Muller, one sample per call
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace psplat
