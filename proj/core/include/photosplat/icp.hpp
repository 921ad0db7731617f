#pragma once

#include <vector>

#include "photosplat/common.hpp"

namespace psplat {

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    std::vector<Vec3> apply(const std::vector<Vec3>& pts) const;
};

// Uniform-grid nearest-neighbour index. Exhaustive search under 10^4
// points, expanding-shell grid queries above.
class NearestNeighbor {
public:
    explicit NearestNeighbor(const std::vector<Vec3>& points);
    std::size_t nearest(const Vec3& q) const;  // index into the input set
    double distance(const Vec3& q) const;

private:
    const std::vector<Vec3>* points_;
    bool exhaustive_;
    Vec3 lo_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<std::vector<std::uint32_t>> cells_;

    std::size_t cell_index(int cx, int cy, int cz) const {
        return (static_cast<std::size_t>(cz) * ny_ + cy) * nx_ + cx;
    }
};

// Point-to-point ICP with a closed-form rigid fit per iteration,
// initialized by centroid alignment. Stops when the correspondence RMS
// changes by less than tol between iterations.
RigidTransform align_icp(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                         int max_iters = 50, double tol = 1e-9);

// Symmetric Hausdorff distance divided by the bounding-box diagonal of the
// truth set. Alignment is the caller's job (align_icp).
double hausdorff_normalized(const std::vector<Vec3>& pred, const std::vector<Vec3>& truth);

}  // namespace psplat
