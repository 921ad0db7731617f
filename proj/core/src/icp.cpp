#include "photosplat/icp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace psplat {

std::vector<Vec3> RigidTransform::apply(const std::vector<Vec3>& pts) const {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) out.push_back(apply(p));
    return out;
}

NearestNeighbor::NearestNeighbor(const std::vector<Vec3>& points) : points_(&points) {
    if (points.empty()) throw EmptySetError("nearest-neighbour index over an empty set");
    exhaustive_ = points.size() <= 10000;
    if (exhaustive_) return;

    Vec3 hi = points[0];
    lo_ = points[0];
    for (const Vec3& p : points) {
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 extent = hi - lo_;
    const double diag = extent.norm();
    // Roughly one point per cell on average.
    cell_ = std::max(diag / std::cbrt(static_cast<double>(points.size())), 1e-12);
    nx_ = std::max(1, static_cast<int>(extent.x() / cell_) + 1);
    ny_ = std::max(1, static_cast<int>(extent.y() / cell_) + 1);
    nz_ = std::max(1, static_cast<int>(extent.z() / cell_) + 1);
    cells_.resize(static_cast<std::size_t>(nx_) * ny_ * nz_);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 r = (points[i] - lo_) / cell_;
        const int cx = std::clamp(static_cast<int>(r.x()), 0, nx_ - 1);
        const int cy = std::clamp(static_cast<int>(r.y()), 0, ny_ - 1);
        const int cz = std::clamp(static_cast<int>(r.z()), 0, nz_ - 1);
        cells_[cell_index(cx, cy, cz)].push_back(static_cast<std::uint32_t>(i));
    }
}

std::size_t NearestNeighbor::nearest(const Vec3& q) const {
    const std::vector<Vec3>& pts = *points_;
    std::size_t best = 0;
    double best2 = std::numeric_limits<double>::max();
    if (exhaustive_) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double d2 = (pts[i] - q).squaredNorm();
            if (d2 < best2) {
                best2 = d2;
                best = i;
            }
        }
        return best;
    }

    const Vec3 r = (q - lo_) / cell_;
    const int qx = std::clamp(static_cast<int>(std::floor(r.x())), 0, nx_ - 1);
    const int qy = std::clamp(static_cast<int>(std::floor(r.y())), 0, ny_ - 1);
    const int qz = std::clamp(static_cast<int>(std::floor(r.z())), 0, nz_ - 1);
    const int max_shell = std::max({nx_, ny_, nz_});
    for (int shell = 0; shell <= max_shell; ++shell) {
        // Once a candidate is known, any further shell is at least
        // (shell-1) cells away from the query; stop when that exceeds it.
        if (best2 < std::numeric_limits<double>::max()) {
            const double reach = (shell - 1) * cell_;
            if (reach > 0.0 && reach * reach > best2) break;
        }
        const int x0 = std::max(0, qx - shell), x1 = std::min(nx_ - 1, qx + shell);
        const int y0 = std::max(0, qy - shell), y1 = std::min(ny_ - 1, qy + shell);
        const int z0 = std::max(0, qz - shell), z1 = std::min(nz_ - 1, qz + shell);
        for (int cz = z0; cz <= z1; ++cz) {
            for (int cy = y0; cy <= y1; ++cy) {
                for (int cx = x0; cx <= x1; ++cx) {
                    const bool boundary = cx == qx - shell || cx == qx + shell ||
                                          cy == qy - shell || cy == qy + shell ||
                                          cz == qz - shell || cz == qz + shell;
                    if (!boundary) continue;  // interior cells were already visited
                    for (std::uint32_t i : cells_[cell_index(cx, cy, cz)]) {
                        const double d2 = (pts[i] - q).squaredNorm();
                        if (d2 < best2) {
                            best2 = d2;
                            best = i;
                        }
                    }
                }
            }
        }
    }
    return best;
}

double NearestNeighbor::distance(const Vec3& q) const {
    return ((*points_)[nearest(q)] - q).norm();
}

namespace {

Vec3 centroid(const std::vector<Vec3>& pts) {
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

void require_full_rank(const std::vector<Vec3>& pts, const char* which) {
    if (pts.size() < 3)
        throw DegenerateGeometryError(std::string(which) + " needs at least 3 points");
    const Vec3 c = centroid(pts);
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : pts) cov += (p - c) * (p - c).transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const Vec3 ev = es.eigenvalues();  // ascending
    if (ev(1) <= 1e-12 * std::max(ev(2), 1e-300))
        throw DegenerateGeometryError(std::string(which) + " points are collinear");
}

// Closed-form least-squares rigid motion from paired points.
RigidTransform fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    const Vec3 cs = centroid(src), cd = centroid(dst);
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        h += (src[i] - cs) * (dst[i] - cd).transpose();
    const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    RigidTransform t;
    t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    t.translation = cd - t.rotation * cs;
    return t;
}

}  // namespace

RigidTransform align_icp(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                         int max_iters, double tol) {
    require_full_rank(source, "icp source");
    require_full_rank(target, "icp target");

    RigidTransform t;
    t.translation = centroid(target) - centroid(source);

    const NearestNeighbor nn(target);
    std::vector<Vec3> matched(source.size());
    double prev_rms = std::numeric_limits<double>::max();
    for (int iter = 0; iter < max_iters; ++iter) {
        const std::vector<Vec3> moved = t.apply(source);
        double sum2 = 0.0;
        for (std::size_t i = 0; i < moved.size(); ++i) {
            matched[i] = target[nn.nearest(moved[i])];
            sum2 += (matched[i] - moved[i]).squaredNorm();
        }
        const double rms = std::sqrt(sum2 / static_cast<double>(moved.size()));
        if (std::abs(prev_rms - rms) < tol) break;
        prev_rms = rms;
        t = fit_rigid(source, matched);
    }
    return t;
}

double hausdorff_normalized(const std::vector<Vec3>& pred, const std::vector<Vec3>& truth) {
    if (pred.empty() || truth.empty()) throw EmptySetError("hausdorff over an empty set");

    const auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        const NearestNeighbor nn(to);
        double worst = 0.0;
        for (const Vec3& p : from) worst = std::max(worst, nn.distance(p));
        return worst;
    };
    const double d = std::max(directed(pred, truth), directed(truth, pred));

    Vec3 lo = truth[0], hi = truth[0];
    for (const Vec3& p : truth) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double diag = (hi - lo).norm();
    if (diag == 0.0) {
        if (d == 0.0) return 0.0;
        throw DegenerateGeometryError("truth set has zero extent; cannot normalize");
    }
    return d / diag;
}

}  // namespace psplat
