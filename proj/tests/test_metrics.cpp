#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "photosplat/icp.hpp"
#include "photosplat/metrics.hpp"

using namespace psplat;

namespace {

Image random_image(int h, int w, Rng& rng, double lo, double hi) {
    Image img(h, w);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) img[i] = rng.uniform(lo, hi);
    return img;
}

std::vector<Vec3> random_points(int n, Rng& rng, double span) {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        pts.emplace_back(rng.uniform(-span, span), rng.uniform(-span, span),
                         rng.uniform(-span, span));
    return pts;
}

}  // namespace

TEST_CASE("psnr") {
    SUBCASE("identical images are flagged infinite") {
        const Image a(8, 8, 0.3);
        const PsnrResult r = psnr(a, a);
        CHECK(r.infinite);
    }
    SUBCASE("a known constant offset gives the closed-form value") {
        const Image a(16, 16, 0.5);
        Image b = a;
        for (std::size_t i = 0; i < b.pixel_count(); ++i) b[i] += 0.1;
        const PsnrResult r = psnr(a, b);
        CHECK_FALSE(r.infinite);
        CHECK(r.db == doctest::Approx(10.0 * std::log10(1.0 / 0.01)).epsilon(1e-9));
    }
    SUBCASE("random images match a brute-force evaluation") {
        Rng rng(70);
        for (int trial = 0; trial < 20; ++trial) {
            const Image a = random_image(9, 13, rng, 0.0, 1.0);
            const Image b = random_image(9, 13, rng, 0.0, 1.0);
            double mse = 0.0;
            for (std::size_t i = 0; i < a.pixel_count(); ++i)
                mse += (a[i] - b[i]) * (a[i] - b[i]);
            mse /= static_cast<double>(a.pixel_count());
            const PsnrResult r = psnr(a, b);
            CHECK(r.db == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));
        }
    }
    SUBCASE("peak rescales the score") {
        Rng rng(71);
        const Image a = random_image(8, 8, rng, 0.0, 1.0);
        const Image b = random_image(8, 8, rng, 0.0, 1.0);
        CHECK(psnr(a, b, 2.0).db ==
              doctest::Approx(psnr(a, b, 1.0).db + 20.0 * std::log10(2.0)).epsilon(1e-9));
    }
    SUBCASE("shape mismatch throws") {
        CHECK_THROWS_AS((void)psnr(Image(4, 4), Image(5, 4)), ShapeMismatchError);
    }
}

TEST_CASE("normal_error_deg") {
    const int n = 8;
    std::array<Image, 3> a, b;
    for (int c = 0; c < 3; ++c) {
        a[c] = Image(n, n, 0.0);
        b[c] = Image(n, n, 0.0);
    }
    Image mask(n, n, 1.0);
    SUBCASE("equal fields have zero error") {
        a[2].fill(1.0);
        b[2].fill(1.0);
        CHECK(normal_error_deg(a, b, mask) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("a uniform known tilt reports its angle") {
        a[2].fill(1.0);
        const double th = 23.0 * M_PI / 180.0;
        b[0].fill(std::sin(th));
        b[2].fill(std::cos(th));
        CHECK(normal_error_deg(a, b, mask) == doctest::Approx(23.0).epsilon(1e-9));
    }
    SUBCASE("masked pixels are ignored") {
        a[2].fill(1.0);
        b[2].fill(1.0);
        b[0].at(3, 3) = 1.0;  // corrupt one pixel
        b[2].at(3, 3) = 0.0;
        mask.at(3, 3) = 0.0;
        CHECK(normal_error_deg(a, b, mask) == doctest::Approx(0.0).epsilon(1e-12));
        mask.at(3, 3) = 1.0;
        CHECK(normal_error_deg(a, b, mask) ==
              doctest::Approx(90.0 / (n * n)).epsilon(1e-9));
    }
    SUBCASE("random unit fields match a brute-force mean") {
        Rng rng(72);
        double expect = 0.0;
        int count = 0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                Vec3 u(rng.normal(), rng.normal(), rng.normal());
                Vec3 v(rng.normal(), rng.normal(), rng.normal());
                u.normalize();
                v.normalize();
                const bool keep = rng.uniform() < 0.8;
                mask.at(y, x) = keep ? 1.0 : 0.0;
                for (int c = 0; c < 3; ++c) {
                    a[c].at(y, x) = u[c];
                    b[c].at(y, x) = v[c];
                }
                if (keep) {
                    expect += std::acos(std::clamp(u.dot(v), -1.0, 1.0)) * 180.0 / M_PI;
                    ++count;
                }
            }
        expect /= count;
        CHECK(normal_error_deg(a, b, mask) == doctest::Approx(expect).epsilon(1e-9));
    }
    SUBCASE("empty mask throws") {
        mask.fill(0.0);
        CHECK_THROWS_AS((void)normal_error_deg(a, b, mask), EmptyMaskError);
    }
}

TEST_CASE("fit_affine and albedo_error") {
    SUBCASE("fit recovers an exact affine relation") {
        Rng rng(73);
        const Image x = random_image(10, 10, rng, 0.1, 0.9);
        Image y = x;
        for (std::size_t i = 0; i < y.pixel_count(); ++i) y[i] = 1.7 * x[i] - 0.2;
        const AffineFit f = fit_affine(x, y);
        CHECK(f.scale == doctest::Approx(1.7).epsilon(1e-9));
        CHECK(f.offset == doctest::Approx(-0.2).epsilon(1e-9));
    }
    SUBCASE("fit minimizes the residual: gradient of the normal equations vanishes") {
        Rng rng(74);
        const Image x = random_image(12, 9, rng, 0.0, 1.0);
        const Image y = random_image(12, 9, rng, 0.0, 1.0);
        const AffineFit f = fit_affine(x, y);
        double g_scale = 0.0, g_offset = 0.0;
        for (std::size_t i = 0; i < x.pixel_count(); ++i) {
            const double r = f.scale * x[i] + f.offset - y[i];
            g_scale += r * x[i];
            g_offset += r;
        }
        CHECK(std::abs(g_scale) < 1e-9);
        CHECK(std::abs(g_offset) < 1e-9);
    }
    SUBCASE("constant prediction cannot be fitted") {
        const Image x(6, 6, 0.4);
        Rng rng(75);
        const Image y = random_image(6, 6, rng, 0.1, 0.9);
        CHECK_THROWS_AS((void)fit_affine(x, y), DegenerateFitError);
    }
    SUBCASE("albedo_error is zero under an affine-related prediction") {
        Rng rng(76);
        const Image truth = random_image(10, 10, rng, 0.2, 0.8);
        Image pred = truth;
        for (std::size_t i = 0; i < pred.pixel_count(); ++i) pred[i] = 0.5 * truth[i] + 0.05;
        const Image mask(10, 10, 1.0);
        const AlbedoError e = albedo_error(pred, truth, mask);
        CHECK(e.mean_rel == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(e.scale == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(e.offset == doctest::Approx(-0.1).epsilon(1e-6));
    }
    SUBCASE("albedo_error matches a brute-force evaluation on the mask") {
        Rng rng(77);
        const Image truth = random_image(11, 7, rng, 0.2, 0.9);
        const Image pred = random_image(11, 7, rng, 0.1, 0.9);
        Image mask(11, 7, 0.0);
        for (std::size_t i = 0; i < mask.pixel_count(); ++i)
            mask[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
        const AlbedoError e = albedo_error(pred, truth, mask);
        double expect = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
            if (mask[i] <= 0.5) continue;
            expect += std::abs(truth[i] - (e.scale * pred[i] + e.offset)) / truth[i];
            ++count;
        }
        CHECK(e.mean_rel == doctest::Approx(expect / count).epsilon(1e-9));
    }
}

TEST_CASE("overlap_mask") {
    const int n = 6;
    Image acc(n, n, 0.0);
    std::array<Image, 3> gt;
    for (int c = 0; c < 3; ++c) gt[c] = Image(n, n, 0.0);
    acc.at(1, 1) = 0.9;
    gt[2].at(1, 1) = 1.0;  // covered and valid -> in the mask
    acc.at(2, 2) = 0.9;    // covered, gt invalid
    gt[2].at(3, 3) = 1.0;  // valid, not covered (acc 0)
    acc.at(4, 4) = 0.4;    // below the coverage threshold
    gt[2].at(4, 4) = 1.0;
    const Image mask = overlap_mask(acc, gt);
    int set = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i)
        if (mask[i] > 0.5) ++set;
    CHECK(set == 1);
    CHECK(mask.at(1, 1) > 0.5);
}

TEST_CASE("nearest neighbour index") {
    SUBCASE("grid path agrees with exhaustive search above the cutover") {
        Rng rng(78);
        const std::vector<Vec3> pts = random_points(12000, rng, 5.0);
        const NearestNeighbor nn(pts);
        for (int q = 0; q < 300; ++q) {
            const Vec3 p(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-6, 6));
            double best = 1e300;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double d = (pts[i] - p).squaredNorm();
                if (d < best) {
                    best = d;
                    best_i = i;
                }
            }
            CHECK(nn.distance(p) == doctest::Approx(std::sqrt(best)).epsilon(1e-12));
            CHECK((pts[nn.nearest(p)] - p).norm() ==
                  doctest::Approx((pts[best_i] - p).norm()).epsilon(1e-12));
        }
    }
    SUBCASE("member points are their own neighbours") {
        Rng rng(79);
        const std::vector<Vec3> pts = random_points(500, rng, 2.0);
        const NearestNeighbor nn(pts);
        for (int q = 0; q < 100; ++q) {
            const std::size_t i = static_cast<std::size_t>(rng.uniform_int(500));
            CHECK(nn.distance(pts[i]) == doctest::Approx(0.0).epsilon(1e-15));
        }
    }
    SUBCASE("empty input throws") {
        CHECK_THROWS_AS(NearestNeighbor(std::vector<Vec3>{}), EmptySetError);
    }
}

TEST_CASE("icp alignment") {
    SUBCASE("identity when the clouds already coincide") {
        Rng rng(80);
        const std::vector<Vec3> pts = random_points(400, rng, 1.0);
        const RigidTransform t = align_icp(pts, pts);
        CHECK((t.rotation - Mat3::Identity()).norm() < 1e-9);
        CHECK(t.translation.norm() < 1e-9);
    }
    SUBCASE("recovers a known small rigid motion") {
        Rng rng(81);
        const std::vector<Vec3> target = random_points(600, rng, 1.0);
        const Mat3 r =
            rotation_matrix(UnitQuaternion::from_axis_angle(Vec3(0.3, 1.0, 0.2).normalized(),
                                                            4.0 * M_PI / 180.0));
        const Vec3 tr(0.02, -0.015, 0.03);
        std::vector<Vec3> source;
        source.reserve(target.size());
        // source = r^-1 (target - tr): applying the recovered transform to it
        // must land back on the target.
        for (const Vec3& p : target) source.push_back(r.transpose() * (p - tr));
        const RigidTransform t = align_icp(source, target);
        double worst = 0.0;
        for (std::size_t i = 0; i < source.size(); ++i)
            worst = std::max(worst, (t.apply(source[i]) - target[i]).norm());
        CHECK(worst < 1e-6);
    }
    SUBCASE("degenerate geometry throws") {
        const std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
        CHECK_THROWS_AS((void)align_icp(two, two), DegenerateGeometryError);
    }
}

TEST_CASE("hausdorff_normalized") {
    SUBCASE("zero for identical clouds") {
        Rng rng(82);
        const std::vector<Vec3> pts = random_points(300, rng, 1.0);
        CHECK(hausdorff_normalized(pts, pts) == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("known value for a shifted pair of points") {
        // truth: two points on the x axis, diagonal length 2.
        const std::vector<Vec3> truth = {Vec3(-1, 0, 0), Vec3(1, 0, 0)};
        const std::vector<Vec3> pred = {Vec3(-1, 0, 0), Vec3(1, 0.5, 0)};
        // directed pred->truth: 0.5; truth->pred: 0.5; diag = 2.
        CHECK(hausdorff_normalized(pred, truth) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("matches a brute-force double sweep") {
        Rng rng(83);
        const std::vector<Vec3> a = random_points(180, rng, 1.0);
        const std::vector<Vec3> b = random_points(140, rng, 1.2);
        const auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
            double worst = 0.0;
            for (const Vec3& p : from) {
                double best = 1e300;
                for (const Vec3& q : to) best = std::min(best, (p - q).norm());
                worst = std::max(worst, best);
            }
            return worst;
        };
        Vec3 lo = b[0], hi = b[0];
        for (const Vec3& p : b) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double expect = std::max(directed(a, b), directed(b, a)) / (hi - lo).norm();
        CHECK(hausdorff_normalized(a, b) == doctest::Approx(expect).epsilon(1e-12));
    }
}
