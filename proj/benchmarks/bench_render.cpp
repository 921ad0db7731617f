// Hot-path microbenchmarks: forward rasterization (tiled vs exhaustive),
// the backward pass, the image losses, and the reflectance kernels.

#include <benchmark/benchmark.h>

#include "photosplat/autograd.hpp"
#include "photosplat/losses.hpp"

using namespace psplat;

namespace {

SplatSet bench_scene(int count, Appearance variant, std::uint64_t seed) {
    Rng rng(seed);
    SplatSet s;
    s.variant = variant;
    for (int k = 0; k < count; ++k) {
        const Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.3, 0.3));
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        q.normalize();
        s.push_back(p, Vec2::Constant(std::log(rng.uniform(0.1, 0.3))), q,
                    logit(rng.uniform(0.3, 0.9)), std::log(rng.uniform(0.2, 0.8)),
                    ShCoeffs::Zero());
    }
    return s;
}

ViewContext bench_view(int size) {
    ViewContext v;
    v.name = "bench";
    v.camera = CameraModel::look_at(Vec3(0.8, 0.5, 5.5), Vec3::Zero(), Vec3::UnitZ(),
                                    0.9 * size, 0.9 * size, size, size);
    v.sun = Vec3(0.3, 0.2, 1.0).normalized();
    return v;
}

void bm_render_tiled(benchmark::State& state) {
    const SplatSet s = bench_scene(static_cast<int>(state.range(0)), Appearance::Lambert, 1);
    const ViewContext view = bench_view(128);
    for (auto _ : state) benchmark::DoNotOptimize(render(s, view));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_render_exhaustive(benchmark::State& state) {
    const SplatSet s = bench_scene(static_cast<int>(state.range(0)), Appearance::Lambert, 1);
    const ViewContext view = bench_view(128);
    RenderOptions opts;
    opts.exhaustive = true;
    for (auto _ : state) benchmark::DoNotOptimize(render(s, view, opts));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_backward(benchmark::State& state) {
    const SplatSet s = bench_scene(static_cast<int>(state.range(0)), Appearance::LunarLambert, 2);
    ViewContext view = bench_view(128);
    view.image = render(s, view).intensity;
    for (std::size_t i = 0; i < view.image.pixel_count(); ++i) view.image[i] += 0.05;
    for (auto _ : state)
        benchmark::DoNotOptimize(view_loss(s, view, LossConfig{}, /*with_grads=*/true));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_mssim(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(3);
    Image a(n, n), b(n, n);
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        a[i] = rng.uniform();
        b[i] = rng.uniform();
    }
    const LossConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(mssim(a, b, cfg));
    state.SetItemsProcessed(state.iterations() * n * n);
}

void bm_disk_functions(benchmark::State& state) {
    Rng rng(4);
    std::vector<PhotometricAngles> angles(1024);
    for (auto& a : angles)
        a = {rng.uniform(0.0, 1.4), rng.uniform(0.0, 1.4), rng.uniform(0.0, 2.4)};
    for (auto _ : state) {
        double acc = 0.0;
        for (const auto& a : angles)
            acc += disk_lambert(a) + disk_lommel_seeliger(a) + disk_lunar_lambert(a);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * angles.size() * 3);
}

}  // namespace

BENCHMARK(bm_render_tiled)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_render_exhaustive)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_backward)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mssim)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_disk_functions);

BENCHMARK_MAIN();
