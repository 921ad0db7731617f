#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "photosplat/dataset.hpp"
#include "photosplat/mesh.hpp"
#include "photosplat/report.hpp"
#include "photosplat/synthscene.hpp"
#include "photosplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace psplat;

namespace {

struct SynthArgs {
    std::string out;
    std::string variant = "lambert";
    std::uint64_t seed = 0;
    int views = 22;
    int image_size = 128;
    double size = 64.0;
    int grid = 257;
    int craters = 6;
    double fov = 40.0;
    double elevation = 65.0;
    double distance = 96.0;
    double phase_min = 20.0;
    double phase_max = 50.0;
    bool shadows = false;
    std::string name = "synthetic";
};

int run_synth(const SynthArgs& a) {
    TerrainSpec terrain = default_terrain();
    terrain.size = a.size;
    terrain.grid_n = a.grid;
    terrain.crater_count = a.craters;

    DatasetSpec spec = default_dataset_spec(appearance_from_string(a.variant), a.seed);
    spec.n_views = a.views;
    spec.orbit.width = spec.orbit.height = a.image_size;
    spec.orbit.fov_deg = a.fov;
    spec.orbit.elevation_deg = a.elevation;
    spec.orbit.distance = a.distance;
    spec.sun.phase_min_deg = a.phase_min;
    spec.sun.phase_max_deg = a.phase_max;
    spec.shadows = a.shadows;

    const Heightfield h = make_terrain(terrain, a.seed);
    SceneDataset dataset = make_dataset(h, spec);
    dataset.name = a.name;
    save_dataset(dataset, a.out);
    std::cout << "wrote dataset with " << dataset.views.size() << " views to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string dataset;
    std::string out;
    std::string config;
    std::string variant;
    int iterations = -1;
    std::int64_t seed = -1;
    bool deterministic = false;
};

int run_train(const TrainArgs& a) {
    Config cfg = a.config.empty() ? Config{} : Config::load(a.config);
    if (!a.variant.empty()) cfg.set("variant", a.variant);
    if (a.iterations >= 0) cfg.set("iterations", std::to_string(a.iterations));
    if (a.seed >= 0) cfg.set("seed", std::to_string(a.seed));
    if (a.deterministic) cfg.set("deterministic", "true");
    const TrainConfig tc = TrainConfig::from_config(cfg);

    const SceneDataset dataset = load_dataset(a.dataset);
    const TrainState state = train(dataset, tc, a.out);
    std::cout << "trained " << state.splats.size() << " splats over " << state.iteration
              << " iterations; checkpoints in " << a.out << "\n";
    return 0;
}

// Index by position or by image name.
std::size_t resolve_view(const SceneDataset& d, const std::string& key) {
    for (std::size_t i = 0; i < d.views.size(); ++i)
        if (d.views[i].name == key) return i;
    try {
        const std::size_t idx = std::stoul(key);
        if (idx < d.views.size()) return idx;
    } catch (const std::exception&) {
    }
    throw ValidationError("no view named or numbered '" + key + "'");
}

struct RenderArgs {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    std::string view = "0";
    bool exhaustive = false;
};

int run_render(const RenderArgs& a) {
    const SplatSet splats = load_checkpoint(a.checkpoint);
    const SceneDataset dataset = load_dataset(a.dataset);
    const ViewContext& view = dataset.views[resolve_view(dataset, a.view)];

    RenderOptions opts;
    opts.exhaustive = a.exhaustive;
    const RenderBundle b = render(splats, view, opts);

    fs::create_directories(a.out);
    const auto path = [&](const char* name) { return (fs::path(a.out) / name).string(); };

    // Grayscale intensity is replicated across RGB at export.
    write_png_rgb(path("intensity.png"), b.intensity, b.intensity, b.intensity);
    write_raw_map(path("intensity.raw"), {&b.intensity});
    write_raw_map(path("depth.raw"), {&b.depth});
    write_raw_map(path("accumulation.raw"), {&b.accumulation});

    Image nr = b.normal[0], ng = b.normal[1], nb = b.normal[2];
    for (std::size_t i = 0; i < nr.pixel_count(); ++i) {
        nr[i] = 0.5 * (nr[i] + 1.0);
        ng[i] = 0.5 * (ng[i] + 1.0);
        nb[i] = 0.5 * (nb[i] + 1.0);
    }
    write_png_rgb(path("normal.png"), nr, ng, nb);
    write_raw_map(path("normal.raw"), {&b.normal[0], &b.normal[1], &b.normal[2]});

    if (is_physics(splats.variant)) {
        write_png_gray(path("albedo.png"), b.albedo);
        write_raw_map(path("albedo.raw"), {&b.albedo});
    }
    std::cout << "rendered view " << view.name << " to " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    bool with_mesh = false;
    double voxel = 0.0;
    std::string lpips;
};

int run_eval(const EvalArgs& a) {
    const SplatSet splats = load_checkpoint(a.checkpoint);
    const SceneDataset dataset = load_dataset(a.dataset);

    EvalOptions opts;
    opts.with_mesh = a.with_mesh;
    opts.voxel = a.voxel;
    if (!a.lpips.empty()) opts.lpips = read_lpips_sidecar(a.lpips);

    const MetricReport report = evaluate(splats, dataset, opts);
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_report(report, (fs::path(a.out) / "report.json").string(),
                     (fs::path(a.out) / "report.csv").string());
    }
    std::cout << report_json(report);
    return 0;
}

struct MeshArgs {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    double voxel = 0.0;
    double trunc_voxels = 4.0;
};

int run_mesh(const MeshArgs& a) {
    const SplatSet splats = load_checkpoint(a.checkpoint);
    const SceneDataset dataset = load_dataset(a.dataset);

    const double voxel = a.voxel > 0.0 ? a.voxel : default_voxel_size(splats);
    const TriangleMesh mesh = extract_mesh(splats, dataset.views, voxel, a.trunc_voxels * voxel);

    fs::create_directories(a.out);
    write_mesh_ply((fs::path(a.out) / "mesh.ply").string(), mesh);
    write_mesh_obj((fs::path(a.out) / "mesh.obj").string(), mesh);
    std::cout << "extracted " << mesh.vertices.size() << " vertices / " << mesh.triangles.size()
              << " triangles to " << a.out << "\n";
    return 0;
}

struct FdArgs {
    std::string dataset;
    std::string checkpoint;
    std::string variant = "lambert";
    std::string out;
    std::string view = "0";
    std::uint64_t seed = 0;
    int random_count = 20;
    double step = 1e-4;
};

int run_fdcheck(const FdArgs& a) {
    const SceneDataset dataset = load_dataset(a.dataset);
    const ViewContext& view = dataset.views[resolve_view(dataset, a.view)];

    SplatSet splats;
    if (!a.checkpoint.empty()) {
        splats = load_checkpoint(a.checkpoint);
    } else {
        InitOptions init;
        init.variant = appearance_from_string(a.variant);
        init.seed = a.seed;
        init.random_count = a.random_count;
        std::vector<Vec3> points = dataset.init_points;
        if (points.size() > static_cast<std::size_t>(a.random_count))
            points.resize(a.random_count);
        splats = init_from_points(points, init);
    }

    const FdReport report = fd_check(splats, view, LossConfig{}, a.step);
    const std::string text = report.to_text();
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) throw Error("cannot open " + a.out + " for writing");
        f << text;
    }
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D Gaussian splatting for small-body photometric reconstruction"};
    app.require_subcommand(1);

    SynthArgs sa;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic oracle dataset");
    synth->add_option("--out", sa.out, "output dataset directory")->required();
    synth->add_option("--variant", sa.variant, "reflectance model for the oracle images");
    synth->add_option("--seed", sa.seed, "random seed");
    synth->add_option("--views", sa.views, "number of views (last tenth held out)");
    synth->add_option("--image-size", sa.image_size, "square image resolution");
    synth->add_option("--size", sa.size, "terrain patch edge length, world units");
    synth->add_option("--grid", sa.grid, "heightfield nodes per side");
    synth->add_option("--craters", sa.craters, "number of craters");
    synth->add_option("--fov", sa.fov, "horizontal field of view, degrees");
    synth->add_option("--elevation", sa.elevation, "camera elevation, degrees");
    synth->add_option("--distance", sa.distance, "camera distance from patch center");
    synth->add_option("--phase-min", sa.phase_min, "minimum phase angle, degrees");
    synth->add_option("--phase-max", sa.phase_max, "maximum phase angle, degrees");
    synth->add_flag("--shadows", sa.shadows, "enable cast shadows in the oracle");
    synth->add_option("--name", sa.name, "scene name recorded in the dataset");

    TrainArgs ta;
    CLI::App* tr = app.add_subcommand("train", "optimize a splat model against a dataset");
    tr->add_option("--dataset", ta.dataset, "dataset directory")->required();
    tr->add_option("--out", ta.out, "output directory for checkpoints and logs")->required();
    tr->add_option("--config", ta.config, "key=value config file");
    tr->add_option("--variant", ta.variant, "appearance model override");
    tr->add_option("--iterations", ta.iterations, "iteration count override");
    tr->add_option("--seed", ta.seed, "seed override");
    tr->add_flag("--deterministic", ta.deterministic, "bit-reproducible single-threaded mode");

    RenderArgs ra;
    CLI::App* rd = app.add_subcommand("render", "render maps for one dataset view");
    rd->add_option("--checkpoint", ra.checkpoint, "model checkpoint")->required();
    rd->add_option("--dataset", ra.dataset, "dataset directory")->required();
    rd->add_option("--out", ra.out, "output directory")->required();
    rd->add_option("--view", ra.view, "view index or image name");
    rd->add_flag("--exhaustive", ra.exhaustive, "use the exhaustive reference path");

    EvalArgs ea;
    CLI::App* ev = app.add_subcommand("eval", "compute the metric report for a checkpoint");
    ev->add_option("--checkpoint", ea.checkpoint, "model checkpoint")->required();
    ev->add_option("--dataset", ea.dataset, "dataset directory")->required();
    ev->add_option("--out", ea.out, "directory for report.json / report.csv");
    ev->add_flag("--mesh", ea.with_mesh, "include the mesh Hausdorff metric");
    ev->add_option("--voxel", ea.voxel, "TSDF voxel size (default: scene diagonal / 256)");
    ev->add_option("--lpips", ea.lpips, "sidecar JSON of precomputed perceptual distances");

    MeshArgs ma;
    CLI::App* me = app.add_subcommand("mesh", "fuse depth maps and export a triangle mesh");
    me->add_option("--checkpoint", ma.checkpoint, "model checkpoint")->required();
    me->add_option("--dataset", ma.dataset, "dataset directory (poses)")->required();
    me->add_option("--out", ma.out, "output directory")->required();
    me->add_option("--voxel", ma.voxel, "TSDF voxel size (default: scene diagonal / 256)");
    me->add_option("--trunc-voxels", ma.trunc_voxels, "truncation band in voxels");

    FdArgs fa;
    CLI::App* fd = app.add_subcommand("fdcheck", "finite-difference gradient report");
    fd->add_option("--dataset", fa.dataset, "dataset directory")->required();
    fd->add_option("--checkpoint", fa.checkpoint, "model checkpoint (default: fresh init)");
    fd->add_option("--variant", fa.variant, "appearance model for a fresh init");
    fd->add_option("--view", fa.view, "view index or image name");
    fd->add_option("--seed", fa.seed, "seed for a fresh init");
    fd->add_option("--splats", fa.random_count, "splat count for a fresh init");
    fd->add_option("--step", fa.step, "central-difference step");
    fd->add_option("--out", fa.out, "also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version land here with success codes; real usage errors
        // report the offending flag and map onto the validation exit code.
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) return run_synth(sa);
        if (*tr) return run_train(ta);
        if (*rd) return run_render(ra);
        if (*ev) return run_eval(ea);
        if (*me) return run_mesh(ma);
        if (*fd) return run_fdcheck(fa);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
