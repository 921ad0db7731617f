#include "photosplat/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "mc_tables.hpp"

namespace psplat {

double default_voxel_size(const SplatSet& splats) {
    const double diag = std::max(splats.extent(), 1e-9);
    return diag / 256.0;
}

namespace {

struct Volume {
    Vec3 origin = Vec3::Zero();
    double voxel = 1.0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<float> tsdf;
    std::vector<float> weight;

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    Vec3 position(int x, int y, int z) const {
        return origin + voxel * Vec3(x, y, z);
    }
};

}  // namespace

TriangleMesh extract_mesh(const SplatSet& splats, const std::vector<ViewContext>& views,
                          double voxel, double trunc) {
    if (views.empty()) throw ValidationError("extract_mesh needs at least one view");
    if (!(voxel > 0)) throw ValidationError("voxel size must be positive");
    if (!(trunc >= 2.0 * voxel)) throw ValidationError("truncation must be at least two voxels");
    if (splats.size() == 0) throw ValidationError("extract_mesh needs a non-empty model");

    const Vec3 lo = splats.bbox_min() - Vec3::Constant(trunc + voxel);
    const Vec3 hi = splats.bbox_max() + Vec3::Constant(trunc + voxel);

    Volume vol;
    vol.origin = lo;
    vol.voxel = voxel;
    vol.nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / voxel)) + 1;
    vol.ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / voxel)) + 1;
    vol.nz = static_cast<int>(std::ceil((hi.z() - lo.z()) / voxel)) + 1;
    const std::size_t total =
        static_cast<std::size_t>(vol.nx) * vol.ny * static_cast<std::size_t>(vol.nz);
    if (total > (std::size_t(1) << 28))
        throw ValidationError("voxel size too small for the scene extent");
    vol.tsdf.assign(total, 0.0f);
    vol.weight.assign(total, 0.0f);

    for (const ViewContext& view : views) {
        const RenderBundle bundle = render(splats, view, RenderOptions{});
        const CameraModel& cam = view.camera;
        for (int z = 0; z < vol.nz; ++z) {
            for (int y = 0; y < vol.ny; ++y) {
                for (int x = 0; x < vol.nx; ++x) {
                    const Vec3 pc = cam.to_camera(vol.position(x, y, z));
                    if (pc.z() <= kDepthEpsilon) continue;
                    const int px = static_cast<int>(std::lround(cam.fx * pc.x() / pc.z() + cam.cx));
                    const int py = static_cast<int>(std::lround(cam.fy * pc.y() / pc.z() + cam.cy));
                    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
                    const double d = bundle.depth.at(py, px);
                    if (d < 0.0) continue;
                    const double sdf = d - pc.z();
                    if (sdf <= -trunc) continue;  // hidden well behind the surface
                    const float value = static_cast<float>(std::min(1.0, sdf / trunc));
                    const float w = static_cast<float>(bundle.accumulation.at(py, px));
                    if (w <= 0.0f) continue;
                    const std::size_t i = vol.index(x, y, z);
                    vol.tsdf[i] = (vol.tsdf[i] * vol.weight[i] + value * w) / (vol.weight[i] + w);
                    vol.weight[i] += w;
                }
            }
        }
    }

    bool any = false;
    for (float w : vol.weight)
        if (w > 0.0f) {
            any = true;
            break;
        }
    if (!any) throw EmptyVolumeError("no depth samples integrated into the volume");

    TriangleMesh mesh;
    // Lattice edges are shared between cells; dedupe vertices through a map
    // keyed by (node index, axis).
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    const auto vertex_on_edge = [&](int x0, int y0, int z0, int axis, double v0,
                                    double v1) -> std::uint32_t {
        const std::uint64_t node =
            (static_cast<std::uint64_t>(z0) * vol.ny + y0) * vol.nx + x0;
        const std::uint64_t key = node * 3 + axis;
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double t = v0 / (v0 - v1);  // zero crossing; signs differ by construction
        t = std::clamp(t, 0.0, 1.0);
        Vec3 p = vol.position(x0, y0, z0);
        p[axis] += t * vol.voxel;
        const auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    for (int z = 0; z + 1 < vol.nz; ++z) {
        for (int y = 0; y + 1 < vol.ny; ++y) {
            for (int x = 0; x + 1 < vol.nx; ++x) {
                double value[8];
                int cube = 0;
                bool valid = true;
                for (int k = 0; k < 8; ++k) {
                    const std::size_t i = vol.index(x + kMcCornerOffset[k][0],
                                                    y + kMcCornerOffset[k][1],
                                                    z + kMcCornerOffset[k][2]);
                    if (vol.weight[i] <= 0.0f) {
                        valid = false;
                        break;
                    }
                    value[k] = vol.tsdf[i];
                    if (value[k] < 0.0) cube |= 1 << k;
                }
                if (!valid || cube == 0 || cube == 255) continue;

                std::uint32_t edge_idx[12];
                for (int e = 0; e < 12; ++e) edge_idx[e] = 0;
                const std::int8_t* row = kMcTriTable[cube];
                for (int e = 0; e < 12; ++e) {
                    bool used = false;
                    for (int j = 0; row[j] >= 0; ++j)
                        if (row[j] == e) {
                            used = true;
                            break;
                        }
                    if (!used) continue;
                    const int a = kMcEdgeCorner[e][0], b = kMcEdgeCorner[e][1];
                    // The edge runs along a single axis from corner a.
                    const int ax = kMcCornerOffset[b][0] - kMcCornerOffset[a][0];
                    const int ay = kMcCornerOffset[b][1] - kMcCornerOffset[a][1];
                    int axis, x0 = x + kMcCornerOffset[a][0], y0 = y + kMcCornerOffset[a][1],
                              z0 = z + kMcCornerOffset[a][2];
                    double va = value[a], vb = value[b];
                    if (ax != 0)
                        axis = 0;
                    else if (ay != 0)
                        axis = 1;
                    else
                        axis = 2;
                    // Canonicalize to the lower lattice node along the axis.
                    if ((axis == 0 && ax < 0) || (axis == 1 && ay < 0) ||
                        (axis == 2 && kMcCornerOffset[b][2] - kMcCornerOffset[a][2] < 0)) {
                        x0 = x + kMcCornerOffset[b][0];
                        y0 = y + kMcCornerOffset[b][1];
                        z0 = z + kMcCornerOffset[b][2];
                        std::swap(va, vb);
                    }
                    edge_idx[e] = vertex_on_edge(x0, y0, z0, axis, va, vb);
                }
                for (int j = 0; row[j] >= 0; j += 3)
                    mesh.triangles.push_back({edge_idx[row[j]], edge_idx[row[j + 1]],
                                              edge_idx[row[j + 2]]});
            }
        }
    }
    return mesh;
}

void write_mesh_ply(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";
    for (const Vec3& v : mesh.vertices) {
        const float xyz[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                              static_cast<float>(v.z())};
        f.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    for (const auto& t : mesh.triangles) {
        const std::uint8_t n = 3;
        f.write(reinterpret_cast<const char*>(&n), 1);
        f.write(reinterpret_cast<const char*>(t.data()), 3 * sizeof(std::uint32_t));
    }
    if (!f) throw Error("failed writing " + path);
}

void write_mesh_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    char line[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        f << line;
    }
    for (const auto& t : mesh.triangles)
        f << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!f) throw Error("failed writing " + path);
}

}  // namespace psplat
