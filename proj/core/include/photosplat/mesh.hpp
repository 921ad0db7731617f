#pragma once

#include "photosplat/rasterizer.hpp"
#include "photosplat/splats.hpp"

namespace psplat {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

// Depth maps rendered from every view are fused into a truncated
// signed-distance volume over the splat bounding box (projective distance,
// weighted by the per-pixel accumulation), and the zero level set is
// triangulated by marching cubes. Throws EmptyVolumeError when no depth
// sample lands in the volume.
TriangleMesh extract_mesh(const SplatSet& splats, const std::vector<ViewContext>& views,
                          double voxel, double trunc);

// Default spacing: scene bounding-box diagonal / 256, truncation 4 voxels.
double default_voxel_size(const SplatSet& splats);

void write_mesh_ply(const std::string& path, const TriangleMesh& mesh);
void write_mesh_obj(const std::string& path, const TriangleMesh& mesh);

}  // namespace psplat
